#include "navdp/chart.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>

namespace navdp {

namespace {

constexpr int kTiles = 1;  // images j, k in [-1, 1]

// exp(-q) is exactly zero in double precision past this exponent.
constexpr double kNegligibleExponent = 746.0;

// Cell edge of the land bound table, in chart units.
constexpr double kIndexCell = 0.05;

// Classification margin covering rounding in the bound sums.
constexpr double kBoundSlack = 1e-9;

template <typename Fn>
void for_each_image(const Domain &domain, const Island &island, Vec2 p, Fn &&fn) {
  for (int j = -kTiles; j <= kTiles; ++j) {
    for (int k = -kTiles; k <= kTiles; ++k) {
      const Vec2 d{p.x + j * domain.width - island.center.x, p.y + k * domain.height - island.center.y};
      fn(d);
    }
  }
}

// Minimum of a positive definite quadratic form over the box [lo, hi].
double min_form_over_box(const Island &is, Vec2 lo, Vec2 hi) {
  if (lo.x <= 0.0 && hi.x >= 0.0 && lo.y <= 0.0 && hi.y >= 0.0) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (double x : {lo.x, hi.x}) {
    const double y = std::clamp(-is.quad_b * x / is.quad_c, lo.y, hi.y);
    best = std::min(best, is.quadratic_form({x, y}));
  }
  for (double y : {lo.y, hi.y}) {
    const double x = std::clamp(-is.quad_b * y / is.quad_a, lo.x, hi.x);
    best = std::min(best, is.quadratic_form({x, y}));
  }
  return std::max(best, 0.0);
}

double max_form_over_box(const Island &is, Vec2 lo, Vec2 hi) {
  double best = 0.0;
  for (double x : {lo.x, hi.x})
    for (double y : {lo.y, hi.y}) best = std::max(best, is.quadratic_form({x, y}));
  return best;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

namespace detail {

enum class CellState : std::uint8_t { sea, land, mixed };

// Image term of one island that can matter inside a mixed cell, with its upper bound there.
struct CellTerm {
  std::uint32_t island;
  std::int8_t j, k;
  double upper;
};

struct LandIndex {
  std::once_flag built;
  std::atomic<bool> ready{false};
  int nx = 0;
  int ny = 0;
  double cell_w = 0.0;
  double cell_h = 0.0;
  std::vector<CellState> cells;
  // Mixed cells: terms sorted by decreasing upper bound, with the suffix sums of those bounds.
  std::vector<std::uint32_t> term_begin;
  std::vector<CellTerm> terms;
  std::vector<double> tail_upper;
  // Radius around any point of a cell that is guaranteed to hold only sea cells.
  std::vector<double> clearance;

  std::size_t cell_of(Vec2 wrapped) const {
    const int ix = std::min(static_cast<int>(wrapped.x / cell_w), nx - 1);
    const int iy = std::min(static_cast<int>(wrapped.y / cell_h), ny - 1);
    return static_cast<std::size_t>(iy) * nx + ix;
  }

  void build(const Domain &domain, std::span<const Island> islands) {
    nx = std::max(1, static_cast<int>(std::ceil(domain.width / kIndexCell)));
    ny = std::max(1, static_cast<int>(std::ceil(domain.height / kIndexCell)));
    cell_w = domain.width / nx;
    cell_h = domain.height / ny;
    const std::size_t count = static_cast<std::size_t>(nx) * ny;
    cells.assign(count, CellState::sea);
    term_begin.assign(count + 1, 0);
    std::vector<CellTerm> local;
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const std::size_t c = static_cast<std::size_t>(iy) * nx + ix;
        term_begin[c] = static_cast<std::uint32_t>(terms.size());
        const Vec2 lo{ix * cell_w, iy * cell_h};
        const Vec2 hi{(ix + 1) * cell_w, (iy + 1) * cell_h};
        double upper = 0.0;
        double lower = 0.0;
        local.clear();
        for (std::size_t i = 0; i < islands.size(); ++i) {
          const Island &is = islands[i];
          for (int j = -kTiles; j <= kTiles; ++j) {
            for (int k = -kTiles; k <= kTiles; ++k) {
              const Vec2 dlo{lo.x + j * domain.width - is.center.x, lo.y + k * domain.height - is.center.y};
              const Vec2 dhi = dlo + (hi - lo);
              const double u = is.amplitude * std::exp(-min_form_over_box(is, dlo, dhi));
              upper += u;
              lower += is.amplitude * std::exp(-max_form_over_box(is, dlo, dhi));
              if (u > 0.0)
                local.push_back({static_cast<std::uint32_t>(i), static_cast<std::int8_t>(j),
                                 static_cast<std::int8_t>(k), u});
            }
          }
        }
        CellState s = CellState::mixed;
        if (upper < kLandThreshold - kBoundSlack) s = CellState::sea;
        else if (lower >= kLandThreshold + kBoundSlack) s = CellState::land;
        cells[c] = s;
        if (s != CellState::mixed) continue;
        std::sort(local.begin(), local.end(), [](const CellTerm &a, const CellTerm &b) { return a.upper > b.upper; });
        terms.insert(terms.end(), local.begin(), local.end());
      }
    }
    term_begin[count] = static_cast<std::uint32_t>(terms.size());
    tail_upper.assign(terms.size() + 1, 0.0);
    for (std::size_t c = 0; c < count; ++c) {
      double tail = 0.0;
      for (std::size_t t = term_begin[c + 1]; t-- > term_begin[c];) {
        tail += terms[t].upper;
        tail_upper[t] = tail;
      }
    }
    build_clearance();
  }

  // Multi-source BFS over 8-neighbours gives the Chebyshev cell distance k to the nearest
  // non-sea cell; centres are then at least k * min(cell) apart, minus one cell diagonal for
  // the positions inside both cells.
  void build_clearance() {
    const std::size_t count = cells.size();
    std::vector<int> dist(count, -1);
    std::vector<std::size_t> queue;
    queue.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
      if (cells[c] != CellState::sea) {
        dist[c] = 0;
        queue.push_back(c);
      }
    }
    clearance.assign(count, 0.0);
    if (queue.empty()) {
      std::fill(clearance.begin(), clearance.end(), std::numeric_limits<double>::infinity());
      return;
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t c = queue[head];
      const int ix = static_cast<int>(c % nx);
      const int iy = static_cast<int>(c / nx);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int jx = (ix + dx + nx) % nx;
          const int jy = (iy + dy + ny) % ny;
          const std::size_t n = static_cast<std::size_t>(jy) * nx + jx;
          if (dist[n] >= 0) continue;
          dist[n] = dist[c] + 1;
          queue.push_back(n);
        }
      }
    }
    const double step = std::min(cell_w, cell_h);
    const double diag = std::hypot(cell_w, cell_h);
    for (std::size_t c = 0; c < count; ++c) clearance[c] = std::max(0.0, dist[c] * step - diag);
  }
};

}  // namespace detail

IslandCountRange island_count_range(DensityBand band) {
  switch (band) {
    case DensityBand::low: return {1, 5};
    case DensityBand::medium: return {8, 12};
    case DensityBand::high: return {16, 20};
  }
  return {0, 0};
}

std::string_view to_string(DensityBand band) {
  switch (band) {
    case DensityBand::low: return "low";
    case DensityBand::medium: return "medium";
    case DensityBand::high: return "high";
  }
  return "?";
}

DensityBand parse_density_band(std::string_view text) {
  if (text == "low") return DensityBand::low;
  if (text == "medium") return DensityBand::medium;
  if (text == "high") return DensityBand::high;
  throw std::invalid_argument("unknown density band '" + std::string(text) + "'");
}

bool Island::valid(const Domain &domain) const {
  return amplitude >= 1.0 && amplitude <= 2.0 && quad_a >= 1.0 && quad_c >= 1.0 &&
         quad_b * quad_b < quad_a * quad_c && center.x >= 0.0 && center.x < domain.width &&
         center.y >= 0.0 && center.y < domain.height;
}

Chart::Chart() : Chart(Domain{}, {}) {}

Chart::Chart(Domain domain, std::vector<Island> islands, std::uint64_t seed, DensityBand band)
    : domain_(domain),
      islands_(std::move(islands)),
      seed_(seed),
      band_(band),
      index_(std::make_shared<detail::LandIndex>()) {
  if (!(domain_.width > 0.0) || !(domain_.height > 0.0))
    throw std::invalid_argument("chart dimensions must be positive");
}

double Chart::island_height(std::size_t index, Vec2 p) const {
  const Island &is = islands_.at(index);
  p = domain_.wrap(p);
  double h = 0.0;
  for_each_image(domain_, is, p, [&](Vec2 d) {
    const double q = is.quadratic_form(d);
    if (q < kNegligibleExponent) h += is.amplitude * std::exp(-q);
  });
  return h;
}

Vec2 Chart::island_gradient(std::size_t index, Vec2 p) const {
  const Island &is = islands_.at(index);
  p = domain_.wrap(p);
  Vec2 g;
  for_each_image(domain_, is, p, [&](Vec2 d) {
    const double q = is.quadratic_form(d);
    if (q >= kNegligibleExponent) return;
    const double e = is.amplitude * std::exp(-q);
    g.x -= 2.0 * e * (is.quad_a * d.x + is.quad_b * d.y);
    g.y -= 2.0 * e * (is.quad_b * d.x + is.quad_c * d.y);
  });
  return g;
}

double Chart::land_height(Vec2 p) const {
  double h = 0.0;
  for (std::size_t i = 0; i < islands_.size(); ++i) h += island_height(i, p);
  return h;
}

Vec2 Chart::land_gradient(Vec2 p) const {
  Vec2 g;
  for (std::size_t i = 0; i < islands_.size(); ++i) g += island_gradient(i, p);
  return g;
}

const detail::LandIndex &Chart::land_index() const {
  if (!index_->ready.load(std::memory_order_acquire)) {
    std::call_once(index_->built, [this] {
      index_->build(domain_, islands_);
      index_->ready.store(true, std::memory_order_release);
    });
  }
  return *index_;
}

bool Chart::is_land(Vec2 p) const {
  if (islands_.empty()) return false;
  const detail::LandIndex &idx = land_index();
  const Vec2 w = domain_.wrap(p);
  const std::size_t c = idx.cell_of(w);
  switch (idx.cells[c]) {
    case detail::CellState::sea: return false;
    case detail::CellState::land: return true;
    case detail::CellState::mixed: break;
  }
  // Add terms largest-bound first until the remaining bounds cannot change the answer.
  double partial = 0.0;
  for (std::uint32_t t = idx.term_begin[c]; t < idx.term_begin[c + 1]; ++t) {
    if (partial >= kLandThreshold + kBoundSlack) return true;
    if (partial + idx.tail_upper[t] < kLandThreshold - kBoundSlack) return false;
    const detail::CellTerm &term = idx.terms[t];
    const Island &is = islands_[term.island];
    const Vec2 d{w.x + term.j * domain_.width - is.center.x, w.y + term.k * domain_.height - is.center.y};
    partial += is.amplitude * std::exp(-is.quadratic_form(d));
  }
  if (partial >= kLandThreshold + kBoundSlack) return true;
  if (partial < kLandThreshold - kBoundSlack) return false;
  return land_height(w) >= kLandThreshold;
}

double Chart::clearance(Vec2 p) const {
  if (islands_.empty()) return std::numeric_limits<double>::infinity();
  const detail::LandIndex &idx = land_index();
  return idx.clearance[idx.cell_of(domain_.wrap(p))];
}

std::string Chart::serialize() const {
  std::string out = "chart v1 " + format_double(domain_.width) + " " + format_double(domain_.height) +
                    " " + std::to_string(seed_) + " " + std::string(to_string(band_)) + " " +
                    std::to_string(islands_.size()) + "\n";
  for (const Island &is : islands_) {
    out += format_double(is.amplitude) + " " + format_double(is.quad_a) + " " + format_double(is.quad_b) +
           " " + format_double(is.quad_c) + " " + format_double(is.center.x) + " " +
           format_double(is.center.y) + "\n";
  }
  return out;
}

Chart Chart::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic, version, band_name;
  Domain domain;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version) || magic != "chart")
    throw ChartFormatError("chart file: missing 'chart' header");
  if (version != "v1") throw ChartFormatError("chart file: unsupported version '" + version + "'");
  if (!(in >> domain.width >> domain.height >> seed >> band_name >> count))
    throw ChartFormatError("chart file: malformed header line");
  DensityBand band;
  try {
    band = parse_density_band(band_name);
  } catch (const std::invalid_argument &e) {
    throw ChartFormatError(std::string("chart file: ") + e.what());
  }
  std::vector<Island> islands(count);
  for (std::size_t i = 0; i < count; ++i) {
    Island &is = islands[i];
    if (!(in >> is.amplitude >> is.quad_a >> is.quad_b >> is.quad_c >> is.center.x >> is.center.y))
      throw ChartFormatError("chart file: malformed island line " + std::to_string(i + 1));
    if (!(is.quad_b * is.quad_b < is.quad_a * is.quad_c) || !(is.quad_a > 0.0))
      throw ChartFormatError("chart file: island " + std::to_string(i + 1) + " is not positive definite");
  }
  std::string extra;
  if (in >> extra) throw ChartFormatError("chart file: trailing data after island list");
  if (!(domain.width > 0.0) || !(domain.height > 0.0))
    throw ChartFormatError("chart file: dimensions must be positive");
  return Chart(domain, std::move(islands), seed, band);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Chart::hash() const { return fnv1a64(serialize()); }

Chart sample_chart(std::uint64_t seed, DensityBand band, Domain domain, const ChartSamplingOptions &options) {
  if (!(domain.width > 0.0) || !(domain.height > 0.0))
    throw std::invalid_argument("chart dimensions must be positive");
  std::mt19937_64 rng(seed);
  const IslandCountRange range = island_count_range(band);
  const int count = options.island_count.value_or(std::uniform_int_distribution<int>(range.min, range.max)(rng));

  std::uniform_real_distribution<double> amplitude(1.0, 2.0);
  std::uniform_real_distribution<double> quad(1.0, options.quad_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Island> islands;
  islands.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    Island is;
    is.amplitude = amplitude(rng);
    is.quad_a = quad(rng);
    is.quad_c = quad(rng);
    const double bound = std::sqrt(is.quad_a * is.quad_c);
    // open interval (-bound, bound)
    do {
      is.quad_b = -bound + 2.0 * bound * unit(rng);
    } while (!(is.quad_b * is.quad_b < is.quad_a * is.quad_c));
    is.center = {domain.width * unit(rng), domain.height * unit(rng)};
    islands.push_back(is);
  }
  return Chart(domain, std::move(islands), seed, band);
}

Vec2 sample_free_position(const Chart &chart, std::mt19937_64 &rng, const std::optional<Disc> &exclusion,
                          int max_draws) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Domain &d = chart.domain();
  for (int draw = 0; draw < max_draws; ++draw) {
    const Vec2 p{d.width * unit(rng), d.height * unit(rng)};
    if (chart.is_land(p)) continue;
    if (exclusion && exclusion->contains(d, p)) continue;
    return p;
  }
  throw PlacementError("no free position found after " + std::to_string(max_draws) + " draws (chart seed " +
                       std::to_string(chart.seed()) + ")");
}

}  // namespace navdp

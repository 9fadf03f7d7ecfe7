#include "navdp/value_iteration.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>

namespace navdp {

namespace {

constexpr char kCacheMagic[8] = {'N', 'A', 'V', 'D', 'P', 'V', 'G', '1'};
constexpr std::uint32_t kCacheVersion = 1;

// Bilinear read position inside the lattice.
struct Stencil {
  int ix0, iy0, ix1, iy1;
  double fx, fy;
};

Stencil make_stencil(int n, const Domain &domain, Vec2 p) {
  p = domain.wrap(p);
  const double u = p.x / domain.width * n;
  const double v = p.y / domain.height * n;
  int ix = static_cast<int>(std::floor(u));
  int iy = static_cast<int>(std::floor(v));
  double fx = u - ix;
  double fy = v - iy;
  if (ix >= n) {
    ix = 0;
    fx = 0.0;
  }
  if (iy >= n) {
    iy = 0;
    fy = 0.0;
  }
  return {ix, iy, ix + 1 == n ? 0 : ix + 1, iy + 1 == n ? 0 : iy + 1, fx, fy};
}

double interpolate(const std::vector<double> &v, int n, const Stencil &s) {
  const auto at = [&](int ix, int iy) { return v[static_cast<std::size_t>(iy) * n + ix]; };
  const double bottom = (1.0 - s.fx) * at(s.ix0, s.iy0) + s.fx * at(s.ix1, s.iy0);
  const double top = (1.0 - s.fx) * at(s.ix0, s.iy1) + s.fx * at(s.ix1, s.iy1);
  return (1.0 - s.fy) * bottom + s.fy * top;
}

// Non-terminal transition with its interpolation stencil.
struct Transition {
  double cost;
  Stencil stencil;
};

struct NodeModel {
  std::optional<double> pinned;
  double terminal_min = std::numeric_limits<double>::infinity();
  std::vector<Transition> transitions;
};

// Distinct movement actions: a single zero-throttle representative, then every moving action.
std::vector<int> distinct_action_indices() {
  std::vector<int> out{0};
  for (int i = kHeadingCount; i < kMovementActionCount; ++i) out.push_back(i);
  return out;
}

template <typename Fn>
void parallel_rows(int rows, unsigned threads, Fn &&fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows)));
  if (threads == 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int r = static_cast<int>(t); r < rows; r += static_cast<int>(threads)) fn(r);
    });
  }
}

template <typename T>
void write_pod(std::ostream &out, const T &v) {
  out.write(reinterpret_cast<const char *>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream &in, const std::filesystem::path &path) {
  T v{};
  if (!in.read(reinterpret_cast<char *>(&v), sizeof v))
    throw ValueCacheError("value cache " + path.string() + ": truncated file");
  return v;
}

}  // namespace

std::string_view to_string(ValueVariant v) { return v == ValueVariant::no_current ? "no_current" : "known_current"; }

ValueVariant parse_value_variant(std::string_view text) {
  if (text == "no_current") return ValueVariant::no_current;
  if (text == "known_current") return ValueVariant::known_current;
  throw std::invalid_argument("unknown value variant '" + std::string(text) + "'");
}

ValueGrid::ValueGrid(int resolution, Domain domain, std::vector<double> values)
    : resolution_(resolution), domain_(domain), values_(std::move(values)) {
  if (resolution_ < 1 || values_.size() != static_cast<std::size_t>(resolution_) * resolution_)
    throw std::invalid_argument("value grid size does not match its resolution");
}

double ValueGrid::lookup(Vec2 p) const { return interpolate(values_, resolution_, make_stencil(resolution_, domain_, p)); }

ValueGrid value_iteration(const Chart &chart, const TargetRegion &target, const SolveOptions &options) {
  if (!(options.gamma >= 0.0 && options.gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (options.resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");

  const int n = options.resolution;
  const Domain &domain = chart.domain();
  const std::optional<CurrentSpec> field =
      options.variant == ValueVariant::known_current ? std::optional<CurrentSpec>(options.current) : std::nullopt;
  const std::vector<int> actions = distinct_action_indices();

  // The transition map does not depend on the iterate, so it is built once.
  std::vector<NodeModel> model(static_cast<std::size_t>(n) * n);
  parallel_rows(n, options.threads, [&](int iy) {
    for (int ix = 0; ix < n; ++ix) {
      NodeModel &node = model[static_cast<std::size_t>(iy) * n + ix];
      const Vec2 p{ix * domain.width / n, iy * domain.height / n};
      if (chart.is_land(p)) {
        node.pinned = kCrashCost;
        continue;
      }
      if (target.contains(domain, p)) {
        node.pinned = kTargetCost;
        continue;
      }
      node.transitions.reserve(actions.size());
      for (int a : actions) {
        const MovementAction &action = movement_actions()[a];
        const MotionResult motion = integrate_motion(chart, field, p, action.vector());
        const CostBreakdown c = transition_cost(chart, target, motion, action);
        if (c.terminal())
          node.terminal_min = std::min(node.terminal_min, c.total());
        else
          node.transitions.push_back({c.total(), make_stencil(n, domain, motion.endpoint)});
      }
    }
  });

  std::vector<double> previous(model.size(), 0.0);
  std::vector<double> current(model.size(), 0.0);
  std::vector<double> row_residual(n, 0.0);
  ValueGrid result;
  std::vector<double> history;
  bool converged = false;
  int sweeps = 0;
  while (sweeps < options.max_iterations) {
    ++sweeps;
    parallel_rows(n, options.threads, [&](int iy) {
      double worst = 0.0;
      for (int ix = 0; ix < n; ++ix) {
        const std::size_t i = static_cast<std::size_t>(iy) * n + ix;
        const NodeModel &node = model[i];
        double v;
        if (node.pinned) {
          v = *node.pinned;
        } else {
          v = node.terminal_min;
          for (const Transition &t : node.transitions)
            v = std::min(v, t.cost + options.gamma * interpolate(previous, n, t.stencil));
        }
        current[i] = v;
        worst = std::max(worst, std::abs(v - previous[i]));
      }
      row_residual[iy] = worst;
    });
    const double residual = *std::max_element(row_residual.begin(), row_residual.end());
    history.push_back(residual);
    std::swap(previous, current);
    if (residual <= options.tolerance) {
      converged = true;
      break;
    }
  }

  result = ValueGrid(n, domain, std::move(previous));
  result.gamma = options.gamma;
  result.chart_hash = chart.hash();
  result.target = target;
  result.variant = options.variant;
  result.w_max = options.variant == ValueVariant::known_current ? options.current.w_max : 0.0;
  result.iterations = sweeps;
  result.converged = converged;
  result.residual_history = std::move(history);
  return result;
}

GreedyChoice greedy_action(const ValueGrid &grid, const Chart &chart, const TargetRegion &target, Vec2 p,
                           const std::optional<CurrentSpec> &current) {
  GreedyChoice best{0, std::numeric_limits<double>::infinity()};
  for (const MovementAction &action : movement_actions()) {
    const MotionResult motion = integrate_motion(chart, current, p, action.vector());
    const CostBreakdown c = transition_cost(chart, target, motion, action);
    const double q = c.total() + (c.terminal() ? 0.0 : grid.gamma * grid.lookup(motion.endpoint));
    if (q < best.q_value) best = {action.index(), q};
  }
  return best;
}

bool cache_matches(const ValueGrid &grid, std::uint64_t chart_hash, const TargetRegion &target, double gamma,
                   ValueVariant variant, double w_max, int resolution) {
  return grid.chart_hash == chart_hash && grid.target.center == target.center &&
         grid.target.radius == target.radius && grid.gamma == gamma && grid.variant == variant &&
         (variant == ValueVariant::no_current || grid.w_max == w_max) && grid.resolution() == resolution;
}

void write_value_cache(const ValueGrid &grid, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValueCacheError("value cache " + path.string() + ": cannot open for writing");
  out.write(kCacheMagic, sizeof kCacheMagic);
  write_pod(out, kCacheVersion);
  write_pod(out, grid.chart_hash);
  write_pod(out, grid.gamma);
  write_pod(out, static_cast<std::uint8_t>(grid.variant));
  write_pod(out, grid.w_max);
  write_pod(out, static_cast<std::int32_t>(grid.resolution()));
  write_pod(out, grid.domain().width);
  write_pod(out, grid.domain().height);
  write_pod(out, grid.target.center.x);
  write_pod(out, grid.target.center.y);
  write_pod(out, grid.target.radius);
  write_pod(out, static_cast<std::int32_t>(grid.iterations));
  write_pod(out, static_cast<std::uint8_t>(grid.converged));
  write_pod(out, static_cast<std::uint64_t>(grid.residual_history.size()));
  for (double r : grid.residual_history) write_pod(out, r);
  out.write(reinterpret_cast<const char *>(grid.values().data()),
            static_cast<std::streamsize>(grid.values().size() * sizeof(double)));
  if (!out) throw ValueCacheError("value cache " + path.string() + ": write failed");
}

ValueGrid read_value_cache(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValueCacheError("value cache " + path.string() + ": cannot open");
  char magic[sizeof kCacheMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCacheMagic, sizeof magic) != 0)
    throw ValueCacheError("value cache " + path.string() + ": bad magic");
  if (read_pod<std::uint32_t>(in, path) != kCacheVersion)
    throw ValueCacheError("value cache " + path.string() + ": unsupported version");
  const auto hash = read_pod<std::uint64_t>(in, path);
  const auto gamma = read_pod<double>(in, path);
  const auto variant = read_pod<std::uint8_t>(in, path);
  const auto w_max = read_pod<double>(in, path);
  const auto n = read_pod<std::int32_t>(in, path);
  Domain domain;
  domain.width = read_pod<double>(in, path);
  domain.height = read_pod<double>(in, path);
  TargetRegion target;
  target.center.x = read_pod<double>(in, path);
  target.center.y = read_pod<double>(in, path);
  target.radius = read_pod<double>(in, path);
  const auto iterations = read_pod<std::int32_t>(in, path);
  const auto converged = read_pod<std::uint8_t>(in, path);
  const auto history_len = read_pod<std::uint64_t>(in, path);
  if (n < 1 || n > 100000 || variant > 1 || history_len > 10'000'000)
    throw ValueCacheError("value cache " + path.string() + ": corrupt header");
  std::vector<double> history(history_len);
  for (double &r : history) r = read_pod<double>(in, path);
  std::vector<double> values(static_cast<std::size_t>(n) * n);
  if (!in.read(reinterpret_cast<char *>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
    throw ValueCacheError("value cache " + path.string() + ": truncated values");
  ValueGrid grid(n, domain, std::move(values));
  grid.chart_hash = hash;
  grid.gamma = gamma;
  grid.variant = static_cast<ValueVariant>(variant);
  grid.w_max = w_max;
  grid.target = target;
  grid.iterations = iterations;
  grid.converged = converged != 0;
  grid.residual_history = std::move(history);
  return grid;
}

void write_pgm(std::ostream &out, int width, int height, const std::vector<double> &row_major, double lo, double hi) {
  out << "P5\n" << width << " " << height << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (int r = height - 1; r >= 0; --r) {
    for (int c = 0; c < width; ++c) {
      const double v = std::clamp((row_major[static_cast<std::size_t>(r) * width + c] - lo) / span, 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
}

void write_value_pgm(const ValueGrid &grid, const std::filesystem::path &path, double lo, double hi) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_pgm(out, grid.resolution(), grid.resolution(), grid.values(), lo, hi);
}

void write_value_csv(const ValueGrid &grid, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "ix,iy,x,y,value\n";
  char buf[128];
  for (int iy = 0; iy < grid.resolution(); ++iy) {
    for (int ix = 0; ix < grid.resolution(); ++ix) {
      const Vec2 p = grid.node_position(ix, iy);
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", ix, iy, p.x, p.y, grid.at(ix, iy));
      out << buf;
    }
  }
}

}  // namespace navdp

#include "navdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace navdp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  text = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true/false, got '" + std::string(text) + "'");
}

// Snap a generated grid value to the nearest multiple of 1e-9 so 0.1 * 3 prints as 0.3.
double snap(double v) { return std::round(v * 1e9) / 1e9; }

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string shortest(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<double> &values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ',';
    out += shortest(v);
  }
  return out;
}

// Runs fn(i) for i in [0, count) on up to `threads` workers; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn &&fn) {
  threads = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(threads, count)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

struct EpisodeSummary {
  Outcome outcome = Outcome::timeout;
  Outcome alt_outcome = Outcome::timeout;
  int steps = 0;
  double measurement_cost = 0.0;
};

constexpr int kChartAttemptCap = 100;

}  // namespace

int SweepConfig::charts_for(DensityBand band) const {
  switch (band) {
    case DensityBand::low: return charts_low;
    case DensityBand::medium: return charts_medium;
    case DensityBand::high: return charts_high;
  }
  return 0;
}

SweepConfig SweepConfig::desk() {
  SweepConfig c;
  c.g_values = parse_value_list("0:1:0.1");
  c.wmax_values = parse_value_list("0:1:0.1");
  return c;
}

SweepConfig SweepConfig::full() {
  SweepConfig c = desk();
  c.charts_low = 100;
  c.charts_medium = 150;
  c.charts_high = 250;
  c.starts_per_chart = 10;
  return c;
}

std::vector<double> parse_value_list(std::string_view text) {
  text = trim(text);
  std::vector<double> out;
  if (text.empty()) return out;
  if (text.find(':') != std::string_view::npos) {
    const auto a = text.find(':');
    const auto b = text.find(':', a + 1);
    if (b == std::string_view::npos) throw ConfigError("range '" + std::string(text) + "' must be start:stop:step");
    const double start = parse_number<double>("range", text.substr(0, a));
    const double stop = parse_number<double>("range", text.substr(a + 1, b - a - 1));
    const double step = parse_number<double>("range", text.substr(b + 1));
    if (!(step > 0.0) || stop < start) throw ConfigError("range '" + std::string(text) + "' is empty or has step <= 0");
    const long count = std::lround(std::floor((stop - start) / step + 1e-9)) + 1;
    for (long i = 0; i < count; ++i) out.push_back(snap(start + static_cast<double>(i) * step));
    return out;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    out.push_back(parse_number<double>("list", item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

void set_config_value(SweepConfig &c, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "charts_low") c.charts_low = parse_number<int>(key, value);
  else if (key == "charts_medium") c.charts_medium = parse_number<int>(key, value);
  else if (key == "charts_high") c.charts_high = parse_number<int>(key, value);
  else if (key == "bands") {
    c.bands.clear();
    std::size_t pos = 0;
    while (pos <= value.size()) {
      const auto comma = value.find(',', pos);
      const auto item = trim(value.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      try {
        c.bands.push_back(parse_density_band(item));
      } catch (const std::invalid_argument &e) {
        throw ConfigError(std::string("config key 'bands': ") + e.what());
      }
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  } else if (key == "starts_per_chart") c.starts_per_chart = parse_number<int>(key, value);
  else if (key == "g_values") c.g_values = parse_value_list(value);
  else if (key == "wmax_values") c.wmax_values = parse_value_list(value);
  else if (key == "step_cap") c.step_cap = parse_number<int>(key, value);
  else if (key == "alt_cap_report") c.alt_cap_report = parse_number<int>(key, value);
  else if (key == "base_seed") c.base_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "gamma") c.gamma = parse_number<double>(key, value);
  else if (key == "target_radius") c.target_radius = parse_number<double>(key, value);
  else if (key == "quadrature_resolution") c.quadrature_resolution = parse_number<int>(key, value);
  else if (key == "grid_resolution") c.grid_resolution = parse_number<int>(key, value);
  else if (key == "tolerance") c.tolerance = parse_number<double>(key, value);
  else if (key == "max_iterations") c.max_iterations = parse_number<int>(key, value);
  else if (key == "quad_max") c.quad_max = parse_number<double>(key, value);
  else if (key == "gps_current_shrink") c.gps_current_shrink = parse_number<double>(key, value);
  else if (key == "clamp_current") c.clamp_current = parse_bool(key, value);
  else if (key == "threads") c.threads = parse_number<unsigned>(key, value);
  else if (key == "cache_dir") c.cache_dir = std::string(value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

SweepConfig parse_sweep_config(std::string_view text, SweepConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view l = line;
    if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
    l = trim(l);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    set_config_value(base, trim(l.substr(0, eq)), l.substr(eq + 1));
  }
  validate(base);
  return base;
}

SweepConfig load_sweep_config(const std::filesystem::path &path, SweepConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_sweep_config(ss.str(), std::move(base));
  } catch (const ConfigError &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_sweep_config(const SweepConfig &c) {
  std::string bands;
  for (DensityBand b : c.bands) {
    if (!bands.empty()) bands += ',';
    bands += to_string(b);
  }
  std::ostringstream out;
  out << "charts_low = " << c.charts_low << "\n"
      << "charts_medium = " << c.charts_medium << "\n"
      << "charts_high = " << c.charts_high << "\n"
      << "bands = " << bands << "\n"
      << "starts_per_chart = " << c.starts_per_chart << "\n"
      << "g_values = " << join(c.g_values) << "\n"
      << "wmax_values = " << join(c.wmax_values) << "\n"
      << "step_cap = " << c.step_cap << "\n"
      << "alt_cap_report = " << c.alt_cap_report << "\n"
      << "base_seed = " << c.base_seed << "\n"
      << "gamma = " << shortest(c.gamma) << "\n"
      << "target_radius = " << shortest(c.target_radius) << "\n"
      << "quadrature_resolution = " << c.quadrature_resolution << "\n"
      << "grid_resolution = " << c.grid_resolution << "\n"
      << "tolerance = " << shortest(c.tolerance) << "\n"
      << "max_iterations = " << c.max_iterations << "\n"
      << "quad_max = " << shortest(c.quad_max) << "\n"
      << "gps_current_shrink = " << shortest(c.gps_current_shrink) << "\n"
      << "clamp_current = " << (c.clamp_current ? "true" : "false") << "\n"
      << "threads = " << c.threads << "\n"
      << "cache_dir = " << c.cache_dir.string() << "\n";
  return out.str();
}

void validate(const SweepConfig &c) {
  auto in_unit = [](const std::vector<double> &v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
  };
  if (c.bands.empty()) throw ConfigError("bands must not be empty");
  for (DensityBand b : c.bands)
    if (c.charts_for(b) < 1) throw ConfigError("chart count for band " + std::string(to_string(b)) + " must be >= 1");
  if (c.starts_per_chart < 1) throw ConfigError("starts_per_chart must be >= 1");
  if (c.g_values.empty() || c.wmax_values.empty()) throw ConfigError("g_values and wmax_values must not be empty");
  if (!in_unit(c.g_values) || !in_unit(c.wmax_values)) throw ConfigError("g_values and wmax_values must lie in [0, 1]");
  if (!std::is_sorted(c.g_values.begin(), c.g_values.end()) || !std::is_sorted(c.wmax_values.begin(), c.wmax_values.end()))
    throw ConfigError("g_values and wmax_values must be sorted");
  if (c.step_cap < 1) throw ConfigError("step_cap must be >= 1");
  if (c.alt_cap_report < 0) throw ConfigError("alt_cap_report must be >= 0");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(c.target_radius > 0.0)) throw ConfigError("target_radius must be positive");
  if (c.quadrature_resolution < 1) throw ConfigError("quadrature_resolution must be >= 1");
  if (c.grid_resolution < 2) throw ConfigError("grid_resolution must be >= 2");
  if (!(c.tolerance > 0.0) || c.max_iterations < 1) throw ConfigError("tolerance and max_iterations must be positive");
  if (!(c.quad_max >= 1.0)) throw ConfigError("quad_max must be >= 1");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
}

Outcome classify_outcome(const TrajectoryLog &log, int cap) {
  if (log.steps.empty() || log.step_count() > cap) return Outcome::timeout;
  if (log.outcome == Outcome::timeout) return Outcome::timeout;
  return log.outcome;
}

double aggregate_measurement_cost(std::span<const TrajectoryLog> logs) {
  if (logs.empty()) throw std::invalid_argument("aggregate_measurement_cost needs at least one episode");
  double cost = 0.0;
  long actions = 0;
  for (const TrajectoryLog &log : logs) {
    cost += log.measurement_cost;
    actions += log.step_count();
  }
  return actions > 0 ? cost / static_cast<double>(actions) : 0.0;
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

PolicyParams policy_params(const SweepConfig &config, double growth_rate) {
  PolicyParams p;
  p.growth_rate = growth_rate;
  p.gamma = config.gamma;
  p.quadrature_resolution = config.quadrature_resolution;
  p.step_cap = config.step_cap;
  p.gps_current_shrink = config.gps_current_shrink;
  return p;
}

CurrentSpec current_spec(const SweepConfig &config, double w_max) { return CurrentSpec{w_max, config.clamp_current}; }

ChartSetup prepare_chart(const SweepConfig &config, DensityBand band, int chart_index, std::ostream *log) {
  ChartSamplingOptions sampling;
  sampling.quad_max = config.quad_max;
  SolveOptions solve;
  solve.gamma = config.gamma;
  solve.tolerance = config.tolerance;
  solve.max_iterations = config.max_iterations;
  solve.resolution = config.grid_resolution;

  for (int attempt = 0; attempt < kChartAttemptCap; ++attempt) {
    const std::uint64_t seed =
        mix_seed({config.base_seed, static_cast<std::uint64_t>(band), static_cast<std::uint64_t>(chart_index),
                  static_cast<std::uint64_t>(attempt)});
    ChartSetup setup;
    setup.band = band;
    setup.chart_index = chart_index;
    setup.attempts = attempt + 1;
    setup.chart = sample_chart(seed, band, Domain{}, sampling);
    std::mt19937_64 rng(mix_seed({seed, 0x7461726765747321ULL}));
    try {
      setup.target = TargetRegion{sample_free_position(setup.chart, rng), config.target_radius};

      const std::uint64_t chart_hash = setup.chart.hash();
      std::filesystem::path cache_file;
      bool loaded = false;
      if (!config.cache_dir.empty()) {
        char name[64];
        std::snprintf(name, sizeof name, "chart_%016llx.vgrid", static_cast<unsigned long long>(chart_hash));
        cache_file = config.cache_dir / name;
        if (std::filesystem::exists(cache_file)) {
          try {
            ValueGrid cached = read_value_cache(cache_file);
            if (cache_matches(cached, chart_hash, setup.target, config.gamma, ValueVariant::no_current, 0.0,
                              config.grid_resolution)) {
              setup.grid = std::move(cached);
              loaded = true;
            }
          } catch (const ValueCacheError &) {
            // unreadable entries are simply recomputed
          }
        }
      }
      if (!loaded) {
        setup.grid = value_iteration(setup.chart, setup.target, solve);
        if (!cache_file.empty()) {
          std::filesystem::create_directories(config.cache_dir);
          write_value_cache(setup.grid, cache_file);
        }
      }

      // Starts must lie outside the target and be able to reach it under the solved model.
      for (int s = 0; s < config.starts_per_chart; ++s) {
        bool placed = false;
        for (int draw = 0; draw < kPlacementRetryCap && !placed; ++draw) {
          const Vec2 p = sample_free_position(setup.chart, rng, setup.target);
          if (setup.grid.lookup(p) < 0.0) {
            setup.starts.push_back(p);
            placed = true;
          }
        }
        if (!placed) throw PlacementError("no start position that can reach the target");
      }
      if (log && !setup.grid.converged) {
        *log << "warning: value iteration did not converge for " << to_string(band) << " chart " << chart_index
             << " (seed " << seed << ", final residual " << setup.grid.residual_history.back() << ")\n";
      }
      return setup;
    } catch (const PlacementError &e) {
      if (log) *log << "resampling " << to_string(band) << " chart " << chart_index << ": " << e.what() << "\n";
    }
  }
  throw PlacementError("gave up placing target/starts for " + std::string(to_string(band)) + " chart " +
                       std::to_string(chart_index));
}

SweepResult run_sweep(const SweepConfig &config, std::ostream *log) {
  validate(config);
  std::mutex log_mutex;
  std::ostringstream prep_log;

  struct ChartRef {
    std::size_t band;
    int index;
  };
  std::vector<ChartRef> refs;
  for (std::size_t b = 0; b < config.bands.size(); ++b)
    for (int c = 0; c < config.charts_for(config.bands[b]); ++c) refs.push_back({b, c});

  std::vector<ChartSetup> setups(refs.size());
  std::vector<std::string> setup_logs(refs.size());
  parallel_for(refs.size(), config.threads, [&](std::size_t i) {
    std::ostringstream local;
    setups[i] = prepare_chart(config, config.bands[refs[i].band], refs[i].index, &local);
    setup_logs[i] = local.str();
  });
  if (log)
    for (const std::string &s : setup_logs) *log << s;

  const std::size_t ng = config.g_values.size();
  const std::size_t nw = config.wmax_values.size();
  const std::size_t ns = static_cast<std::size_t>(config.starts_per_chart);
  const std::size_t per_chart = ng * nw * ns;
  std::vector<EpisodeSummary> episodes(refs.size() * per_chart);

  parallel_for(episodes.size(), config.threads, [&](std::size_t e) {
    const std::size_t chart = e / per_chart;
    std::size_t rest = e % per_chart;
    const std::size_t gi = rest / (nw * ns);
    rest %= nw * ns;
    const std::size_t wi = rest / ns;
    const std::size_t si = rest % ns;
    const ChartSetup &setup = setups[chart];
    const CurrentSpec spec = current_spec(config, config.wmax_values[wi]);
    const PolicyParams params = policy_params(config, config.g_values[gi]);
    const PolicyWorld world{setup.chart, spec, setup.target, setup.grid};
    const std::uint64_t seed =
        mix_seed({config.base_seed, static_cast<std::uint64_t>(setup.band), static_cast<std::uint64_t>(setup.chart_index),
                  si, gi, wi});
    const TrajectoryLog t = run_trajectory(world, setup.starts[si], params, seed);
    EpisodeSummary &out = episodes[e];
    out.outcome = classify_outcome(t, config.step_cap);
    out.alt_outcome = config.alt_cap_report > 0 ? classify_outcome(t, config.alt_cap_report) : out.outcome;
    out.steps = t.step_count();
    out.measurement_cost = t.measurement_cost;
  });

  SweepResult result;
  result.bands = config.bands;
  result.g_values = config.g_values;
  result.wmax_values = config.wmax_values;
  result.alt_cap = config.alt_cap_report;
  for (std::size_t b = 0; b < config.bands.size(); ++b) {
    for (std::size_t gi = 0; gi < ng; ++gi) {
      for (std::size_t wi = 0; wi < nw; ++wi) {
        CellStats cell;
        cell.band = config.bands[b];
        cell.g = config.g_values[gi];
        cell.w_max = config.wmax_values[wi];
        long success = 0, crash = 0, alt_success = 0, alt_crash = 0, steps = 0;
        double meas = 0.0;
        for (std::size_t chart = 0; chart < refs.size(); ++chart) {
          if (refs[chart].band != b) continue;
          for (std::size_t si = 0; si < ns; ++si) {
            const EpisodeSummary &ep = episodes[chart * per_chart + (gi * nw + wi) * ns + si];
            ++cell.n;
            success += ep.outcome == Outcome::success;
            crash += ep.outcome == Outcome::crash;
            alt_success += ep.alt_outcome == Outcome::success;
            alt_crash += ep.alt_outcome == Outcome::crash;
            steps += ep.steps;
            meas += ep.measurement_cost;
          }
        }
        const double n = cell.n;
        cell.success_rate = success / n;
        cell.crash_rate = crash / n;
        cell.timeout_rate = (cell.n - success - crash) / n;
        cell.alt_success_rate = alt_success / n;
        cell.alt_crash_rate = alt_crash / n;
        cell.alt_timeout_rate = (cell.n - alt_success - alt_crash) / n;
        cell.mean_meas_cost = steps > 0 ? meas / static_cast<double>(steps) : 0.0;
        cell.mean_steps = static_cast<double>(steps) / n;
        result.cells.push_back(cell);
      }
    }
  }
  return result;
}

void emit_results(const SweepResult &result, const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  auto open = [&](const std::string &name, std::ios::openmode mode = std::ios::trunc) {
    const std::filesystem::path p = dir / name;
    std::ofstream out(p, mode | std::ios::out);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
  };

  {
    std::ofstream out = open("results.csv");
    out << "band,g,w_max,n,success_rate,crash_rate,timeout_rate,mean_meas_cost,mean_steps\n";
    for (const CellStats &c : result.cells)
      out << to_string(c.band) << ',' << fmt17(c.g) << ',' << fmt17(c.w_max) << ',' << c.n << ','
          << fmt17(c.success_rate) << ',' << fmt17(c.crash_rate) << ',' << fmt17(c.timeout_rate) << ','
          << fmt17(c.mean_meas_cost) << ',' << fmt17(c.mean_steps) << '\n';
  }
  if (result.alt_cap > 0) {
    std::ofstream out = open("results_alt_cap.csv");
    out << "band,g,w_max,cap,n,success_rate,crash_rate,timeout_rate\n";
    for (const CellStats &c : result.cells)
      out << to_string(c.band) << ',' << fmt17(c.g) << ',' << fmt17(c.w_max) << ',' << result.alt_cap << ',' << c.n
          << ',' << fmt17(c.alt_success_rate) << ',' << fmt17(c.alt_crash_rate) << ',' << fmt17(c.alt_timeout_rate)
          << '\n';
  }

  const std::size_t ng = result.g_values.size();
  const std::size_t nw = result.wmax_values.size();
  for (std::size_t b = 0; b < result.bands.size(); ++b) {
    const std::string band(to_string(result.bands[b]));
    for (const char *metric : {"success", "crash"}) {
      const bool success = std::string_view(metric) == "success";
      std::vector<double> matrix(ng * nw);
      std::ofstream csv = open(std::string(metric) + "_" + band + ".csv");
      csv << "g\\w_max";
      for (double w : result.wmax_values) csv << ',' << fmt17(w);
      csv << '\n';
      for (std::size_t gi = 0; gi < ng; ++gi) {
        csv << fmt17(result.g_values[gi]);
        for (std::size_t wi = 0; wi < nw; ++wi) {
          const CellStats &c = result.at(b, gi, wi);
          const double v = success ? c.success_rate : c.crash_rate;
          matrix[gi * nw + wi] = v;
          csv << ',' << fmt17(v);
        }
        csv << '\n';
      }
      std::ofstream pgm = open(std::string(metric) + "_" + band + ".pgm", std::ios::binary | std::ios::trunc);
      write_pgm(pgm, static_cast<int>(nw), static_cast<int>(ng), matrix, 0.0, 1.0);
    }
  }
}

std::vector<CellStats> read_results_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<CellStats> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 9) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    CellStats c;
    c.band = parse_density_band(f[0]);
    c.g = std::stod(f[1]);
    c.w_max = std::stod(f[2]);
    c.n = std::stoi(f[3]);
    c.success_rate = std::stod(f[4]);
    c.crash_rate = std::stod(f[5]);
    c.timeout_rate = std::stod(f[6]);
    c.mean_meas_cost = std::stod(f[7]);
    c.mean_steps = std::stod(f[8]);
    rows.push_back(c);
  }
  return rows;
}

}  // namespace navdp

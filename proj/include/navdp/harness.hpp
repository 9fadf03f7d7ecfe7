#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "navdp/belief_policy.hpp"
#include "navdp/chart.hpp"
#include "navdp/value_iteration.hpp"

namespace navdp {

struct SweepConfig {
  int charts_low = 10;
  int charts_medium = 15;
  int charts_high = 25;
  std::vector<DensityBand> bands{DensityBand::low, DensityBand::medium, DensityBand::high};
  int starts_per_chart = 5;
  std::vector<double> g_values;
  std::vector<double> wmax_values;
  int step_cap = 25;
  int alt_cap_report = 20;  // 0 disables the second classification
  std::uint64_t base_seed = 1;

  double gamma = kDefaultGamma;
  double target_radius = kDefaultTargetRadius;
  int quadrature_resolution = 5;
  int grid_resolution = kDefaultGridResolution;
  double tolerance = 1e-6;
  int max_iterations = 500;
  double quad_max = 4.0;
  double gps_current_shrink = 0.5;
  bool clamp_current = false;

  unsigned threads = 1;
  std::filesystem::path cache_dir;  // empty: solved grids are kept in memory only

  int charts_for(DensityBand band) const;

  /// 10/15/25 charts, 5 starts, g and w_max on {0, 0.1, ..., 1}.
  static SweepConfig desk();
  /// 100/150/250 charts, 10 starts, same grid. Takes hours.
  static SweepConfig full();
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sets one field by its name. Lists accept "a,b,c" or an inclusive range "start:stop:step".
void set_config_value(SweepConfig &config, std::string_view key, std::string_view value);
/// `key = value` lines, '#' starts a comment.
SweepConfig parse_sweep_config(std::string_view text, SweepConfig base = SweepConfig::desk());
SweepConfig load_sweep_config(const std::filesystem::path &path, SweepConfig base = SweepConfig::desk());
std::string format_sweep_config(const SweepConfig &config);
void validate(const SweepConfig &config);
std::vector<double> parse_value_list(std::string_view text);

/// Outcome of a log judged against a step cap no larger than the one it was run with.
Outcome classify_outcome(const TrajectoryLog &log, int cap);

/// Total measurement cost divided by the number of movement actions over all logs.
double aggregate_measurement_cost(std::span<const TrajectoryLog> logs);

/// Everything needed to run episodes on one chart of the ensemble.
struct ChartSetup {
  DensityBand band = DensityBand::low;
  int chart_index = 0;
  int attempts = 1;  // chart draws including resamples after placement failures
  Chart chart;
  TargetRegion target;
  std::vector<Vec2> starts;
  ValueGrid grid;
};

/// Deterministic chart, target, starts and solved grid for (band, chart_index).
ChartSetup prepare_chart(const SweepConfig &config, DensityBand band, int chart_index, std::ostream *log = nullptr);

PolicyParams policy_params(const SweepConfig &config, double growth_rate);
CurrentSpec current_spec(const SweepConfig &config, double w_max);

/// Stable 64-bit mix of a sequence of integers (splitmix64 chaining).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

struct CellStats {
  DensityBand band = DensityBand::low;
  double g = 0.0;
  double w_max = 0.0;
  int n = 0;
  double success_rate = 0.0;
  double crash_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_meas_cost = 0.0;
  double mean_steps = 0.0;
  // Same episodes classified at alt_cap_report.
  double alt_success_rate = 0.0;
  double alt_crash_rate = 0.0;
  double alt_timeout_rate = 0.0;
};

struct SweepResult {
  std::vector<DensityBand> bands;
  std::vector<double> g_values;
  std::vector<double> wmax_values;
  int alt_cap = 0;
  std::vector<CellStats> cells;  // band-major, then g, then w_max

  const CellStats &at(std::size_t band, std::size_t gi, std::size_t wi) const {
    return cells[(band * g_values.size() + gi) * wmax_values.size() + wi];
  }
};

SweepResult run_sweep(const SweepConfig &config, std::ostream *log = nullptr);

/// results.csv, results_alt_cap.csv, and per band success/crash matrices as CSV and PGM.
void emit_results(const SweepResult &result, const std::filesystem::path &dir);
/// Reads the rows of results.csv back (band, g, w_max, n, rates, cost, steps).
std::vector<CellStats> read_results_csv(const std::filesystem::path &path);

}  // namespace navdp

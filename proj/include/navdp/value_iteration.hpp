#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "navdp/chart.hpp"
#include "navdp/currents.hpp"
#include "navdp/dynamics.hpp"

namespace navdp {

inline constexpr int kDefaultGridResolution = 152;
inline constexpr double kDefaultGamma = 0.95;

enum class ValueVariant : std::uint8_t { no_current = 0, known_current = 1 };

std::string_view to_string(ValueVariant v);
ValueVariant parse_value_variant(std::string_view text);

/// Converged values on a periodic n x n lattice; node (ix, iy) sits at (ix * w / n, iy * h / n).
/// Storage is row-major in y: values()[iy * n + ix].
class ValueGrid {
 public:
  ValueGrid() = default;
  ValueGrid(int resolution, Domain domain, std::vector<double> values);

  int resolution() const { return resolution_; }
  const Domain &domain() const { return domain_; }
  const std::vector<double> &values() const { return values_; }
  double at(int ix, int iy) const { return values_[static_cast<std::size_t>(iy) * resolution_ + ix]; }
  Vec2 node_position(int ix, int iy) const {
    return {ix * domain_.width / resolution_, iy * domain_.height / resolution_};
  }

  /// Periodic bilinear interpolation; exact at nodes.
  double lookup(Vec2 p) const;

  double gamma = kDefaultGamma;
  std::uint64_t chart_hash = 0;
  TargetRegion target;
  ValueVariant variant = ValueVariant::no_current;
  double w_max = 0.0;  // field used by the known_current variant
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;

 private:
  int resolution_ = 0;
  Domain domain_;
  std::vector<double> values_;
};

struct SolveOptions {
  double gamma = kDefaultGamma;
  double tolerance = 1e-6;
  int max_iterations = 500;
  int resolution = kDefaultGridResolution;
  ValueVariant variant = ValueVariant::no_current;
  /// Field for the known_current variant; ignored for no_current.
  CurrentSpec current;
  unsigned threads = 1;
};

/// Jacobi value iteration from V_0 = 0.
///
/// Each sweep computes V_n(node) = min_a [c(node, a) + gamma * V_{n-1}(endpoint)] over the 96
/// movement actions, with the future term dropped on terminal transitions and V_{n-1} read by
/// periodic bilinear interpolation. Land nodes are pinned to 100 and in-target nodes to -1 from
/// the first sweep on. Stops once the sup-norm change is <= tolerance; `converged` is false if
/// max_iterations ran out first.
ValueGrid value_iteration(const Chart &chart, const TargetRegion &target, const SolveOptions &options = {});

/// Greedy one-step lookahead on a solved grid (ties by action order).
struct GreedyChoice {
  int action_index = 0;
  double q_value = 0.0;
};
GreedyChoice greedy_action(const ValueGrid &grid, const Chart &chart, const TargetRegion &target, Vec2 p,
                           const std::optional<CurrentSpec> &current = std::nullopt);

class ValueCacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary value cache: magic, version, chart hash, gamma, variant, w_max, resolution, domain,
/// target, iteration count, convergence flag, residual history, then row-major float64 values.
void write_value_cache(const ValueGrid &grid, const std::filesystem::path &path);
ValueGrid read_value_cache(const std::filesystem::path &path);

/// True when a cached grid was produced for exactly this chart, target, discount and variant.
bool cache_matches(const ValueGrid &grid, std::uint64_t chart_hash, const TargetRegion &target, double gamma,
                   ValueVariant variant, double w_max, int resolution);

/// 8-bit binary PGM; values are clipped to [lo, hi] and mapped linearly onto 0..255, row 0 = top (max y).
void write_pgm(std::ostream &out, int width, int height, const std::vector<double> &row_major, double lo, double hi);
void write_value_pgm(const ValueGrid &grid, const std::filesystem::path &path, double lo = -1.0, double hi = 1.0);
void write_value_csv(const ValueGrid &grid, const std::filesystem::path &path);

}  // namespace navdp

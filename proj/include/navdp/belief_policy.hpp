#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "navdp/chart.hpp"
#include "navdp/currents.hpp"
#include "navdp/dynamics.hpp"
#include "navdp/value_iteration.hpp"

namespace navdp {

/// The agent's state estimate and the bookkeeping needed to infer currents from GPS fixes.
struct Belief {
  Vec2 est_pos;
  double sigma_p = 0.0;
  Vec2 est_current;
  double sigma_w = 0.0;

  Vec2 last_gps_pos;
  int steps_since_gps = 0;
  Vec2 movement_sum;    // sum of commanded M since the last fix
  Vec2 dead_reckoning;  // unwrapped estimated displacement since the last fix
};

struct PolicyParams {
  /// Per-action growth of the assumed current uncertainty, in [0, 1].
  double growth_rate = 0.0;
  double gamma = kDefaultGamma;
  /// Lattice points per axis of each disc's bounding square.
  int quadrature_resolution = 5;
  MeasurementCosts costs;
  int step_cap = 25;
  /// sigma_w multiplier applied by a GPS fix taken after at least one move.
  double gps_current_shrink = 0.5;
};

/// Everything the policy reads but never changes during an episode.
struct PolicyWorld {
  const Chart &chart;
  const CurrentSpec &current;
  const TargetRegion &target;
  const ValueGrid &grid;
};

/// Offsets of a centred q x q midpoint lattice over [-r, r]^2 that fall inside the disc of radius r.
/// A zero radius yields the single offset (0, 0).
std::vector<Vec2> disc_lattice(double radius, int points_per_axis);

struct QuadratureStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
};

/// Uncertainty-averaged Q value of movement M.
///
/// Averages c(x^ + dx, M) + gamma * V(endpoint) uniformly over position offsets in the disc of
/// radius sigma_p and current offsets in the disc of radius sigma_w. Each sample moves with the
/// constant current clamp(W^ + dw, w_max); the value term is dropped when the sample terminates.
QuadratureStats q_uncertain_stats(const PolicyWorld &world, const Belief &belief, Vec2 movement,
                                  const PolicyParams &params);
double q_uncertain(const PolicyWorld &world, const Belief &belief, Vec2 movement, const PolicyParams &params);

/// Q values for all 96 movement actions in action order.
std::array<double, kMovementActionCount> q_all_actions(const PolicyWorld &world, const Belief &belief,
                                                       const PolicyParams &params);

struct ActionDecision {
  std::vector<MeasurementKind> measurements;
  int action_index = 0;
  double v_min_before = 0.0;  // min Q before any measurement
  double q_chosen = 0.0;      // Q of the chosen action under the final belief
};

/// One decision of the controlled-sensing policy; measurements taken are applied to `belief`.
///
///   V_min > c_gps + c_prof           -> GPS and profiler
///   V_min > c_gps or V(x^) == -1     -> GPS
///   V_min > c_prof                   -> profiler
/// followed by the argmin movement action under the (possibly updated) belief.
ActionDecision select_action(const PolicyWorld &world, Belief &belief, Vec2 true_pos, const PolicyParams &params);

/// Dead-reckon one movement: sigma_w grows by g (capped at w_max), sigma_p grows by the new
/// sigma_w, and the estimate moves with the estimated current.
void propagate_belief(const PolicyWorld &world, Belief &belief, Vec2 movement, const PolicyParams &params);

/// Position fix. Also re-estimates the current from the displacement since the previous fix.
void apply_gps(Belief &belief, const Domain &domain, Vec2 true_pos, double w_max, const PolicyParams &params);

/// Local current measurement; position knowledge is unaffected.
void apply_profiler(Belief &belief, const Chart &chart, const CurrentSpec &spec, Vec2 true_pos);

/// Belief at the start of an episode: exact position and exact (clamped) local current.
Belief initial_belief(const Chart &chart, const CurrentSpec &spec, Vec2 start);

enum class Outcome { success, crash, timeout };
std::string_view to_string(Outcome o);

struct StepRecord {
  int step = 0;
  Belief belief_before;
  Belief belief_after;
  Vec2 true_before;
  Vec2 true_after;
  int action_index = 0;
  std::vector<MeasurementKind> measurements;
  CostBreakdown cost;
  double t_prime = 1.0;
  std::vector<Vec2> path;
};

struct TrajectoryLog {
  std::vector<StepRecord> steps;
  Outcome outcome = Outcome::timeout;
  double total_cost = 0.0;
  double measurement_cost = 0.0;
  std::uint64_t seed = 0;

  int step_count() const { return static_cast<int>(steps.size()); }
};

/// Runs the policy against the true field until the episode terminates or step_cap moves were made.
TrajectoryLog run_trajectory(const PolicyWorld &world, Vec2 start, const PolicyParams &params,
                             std::uint64_t seed = 0);

/// One line per step: step, estimate, uncertainties, truth, action, measurements, costs.
void write_trajectory_log(std::ostream &out, const TrajectoryLog &log);
/// Substep polyline of every step as CSV rows (step, t, x, y).
void write_trajectory_path_csv(std::ostream &out, const TrajectoryLog &log);

}  // namespace navdp

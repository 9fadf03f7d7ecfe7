#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "navdp/chart.hpp"
#include "navdp/currents.hpp"
#include "navdp/geometry.hpp"

namespace navdp {

inline constexpr int kHeadingCount = 16;
inline constexpr int kThrottleCount = 6;
inline constexpr int kMovementActionCount = kHeadingCount * kThrottleCount;

inline constexpr double kCrashCost = 100.0;
inline constexpr double kTargetCost = -1.0;
inline constexpr double kFuelCostPerSpeed = 0.01;

/// Heading h in [0, 16), throttle index k in [0, 6). Speed through the water is the square root of
/// throttle and the discretization is linear in speed: s = k / 5.
struct MovementAction {
  int heading = 0;
  int throttle_index = 0;

  double speed() const { return throttle_index / 5.0; }
  double throttle() const { return speed() * speed(); }
  Vec2 vector() const;

  /// Position in movement_actions(): throttle major, heading minor.
  int index() const { return throttle_index * kHeadingCount + heading; }
  friend constexpr bool operator==(const MovementAction &, const MovementAction &) = default;
};

/// All 96 movement actions ordered throttle-major. Zero-throttle actions appear 16 times.
const std::array<MovementAction, kMovementActionCount> &movement_actions();

enum class MeasurementKind { gps, current_profiler };

struct MeasurementCosts {
  double gps = 0.45;
  double current_profiler = 0.1;

  double of(MeasurementKind kind) const { return kind == MeasurementKind::gps ? gps : current_profiler; }
  double both() const { return gps + current_profiler; }
};

std::string_view to_string(MeasurementKind kind);

using TargetRegion = Disc;

inline constexpr double kDefaultTargetRadius = 0.5;
inline constexpr int kRk4Substeps = 32;
inline constexpr int kCrashBisections = 10;

struct MotionResult {
  Vec2 endpoint;         // wrapped into the fundamental domain
  double t_prime = 1.0;  // < 1 iff the path entered land
  std::vector<Vec2> path;  // unwrapped substep positions, only filled when requested
};

/// Integrates dx/dt = M + W(x) for one unit of time with fixed-step RK4.
///
/// After every substep the land test is applied; on the first land hit the crossing time is
/// bracketed by bisection and the path is truncated at the first sampled land time. A start on
/// land truncates at t = 0. With `current` empty the field is W = 0.
MotionResult integrate_motion(const Chart &chart, const std::optional<CurrentSpec> &current, Vec2 start,
                              Vec2 movement, bool record_path = false);

/// Same contract with the current frozen at `current` for the whole step. Positions at substep
/// boundaries are evaluated in closed form, which is what RK4 yields for a constant field.
MotionResult integrate_constant_current(const Chart &chart, Vec2 start, Vec2 movement, Vec2 current,
                                        bool record_path = false);

struct CostBreakdown {
  double position = 0.0;
  double fuel = 0.0;
  double measurement = 0.0;

  double total() const { return position + fuel + measurement; }
  bool terminal() const { return position != 0.0; }
};

/// c_p for an (endpoint, t_prime) pair produced by one of the integrators above.
double positional_cost(const Chart &chart, const TargetRegion &target, Vec2 endpoint, double t_prime);

/// c = c_p(endpoint) + 0.01 |M| + c_m.
CostBreakdown transition_cost(const Chart &chart, const TargetRegion &target, const MotionResult &motion,
                              const MovementAction &action, std::span<const MeasurementKind> measurements = {},
                              const MeasurementCosts &costs = {});

struct StepResult {
  MotionResult motion;
  CostBreakdown cost;

  bool terminal() const { return cost.terminal(); }
};

/// One environment transition through the true current field. The start must be non-terminal;
/// violating that throws std::logic_error.
StepResult env_step(const Chart &chart, const CurrentSpec &spec, const TargetRegion &target, Vec2 true_state,
                    const MovementAction &action);

}  // namespace navdp

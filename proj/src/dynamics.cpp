#include "navdp/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace navdp {

namespace {

std::array<MovementAction, kMovementActionCount> build_actions() {
  std::array<MovementAction, kMovementActionCount> out{};
  for (int k = 0; k < kThrottleCount; ++k)
    for (int h = 0; h < kHeadingCount; ++h) out[k * kHeadingCount + h] = MovementAction{h, k};
  return out;
}

// `advance(x_n, t_n, dt)` returns the state at t_n + dt given the state x_n at the substep start.
template <typename Advance>
MotionResult integrate(const Chart &chart, Vec2 start, bool record_path, Advance &&advance) {
  MotionResult out;
  if (record_path) {
    out.path.reserve(kRk4Substeps + 1);
    out.path.push_back(start);
  }
  if (chart.is_land(start)) {
    out.endpoint = chart.domain().wrap(start);
    out.t_prime = 0.0;
    return out;
  }
  constexpr double h = 1.0 / kRk4Substeps;
  Vec2 x = start;
  for (int n = 0; n < kRk4Substeps; ++n) {
    const double t = n * h;
    const Vec2 next = advance(x, t, h);
    if (chart.is_land(next)) {
      double lo = 0.0;
      double hi = h;
      Vec2 hit = next;
      for (int it = 0; it < kCrashBisections; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Vec2 probe = advance(x, t, mid);
        if (chart.is_land(probe)) {
          hi = mid;
          hit = probe;
        } else {
          lo = mid;
        }
      }
      if (record_path) out.path.push_back(hit);
      out.endpoint = chart.domain().wrap(hit);
      out.t_prime = t + hi;
      return out;
    }
    x = next;
    if (record_path) out.path.push_back(x);
  }
  out.endpoint = chart.domain().wrap(x);
  out.t_prime = 1.0;
  return out;
}

}  // namespace

Vec2 MovementAction::vector() const {
  const double angle = 2.0 * std::numbers::pi * heading / kHeadingCount;
  const double s = speed();
  return {s * std::cos(angle), s * std::sin(angle)};
}

const std::array<MovementAction, kMovementActionCount> &movement_actions() {
  static const auto actions = build_actions();
  return actions;
}

std::string_view to_string(MeasurementKind kind) {
  return kind == MeasurementKind::gps ? "gps" : "profiler";
}

MotionResult integrate_motion(const Chart &chart, const std::optional<CurrentSpec> &current, Vec2 start,
                              Vec2 movement, bool record_path) {
  if (!current || !(current->w_max > 0.0)) return integrate_constant_current(chart, start, movement, {}, record_path);
  const CurrentSpec spec = *current;
  auto velocity = [&](Vec2 p) { return movement + water_current(chart, spec, p); };
  return integrate(chart, start, record_path, [&](Vec2 x, double, double dt) {
    const Vec2 k1 = velocity(x);
    const Vec2 k2 = velocity(x + (0.5 * dt) * k1);
    const Vec2 k3 = velocity(x + (0.5 * dt) * k2);
    const Vec2 k4 = velocity(x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  });
}

MotionResult integrate_constant_current(const Chart &chart, Vec2 start, Vec2 movement, Vec2 current,
                                        bool record_path) {
  const Vec2 v = movement + current;
  auto at = [&](double t) { return start + t * v; };
  MotionResult out;
  if (record_path) {
    out.path.reserve(kRk4Substeps + 1);
    out.path.push_back(start);
  }
  if (chart.is_land(start)) {
    out.endpoint = chart.domain().wrap(start);
    out.t_prime = 0.0;
    return out;
  }
  constexpr double h = 1.0 / kRk4Substeps;
  const double speed = norm(v);
  int n = 0;  // last substep known to be at sea
  while (n < kRk4Substeps) {
    // Every substep point within the clearance radius of a sea point is itself at sea.
    const double reach = chart.clearance(at(n * h));
    const int skip = speed > 0.0 ? static_cast<int>(std::min<double>(kRk4Substeps, reach / (speed * h))) : kRk4Substeps;
    if (skip >= 1) {
      const int to = std::min(kRk4Substeps, n + skip);
      if (record_path)
        for (int m = n + 1; m <= to; ++m) out.path.push_back(at(m * h));
      n = to;
      continue;
    }
    const double t = n * h;
    const Vec2 next = at(t + h);
    if (chart.is_land(next)) {
      double lo = 0.0;
      double hi = h;
      Vec2 hit = next;
      for (int it = 0; it < kCrashBisections; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Vec2 probe = at(t + mid);
        if (chart.is_land(probe)) {
          hi = mid;
          hit = probe;
        } else {
          lo = mid;
        }
      }
      if (record_path) out.path.push_back(hit);
      out.endpoint = chart.domain().wrap(hit);
      out.t_prime = t + hi;
      return out;
    }
    ++n;
    if (record_path) out.path.push_back(next);
  }
  out.endpoint = chart.domain().wrap(at(1.0));
  out.t_prime = 1.0;
  return out;
}

double positional_cost(const Chart &chart, const TargetRegion &target, Vec2 endpoint, double t_prime) {
  // A complete step only ends on a point the integrator has already tested as sea.
  if (t_prime < 1.0) return kCrashCost;
  if (target.contains(chart.domain(), endpoint)) return kTargetCost;
  return 0.0;
}

CostBreakdown transition_cost(const Chart &chart, const TargetRegion &target, const MotionResult &motion,
                              const MovementAction &action, std::span<const MeasurementKind> measurements,
                              const MeasurementCosts &costs) {
  CostBreakdown c;
  c.position = positional_cost(chart, target, motion.endpoint, motion.t_prime);
  c.fuel = kFuelCostPerSpeed * action.speed();
  for (MeasurementKind m : measurements) c.measurement += costs.of(m);
  return c;
}

StepResult env_step(const Chart &chart, const CurrentSpec &spec, const TargetRegion &target, Vec2 true_state,
                    const MovementAction &action) {
  if (chart.is_land(true_state) || target.contains(chart.domain(), true_state))
    throw std::logic_error("env_step called from a terminal state");
  StepResult r;
  r.motion = integrate_motion(chart, spec, true_state, action.vector(), true);
  r.cost = transition_cost(chart, target, r.motion, action);
  return r;
}

}  // namespace navdp

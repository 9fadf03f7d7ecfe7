#include "navdp/belief_policy.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace navdp {

namespace {

struct WeightedCurrent {
  Vec2 current;
  int weight;
};

// Clamped current samples with exact duplicates merged, in first-occurrence order.
std::vector<WeightedCurrent> current_samples(const Belief &belief, double w_max, int resolution) {
  std::vector<WeightedCurrent> out;
  for (const Vec2 &dw : disc_lattice(belief.sigma_w, resolution)) {
    const Vec2 c = clamp_to_ball(belief.est_current + dw, w_max);
    auto it = std::find_if(out.begin(), out.end(), [&](const WeightedCurrent &w) { return w.current == c; });
    if (it == out.end())
      out.push_back({c, 1});
    else
      ++it->weight;
  }
  return out;
}

QuadratureStats average(const PolicyWorld &world, Vec2 origin, const std::vector<Vec2> &positions,
                        const std::vector<WeightedCurrent> &currents, Vec2 movement, double fuel, double gamma) {
  QuadratureStats s{0.0, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0};
  double sum = 0.0;
  for (const Vec2 &dp : positions) {
    const Vec2 start = origin + dp;
    for (const WeightedCurrent &wc : currents) {
      const MotionResult m = integrate_constant_current(world.chart, start, movement, wc.current);
      const double cp = positional_cost(world.chart, world.target, m.endpoint, m.t_prime);
      const double v = cp + fuel + (cp != 0.0 ? 0.0 : gamma * world.grid.lookup(m.endpoint));
      sum += wc.weight * v;
      s.samples += static_cast<std::size_t>(wc.weight);
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
  }
  s.mean = sum / static_cast<double>(s.samples);
  return s;
}

// Actions sharing a zero movement vector have identical Q; evaluate one and copy.
template <typename Fn>
std::array<double, kMovementActionCount> for_distinct_actions(Fn &&q_of) {
  std::array<double, kMovementActionCount> q{};
  const auto &actions = movement_actions();
  const double still = q_of(actions[0]);
  for (int i = 0; i < kHeadingCount; ++i) q[i] = still;
  for (int i = kHeadingCount; i < kMovementActionCount; ++i) q[i] = q_of(actions[i]);
  return q;
}

int argmin(const std::array<double, kMovementActionCount> &q) {
  int best = 0;
  for (int i = 1; i < kMovementActionCount; ++i)
    if (q[i] < q[best]) best = i;
  return best;
}

}  // namespace

std::vector<Vec2> disc_lattice(double radius, int points_per_axis) {
  if (points_per_axis < 1) throw std::invalid_argument("quadrature resolution must be >= 1");
  if (!(radius > 0.0)) return {Vec2{}};
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(points_per_axis) * points_per_axis);
  const double q = points_per_axis;
  for (int j = 0; j < points_per_axis; ++j) {
    const double uy = 2.0 * (j + 0.5) / q - 1.0;
    for (int i = 0; i < points_per_axis; ++i) {
      const double ux = 2.0 * (i + 0.5) / q - 1.0;
      if (ux * ux + uy * uy <= 1.0) out.push_back({radius * ux, radius * uy});
    }
  }
  return out;
}

QuadratureStats q_uncertain_stats(const PolicyWorld &world, const Belief &belief, Vec2 movement,
                                  const PolicyParams &params) {
  const std::vector<Vec2> positions = disc_lattice(belief.sigma_p, params.quadrature_resolution);
  const std::vector<WeightedCurrent> currents =
      current_samples(belief, world.current.w_max, params.quadrature_resolution);
  return average(world, belief.est_pos, positions, currents, movement, kFuelCostPerSpeed * norm(movement),
                 params.gamma);
}

double q_uncertain(const PolicyWorld &world, const Belief &belief, Vec2 movement, const PolicyParams &params) {
  return q_uncertain_stats(world, belief, movement, params).mean;
}

std::array<double, kMovementActionCount> q_all_actions(const PolicyWorld &world, const Belief &belief,
                                                       const PolicyParams &params) {
  const std::vector<Vec2> positions = disc_lattice(belief.sigma_p, params.quadrature_resolution);
  const std::vector<WeightedCurrent> currents =
      current_samples(belief, world.current.w_max, params.quadrature_resolution);
  return for_distinct_actions([&](const MovementAction &a) {
    return average(world, belief.est_pos, positions, currents, a.vector(), kFuelCostPerSpeed * a.speed(),
                   params.gamma)
        .mean;
  });
}

ActionDecision select_action(const PolicyWorld &world, Belief &belief, Vec2 true_pos, const PolicyParams &params) {
  ActionDecision d;
  std::array<double, kMovementActionCount> q = q_all_actions(world, belief, params);
  d.v_min_before = *std::min_element(q.begin(), q.end());
  const double w_max = world.current.w_max;

  if (d.v_min_before > params.costs.both()) {
    apply_gps(belief, world.chart.domain(), true_pos, w_max, params);
    apply_profiler(belief, world.chart, world.current, true_pos);
    d.measurements = {MeasurementKind::gps, MeasurementKind::current_profiler};
  } else if (d.v_min_before > params.costs.gps || world.grid.lookup(belief.est_pos) <= kTargetCost) {
    apply_gps(belief, world.chart.domain(), true_pos, w_max, params);
    d.measurements = {MeasurementKind::gps};
  } else if (d.v_min_before > params.costs.current_profiler) {
    apply_profiler(belief, world.chart, world.current, true_pos);
    d.measurements = {MeasurementKind::current_profiler};
  }
  if (!d.measurements.empty()) q = q_all_actions(world, belief, params);

  d.action_index = argmin(q);
  d.q_chosen = q[d.action_index];
  return d;
}

void propagate_belief(const PolicyWorld &world, Belief &belief, Vec2 movement, const PolicyParams &params) {
  belief.sigma_w = std::min(belief.sigma_w + params.growth_rate, world.current.w_max);
  belief.sigma_p += belief.sigma_w;
  const MotionResult m = integrate_constant_current(world.chart, belief.est_pos, movement, belief.est_current);
  belief.dead_reckoning += m.t_prime * (movement + belief.est_current);
  belief.est_pos = m.endpoint;
  belief.movement_sum += movement;
  ++belief.steps_since_gps;
}

void apply_gps(Belief &belief, const Domain &domain, Vec2 true_pos, double w_max, const PolicyParams &params) {
  if (belief.steps_since_gps > 0) {
    // Unwrapped displacement: dead reckoning plus the shortest periodic correction to the fix.
    const Vec2 expected = domain.wrap(belief.last_gps_pos + belief.dead_reckoning);
    const Vec2 displacement = belief.dead_reckoning + domain.minimal_image(true_pos - expected);
    belief.est_current =
        clamp_to_ball((displacement - belief.movement_sum) / static_cast<double>(belief.steps_since_gps), w_max);
    belief.sigma_w *= params.gps_current_shrink;
  }
  belief.est_pos = true_pos;
  belief.sigma_p = 0.0;
  belief.last_gps_pos = true_pos;
  belief.steps_since_gps = 0;
  belief.movement_sum = {};
  belief.dead_reckoning = {};
}

void apply_profiler(Belief &belief, const Chart &chart, const CurrentSpec &spec, Vec2 true_pos) {
  belief.est_current = clamp_to_ball(water_current(chart, spec, true_pos), spec.w_max);
  belief.sigma_w = 0.0;
}

Belief initial_belief(const Chart &chart, const CurrentSpec &spec, Vec2 start) {
  Belief b;
  b.est_pos = start;
  b.last_gps_pos = start;
  b.est_current = clamp_to_ball(water_current(chart, spec, start), spec.w_max);
  return b;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::crash: return "crash";
    case Outcome::timeout: return "timeout";
  }
  return "?";
}

TrajectoryLog run_trajectory(const PolicyWorld &world, Vec2 start, const PolicyParams &params, std::uint64_t seed) {
  if (world.chart.is_land(start) || world.target.contains(world.chart.domain(), start))
    throw std::logic_error("trajectory start is terminal");
  TrajectoryLog log;
  log.seed = seed;
  Belief belief = initial_belief(world.chart, world.current, start);
  Vec2 true_pos = world.chart.domain().wrap(start);

  for (int step = 1; step <= params.step_cap; ++step) {
    StepRecord rec;
    rec.step = step;
    rec.belief_before = belief;
    rec.true_before = true_pos;

    ActionDecision decision = select_action(world, belief, true_pos, params);
    const MovementAction &action = movement_actions()[decision.action_index];
    StepResult result = env_step(world.chart, world.current, world.target, true_pos, action);
    for (MeasurementKind m : decision.measurements) result.cost.measurement += params.costs.of(m);

    rec.action_index = decision.action_index;
    rec.measurements = std::move(decision.measurements);
    rec.cost = result.cost;
    rec.t_prime = result.motion.t_prime;
    rec.path = std::move(result.motion.path);
    rec.true_after = result.motion.endpoint;

    log.total_cost += result.cost.total();
    log.measurement_cost += result.cost.measurement;

    if (result.terminal()) {
      rec.belief_after = belief;
      log.steps.push_back(std::move(rec));
      log.outcome = result.cost.position == kCrashCost ? Outcome::crash : Outcome::success;
      return log;
    }
    propagate_belief(world, belief, action.vector(), params);
    rec.belief_after = belief;
    true_pos = result.motion.endpoint;
    log.steps.push_back(std::move(rec));
  }
  log.outcome = Outcome::timeout;
  return log;
}

void write_trajectory_log(std::ostream &out, const TrajectoryLog &log) {
  char buf[512];
  out << "# outcome=" << to_string(log.outcome) << " steps=" << log.step_count() << " seed=" << log.seed << "\n";
  out << "step,est_x,est_y,sigma_p,west_x,west_y,sigma_w,true_x,true_y,heading,throttle,measurements,"
         "c_p,c_f,c_m\n";
  for (const StepRecord &r : log.steps) {
    std::string meas;
    for (MeasurementKind m : r.measurements) {
      if (!meas.empty()) meas += '+';
      meas += to_string(m);
    }
    if (meas.empty()) meas = "none";
    const MovementAction &a = movement_actions()[r.action_index];
    const Belief &b = r.belief_before;
    std::snprintf(buf, sizeof buf,
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%s,%.17g,%.17g,%.17g\n", r.step,
                  b.est_pos.x, b.est_pos.y, b.sigma_p, b.est_current.x, b.est_current.y, b.sigma_w, r.true_before.x,
                  r.true_before.y, a.heading, a.throttle_index, meas.c_str(), r.cost.position, r.cost.fuel,
                  r.cost.measurement);
    out << buf;
  }
}

void write_trajectory_path_csv(std::ostream &out, const TrajectoryLog &log) {
  char buf[160];
  out << "step,t,x,y\n";
  for (const StepRecord &r : log.steps) {
    for (std::size_t i = 0; i < r.path.size(); ++i) {
      const bool last = i + 1 == r.path.size();
      const double t = last ? r.t_prime : static_cast<double>(i) / kRk4Substeps;
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.step, t, r.path[i].x, r.path[i].y);
      out << buf;
    }
  }
}

}  // namespace navdp

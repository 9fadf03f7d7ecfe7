#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "navdp/belief_policy.hpp"
#include "navdp/harness.hpp"

using namespace navdp;

namespace {

// Offsets of a q x q midpoint lattice clipped to the disc, written out independently.
std::vector<Vec2> lattice(double r, int q) {
  if (r == 0.0) return {Vec2{}};
  std::vector<Vec2> out;
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < q; ++i) {
      const double x = -1.0 + (2 * i + 1) / static_cast<double>(q);
      const double y = -1.0 + (2 * j + 1) / static_cast<double>(q);
      if (x * x + y * y <= 1.0) out.push_back({r * x, r * y});
    }
  return out;
}

double sample_value(const PolicyWorld &w, Vec2 start, Vec2 m, Vec2 current, double gamma) {
  const MotionResult r = integrate_constant_current(w.chart, start, m, current);
  const double cp = positional_cost(w.chart, w.target, r.endpoint, r.t_prime);
  return cp + kFuelCostPerSpeed * norm(m) + (cp != 0.0 ? 0.0 : gamma * w.grid.lookup(r.endpoint));
}

// Nested-loop quadrature: every (position, current) lattice pair, uniform weights.
double oracle_q(const PolicyWorld &w, const Belief &b, Vec2 m, double gamma, int q) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const Vec2 &dp : lattice(b.sigma_p, q))
    for (const Vec2 &dw : lattice(b.sigma_w, q)) {
      sum += sample_value(w, b.est_pos + dp, m, clamp_to_ball(b.est_current + dw, w.current.w_max), gamma);
      ++count;
    }
  return sum / static_cast<double>(count);
}

struct Fixture {
  Chart chart;
  CurrentSpec spec;
  TargetRegion target;
  ValueGrid grid;
  PolicyWorld world() const { return {chart, spec, target, grid}; }
};

Fixture one_island(double w_max = 0.5, int resolution = 76) {
  Fixture f;
  f.chart = Chart(Domain{}, {Island{1.6, 1.2, 0.2, 0.9, {4.0, 5.0}}});
  f.spec = CurrentSpec{w_max};
  f.target = TargetRegion{{7.5, 5.5}, 0.5};
  SolveOptions o;
  o.resolution = resolution;
  f.grid = value_iteration(f.chart, f.target, o);
  return f;
}

Fixture random_world(std::uint64_t seed, DensityBand band, double w_max, int resolution = 76) {
  Fixture f;
  f.chart = sample_chart(seed, band);
  f.spec = CurrentSpec{w_max};
  std::mt19937_64 rng(seed);
  f.target = TargetRegion{sample_free_position(f.chart, rng), 0.5};
  SolveOptions o;
  o.resolution = resolution;
  f.grid = value_iteration(f.chart, f.target, o);
  return f;
}

Vec2 free_start_for_test(const Fixture &f) {
  std::mt19937_64 rng(f.chart.seed() + 1000);
  return sample_free_position(f.chart, rng, f.target);
}

Belief belief_at(Vec2 p, double sigma_p = 0.0, Vec2 w = {}, double sigma_w = 0.0) {
  Belief b;
  b.est_pos = p;
  b.last_gps_pos = p;
  b.sigma_p = sigma_p;
  b.est_current = w;
  b.sigma_w = sigma_w;
  return b;
}

}  // namespace

TEST(DiscLattice, CountsAndContainment) {
  EXPECT_EQ(disc_lattice(0.0, 5).size(), 1u);
  EXPECT_EQ(disc_lattice(0.0, 5)[0], (Vec2{0, 0}));
  EXPECT_EQ(disc_lattice(0.3, 5).size(), 21u);
  EXPECT_EQ(disc_lattice(0.3, 1).size(), 1u);
  EXPECT_EQ(disc_lattice(1.0, 41).size(), lattice(1.0, 41).size());
  for (const Vec2 &p : disc_lattice(0.7, 9)) EXPECT_LE(norm(p), 0.7 + 1e-15);
  EXPECT_THROW(disc_lattice(1.0, 0), std::invalid_argument);
}

TEST(QUncertain, DeterministicBeliefIsOneStepLookahead) {
  const Fixture f = one_island();
  const PolicyWorld w = f.world();
  const PolicyParams params;
  for (const MovementAction &a : movement_actions()) {
    const Belief b = belief_at({6.0, 3.0}, 0.0, {0.1, -0.05});
    const double expected = sample_value(w, b.est_pos, a.vector(), b.est_current, params.gamma);
    EXPECT_EQ(q_uncertain(w, b, a.vector(), params), expected);
  }
}

TEST(QUncertain, DegenerateFormsAreExactSpecializations) {
  const Fixture f = one_island(0.6);
  const PolicyWorld w = f.world();
  const PolicyParams params;
  const Vec2 p{6.2, 2.8};
  const Vec2 wh{0.15, 0.1};
  const int q = params.quadrature_resolution;
  for (int ai : {0, 21, 50, 83}) {
    const Vec2 m = movement_actions()[ai].vector();
    // sigma_p = sigma_w = 0
    const double q00 = sample_value(w, p, m, wh, params.gamma);
    EXPECT_NEAR(q_uncertain(w, belief_at(p, 0.0, wh, 0.0), m, params), q00, 1e-12);
    // position disc only
    double sum = 0.0;
    const auto dps = lattice(0.4, q);
    for (const Vec2 &dp : dps) sum += sample_value(w, p + dp, m, wh, params.gamma);
    EXPECT_NEAR(q_uncertain(w, belief_at(p, 0.4, wh, 0.0), m, params), sum / dps.size(), 1e-12);
    // current disc only
    sum = 0.0;
    const auto dws = lattice(0.2, q);
    for (const Vec2 &dw : dws) sum += sample_value(w, p, m, clamp_to_ball(wh + dw, 0.6), params.gamma);
    EXPECT_NEAR(q_uncertain(w, belief_at(p, 0.0, wh, 0.2), m, params), sum / dws.size(), 1e-12);
    // both discs
    const Belief full = belief_at(p, 0.4, wh, 0.2);
    EXPECT_NEAR(q_uncertain(w, full, m, params), oracle_q(w, full, m, params.gamma, q), 1e-12);
    // vanishing radii approach the point form
    EXPECT_NEAR(q_uncertain(w, belief_at(p, 1e-13, wh, 1e-13), m, params), q00, 1e-12);
  }
}

TEST(QUncertain, BoundedBySampleExtremes) {
  const Fixture f = random_world(3, DensityBand::high, 0.7);
  const PolicyWorld w = f.world();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const PolicyParams params;
  for (int i = 0; i < 200; ++i) {
    const Belief b = belief_at({10 * u(rng), 10 * u(rng)}, u(rng), {0.5 * u(rng), -0.3 * u(rng)}, 0.7 * u(rng));
    const Vec2 m = movement_actions()[static_cast<std::size_t>(i % 96)].vector();
    const QuadratureStats s = q_uncertain_stats(w, b, m, params);
    EXPECT_LE(s.min, s.mean + 1e-12);
    EXPECT_LE(s.mean, s.max + 1e-12);
    EXPECT_EQ(s.mean, q_uncertain(w, b, m, params));
  }
}

TEST(QUncertain, FixedCaseMatchesFineOracle) {
  const Fixture f = one_island(0.5, 152);
  const PolicyWorld w = f.world();
  const PolicyParams params;
  const Belief b = belief_at({6.4, 4.6}, 0.3, {0.1, 0.05}, 0.1);
  const Vec2 m = MovementAction{1, 3}.vector();
  const double oracle = oracle_q(w, b, m, params.gamma, 41);
  ASSERT_NE(oracle, 0.0);
  EXPECT_NEAR(q_uncertain(w, b, m, params), oracle, 1e-2 * std::abs(oracle));
}

TEST(QUncertain, RandomCasesMatchFineOracle) {
  const Fixture f = random_world(5, DensityBand::medium, 0.5);
  const PolicyWorld w = f.world();
  PolicyParams params;
  params.quadrature_resolution = 41;
  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int cases = 0;
  while (cases < 50) {
    const Belief b = belief_at({10 * u(rng), 10 * u(rng)}, 0.5 * u(rng), {0.4 * u(rng) - 0.2, 0.4 * u(rng) - 0.2},
                               0.3 * u(rng));
    if (f.chart.is_land(b.est_pos)) continue;
    ++cases;
    const Vec2 m = movement_actions()[static_cast<std::size_t>(cases * 7 % 96)].vector();
    const double oracle = oracle_q(w, b, m, params.gamma, 41);
    EXPECT_NEAR(q_uncertain(w, b, m, params), oracle, 1e-2 * std::max(std::abs(oracle), 1e-12)) << "case " << cases;
  }
}

TEST(QUncertain, AllActionsAgreeWithSingleEvaluation) {
  const Fixture f = random_world(6, DensityBand::medium, 0.4);
  const PolicyWorld w = f.world();
  const PolicyParams params;
  const Belief b = belief_at({2.0, 8.0}, 0.35, {0.1, 0.2}, 0.25);
  const auto q = q_all_actions(w, b, params);
  for (const MovementAction &a : movement_actions()) EXPECT_EQ(q[a.index()], q_uncertain(w, b, a.vector(), params));
}

TEST(Propagate, ZeroGrowthKeepsUncertainty) {
  const Fixture f = one_island(0.5, 38);
  PolicyParams params;
  params.growth_rate = 0.0;
  Belief b = belief_at({8.0, 8.0});
  propagate_belief(f.world(), b, {0.4, 0.0}, params);
  EXPECT_EQ(b.sigma_p, 0.0);
  EXPECT_EQ(b.sigma_w, 0.0);
}

TEST(Propagate, NoCurrentBoundMeansNoGrowth) {
  const Fixture f = one_island(0.0, 38);
  for (double g : {0.1, 0.5, 1.0}) {
    PolicyParams params;
    params.growth_rate = g;
    Belief b = belief_at({8.0, 8.0});
    for (int i = 0; i < 5; ++i) propagate_belief(f.world(), b, {0.2, 0.0}, params);
    EXPECT_EQ(b.sigma_w, 0.0);
    EXPECT_EQ(b.sigma_p, 0.0);
  }
}

TEST(Propagate, RecurrenceByHand) {
  const Fixture f = one_island(1.0, 38);
  PolicyParams params;
  params.growth_rate = 0.1;
  Belief b = belief_at({8.0, 8.0});
  for (int i = 0; i < 3; ++i) propagate_belief(f.world(), b, {0.0, 0.0}, params);
  EXPECT_NEAR(b.sigma_w, 0.3, 1e-15);
  EXPECT_NEAR(b.sigma_p, 0.6, 1e-15);
  EXPECT_EQ(b.steps_since_gps, 3);
}

TEST(Propagate, SigmaWCappedAtBound) {
  const Fixture f = one_island(0.25, 38);
  PolicyParams params;
  params.growth_rate = 0.2;
  Belief b = belief_at({8.0, 8.0});
  for (int i = 0; i < 4; ++i) propagate_belief(f.world(), b, {}, params);
  EXPECT_EQ(b.sigma_w, 0.25);
  EXPECT_NEAR(b.sigma_p, 0.2 + 3 * 0.25, 1e-15);
}

TEST(Propagate, EstimateMovesWithEstimatedCurrent) {
  const Fixture f = one_island(0.5, 38);
  const PolicyParams params;
  Belief b = belief_at({8.0, 8.0}, 0.0, {0.1, -0.2});
  propagate_belief(f.world(), b, {0.6, 0.0}, params);
  EXPECT_NEAR(b.est_pos.x, 8.7, 1e-12);
  EXPECT_NEAR(b.est_pos.y, 7.8, 1e-12);
  EXPECT_EQ(b.movement_sum, (Vec2{0.6, 0.0}));
  propagate_belief(f.world(), b, {0.6, 0.0}, params);
  EXPECT_NEAR(b.est_pos.x, 9.4, 1e-12);
  EXPECT_NEAR(b.movement_sum.x, 1.2, 1e-15);
}

TEST(Gps, ResetsPositionUncertainty) {
  Belief b = belief_at({1.0, 1.0}, 0.8, {0.1, 0.0}, 0.4);
  b.steps_since_gps = 0;
  apply_gps(b, Domain{}, {2.0, 3.0}, 0.5, PolicyParams{});
  EXPECT_EQ(b.sigma_p, 0.0);
  EXPECT_EQ(b.est_pos, (Vec2{2.0, 3.0}));
  EXPECT_EQ(b.last_gps_pos, (Vec2{2.0, 3.0}));
  EXPECT_EQ(b.sigma_w, 0.4);  // nothing to learn without motion
  EXPECT_EQ(b.est_current, (Vec2{0.1, 0.0}));
}

TEST(Gps, SingleStepCurrentEstimate) {
  const Fixture f = one_island(0.5, 38);
  Belief b = belief_at({9.5, 2.0}, 0.0, {}, 0.0);
  PolicyParams params;
  params.growth_rate = 0.2;
  const Vec2 m{0.8, 0.0};
  propagate_belief(f.world(), b, m, params);
  // True drift (0.1, 0.2) carries the vessel across x = 10.
  const Vec2 truth = Domain{}.wrap(Vec2{9.5, 2.0} + m + Vec2{0.1, 0.2});
  apply_gps(b, Domain{}, truth, 0.5, params);
  EXPECT_NEAR(b.est_current.x, 0.1, 1e-12);
  EXPECT_NEAR(b.est_current.y, 0.2, 1e-12);
  EXPECT_NEAR(b.sigma_w, 0.1, 1e-15);
  EXPECT_EQ(b.steps_since_gps, 0);
  EXPECT_EQ(b.movement_sum, (Vec2{0, 0}));
}

TEST(Gps, EstimateIsClamped) {
  Belief b = belief_at({5.0, 5.0});
  b.steps_since_gps = 1;
  b.movement_sum = {0.0, 0.0};
  apply_gps(b, Domain{}, {5.9, 5.0}, 0.3, PolicyParams{});
  EXPECT_NEAR(b.est_current.x, 0.3, 1e-15);
  EXPECT_NEAR(b.est_current.y, 0.0, 1e-15);
}

TEST(Gps, ConstantCurrentRecoveredAfterManySteps) {
  const Fixture f = one_island(1.0, 38);
  const Chart empty;
  const ValueGrid &grid = f.grid;
  const CurrentSpec spec{1.0};
  const PolicyWorld w{empty, spec, f.target, grid};
  PolicyParams params;
  params.growth_rate = 0.3;
  const Vec2 drift{0.3, -0.45};
  for (int k : {1, 3, 8}) {
    const Vec2 start{2.0, 9.0};
    Belief b = belief_at(start);
    Vec2 truth = start;
    for (int i = 0; i < k; ++i) {
      const Vec2 m = movement_actions()[static_cast<std::size_t>(80 + (i * 5) % 16)].vector();
      const MotionResult r = integrate_constant_current(empty, truth, m, drift);
      truth = r.endpoint;
      propagate_belief(w, b, m, params);
    }
    apply_gps(b, empty.domain(), truth, spec.w_max, params);
    EXPECT_NEAR(b.est_current.x, drift.x, 1e-9) << "k " << k;
    EXPECT_NEAR(b.est_current.y, drift.y, 1e-9) << "k " << k;
  }
}

TEST(Profiler, RevealsLocalCurrent) {
  const Fixture f = one_island(0.6, 38);
  Belief b = belief_at({6.0, 6.0}, 0.4, {0.2, 0.2}, 0.3);
  const Vec2 truth{5.8, 6.3};
  apply_profiler(b, f.chart, f.spec, truth);
  EXPECT_EQ(b.sigma_w, 0.0);
  EXPECT_EQ(b.sigma_p, 0.4);
  EXPECT_EQ(b.est_pos, (Vec2{6.0, 6.0}));
  EXPECT_EQ(b.est_current, clamp_to_ball(water_current(f.chart, f.spec, truth), 0.6));
  EXPECT_LE(norm(b.est_current), 0.6);

  const Fixture calm = one_island(0.0, 38);
  apply_profiler(b, calm.chart, calm.spec, truth);
  EXPECT_EQ(b.est_current, (Vec2{0, 0}));
}

TEST(SelectAction, NoMeasurementNearTargetWhenCertain) {
  const Fixture f = one_island(0.0, 152);
  Belief b = belief_at({7.5, 6.6});
  const ActionDecision d = select_action(f.world(), b, {7.5, 6.6}, PolicyParams{});
  EXPECT_TRUE(d.measurements.empty());
  EXPECT_LE(d.v_min_before, 0.1);
  const auto q = q_all_actions(f.world(), b, PolicyParams{});
  EXPECT_EQ(d.action_index, static_cast<int>(std::min_element(q.begin(), q.end()) - q.begin()));
}

TEST(SelectAction, GpsWhenEstimateSitsInTarget) {
  const Fixture f = one_island(0.3, 152);
  Belief b = belief_at(f.target.center, 0.2, {}, 0.1);
  ASSERT_EQ(f.grid.lookup(b.est_pos), -1.0);
  const Vec2 truth{8.5, 7.5};
  const ActionDecision d = select_action(f.world(), b, truth, PolicyParams{});
  ASSERT_LE(d.v_min_before, 0.45);
  ASSERT_FALSE(d.measurements.empty());
  EXPECT_EQ(d.measurements.front(), MeasurementKind::gps);
  EXPECT_EQ(b.est_pos, truth);
  EXPECT_EQ(b.sigma_p, 0.0);
}

TEST(SelectAction, BothMeasurementsWhenTrappedNearIsland) {
  const Fixture f = one_island(0.5, 152);
  const Vec2 truth{5.3, 5.0};
  ASSERT_FALSE(f.chart.is_land(truth));
  Belief b = belief_at(truth, 1.5, {0.0, 0.0}, 0.5);
  const PolicyParams params;
  const auto q_before = q_all_actions(f.world(), b, params);
  ASSERT_GT(*std::min_element(q_before.begin(), q_before.end()), 0.55);
  const ActionDecision d = select_action(f.world(), b, truth, params);
  EXPECT_EQ(d.measurements, (std::vector<MeasurementKind>{MeasurementKind::gps, MeasurementKind::current_profiler}));
  EXPECT_EQ(b.sigma_p, 0.0);
  EXPECT_EQ(b.sigma_w, 0.0);
  EXPECT_EQ(b.est_current, clamp_to_ball(water_current(f.chart, f.spec, truth), 0.5));
  const auto q_after = q_all_actions(f.world(), b, params);
  EXPECT_EQ(d.action_index, static_cast<int>(std::min_element(q_after.begin(), q_after.end()) - q_after.begin()));
  EXPECT_EQ(d.q_chosen, q_after[d.action_index]);
}

TEST(SelectAction, BranchChainAgreesWithDirectEvaluation) {
  const Fixture f = random_world(8, DensityBand::high, 0.5);
  const PolicyParams params;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int seen[4] = {0, 0, 0, 0};  // none, profiler, gps, both
  for (int i = 0; i < 600; ++i) {
    const Vec2 truth{10 * u(rng), 10 * u(rng)};
    if (f.chart.is_land(truth) || f.target.contains(f.chart.domain(), truth)) continue;
    Belief b = belief_at(f.chart.domain().wrap(truth + Vec2{0.3 * u(rng), 0.3 * u(rng)}), 1.5 * u(rng) * u(rng),
                         {0.2 * u(rng), -0.2 * u(rng)}, 0.5 * u(rng));
    b.steps_since_gps = 1 + i % 3;
    const auto q = q_all_actions(f.world(), b, params);
    const double vmin = *std::min_element(q.begin(), q.end());
    std::vector<MeasurementKind> expected;
    if (vmin > 0.55)
      expected = {MeasurementKind::gps, MeasurementKind::current_profiler};
    else if (vmin > 0.45 || f.grid.lookup(b.est_pos) == -1.0)
      expected = {MeasurementKind::gps};
    else if (vmin > 0.1)
      expected = {MeasurementKind::current_profiler};
    const ActionDecision d = select_action(f.world(), b, truth, params);
    EXPECT_EQ(d.v_min_before, vmin);
    EXPECT_EQ(d.measurements, expected);
    ++seen[expected.size() == 2 ? 3 : expected.empty() ? 0 : expected[0] == MeasurementKind::gps ? 2 : 1];
  }
  EXPECT_GT(seen[0], 0);
  EXPECT_GT(seen[2], 0);
  EXPECT_GT(seen[3], 0);
}

// Random beliefs rarely land in the profiler band, so build one: a flat grid of 0.3 over open water.
TEST(SelectAction, ProfilerOnlyForModerateValues) {
  const Chart empty;
  const CurrentSpec spec{0.5};
  const TargetRegion target{{1.0, 1.0}, 0.5};
  const ValueGrid grid(38, empty.domain(), std::vector<double>(38 * 38, 0.3));
  const PolicyWorld w{empty, spec, target, grid};
  const PolicyParams params;
  Belief b = belief_at({6.0, 6.0}, 0.2, {0.1, 0.0}, 0.2);
  const ActionDecision d = select_action(w, b, {6.1, 6.0}, params);
  EXPECT_GT(d.v_min_before, 0.1);
  EXPECT_LE(d.v_min_before, 0.45);
  EXPECT_EQ(d.measurements, std::vector<MeasurementKind>{MeasurementKind::current_profiler});
}

TEST(Trajectory, CalmWaterAlwaysSucceeds) {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Fixture f = random_world(seed, DensityBand::high, 0.0, 152);
    std::mt19937_64 rng(seed + 100);
    int runs = 0;
    while (runs < 5) {
      const Vec2 start = sample_free_position(f.chart, rng, f.target);
      if (!(f.grid.lookup(start) < 0.0)) continue;
      ++runs;
      for (double g : {0.0, 0.6}) {
        PolicyParams params;
        params.growth_rate = g;
        const TrajectoryLog log = run_trajectory(f.world(), start, params);
        EXPECT_EQ(log.outcome, Outcome::success) << "seed " << seed;
      }
    }
  }
}

TEST(Trajectory, MatchesGreedyPolicyWhenCertain) {
  const Fixture f = random_world(4, DensityBand::medium, 0.0, 152);
  std::mt19937_64 rng(9);
  for (int run = 0; run < 5; ++run) {
    const Vec2 start = sample_free_position(f.chart, rng, f.target);
    const TrajectoryLog log = run_trajectory(f.world(), start, PolicyParams{});
    for (const StepRecord &r : log.steps) {
      EXPECT_EQ(r.belief_before.sigma_p, 0.0);
      EXPECT_EQ(r.belief_before.est_pos, r.true_before);
      EXPECT_EQ(r.action_index, greedy_action(f.grid, f.chart, f.target, r.true_before).action_index);
    }
  }
}

TEST(Trajectory, TimeoutAtStepCap) {
  const Chart empty;
  const CurrentSpec spec{0.0};
  const TargetRegion target{{5.0, 5.0}, 0.5};
  SolveOptions o;
  o.resolution = 38;
  const ValueGrid grid = value_iteration(empty, target, o);
  PolicyParams params;
  params.step_cap = 2;
  const TrajectoryLog log = run_trajectory({empty, spec, target, grid}, {0.0, 0.0}, params);
  EXPECT_EQ(log.outcome, Outcome::timeout);
  EXPECT_EQ(log.step_count(), 2);
  for (const StepRecord &r : log.steps) EXPECT_EQ(r.cost.position, 0.0);
}

TEST(Trajectory, TerminalStartIsRejected) {
  const Fixture f = one_island(0.2, 38);
  EXPECT_THROW(run_trajectory(f.world(), {4.0, 5.0}, PolicyParams{}), std::logic_error);
  EXPECT_THROW(run_trajectory(f.world(), f.target.center, PolicyParams{}), std::logic_error);
}

TEST(Trajectory, LogInvariants) {
  const Fixture f = random_world(11, DensityBand::high, 0.6);
  std::mt19937_64 rng(12);
  for (int run = 0; run < 10; ++run) {
    const Vec2 start = sample_free_position(f.chart, rng, f.target);
    PolicyParams params;
    params.growth_rate = 0.1 * run;
    const TrajectoryLog log = run_trajectory(f.world(), start, params, static_cast<std::uint64_t>(run));
    ASSERT_FALSE(log.steps.empty());
    double total = 0.0, meas = 0.0;
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
      const StepRecord &r = log.steps[i];
      EXPECT_LE(norm(r.belief_after.est_current), 0.6 + 1e-15);
      EXPECT_LE(norm(r.belief_before.est_current), 0.6 + 1e-15);
      total += r.cost.total();
      meas += r.cost.measurement;
      if (i + 1 < log.steps.size()) EXPECT_FALSE(r.cost.terminal());
      if (i > 0) {
        const StepRecord &prev = log.steps[i - 1];
        if (prev.measurements.empty()) {
          EXPECT_GE(r.belief_before.sigma_p, prev.belief_before.sigma_p);
          EXPECT_GE(r.belief_before.sigma_w, prev.belief_before.sigma_w);
        }
      }
    }
    EXPECT_NEAR(log.total_cost, total, 1e-12);
    EXPECT_NEAR(log.measurement_cost, meas, 1e-12);
    const double last = log.steps.back().cost.position;
    switch (log.outcome) {
      case Outcome::success: EXPECT_EQ(last, -1.0); break;
      case Outcome::crash: EXPECT_EQ(last, 100.0); break;
      case Outcome::timeout:
        EXPECT_EQ(last, 0.0);
        EXPECT_EQ(log.step_count(), params.step_cap);
        break;
    }
  }
}

TEST(Trajectory, Deterministic) {
  const Fixture f = random_world(13, DensityBand::medium, 0.5);
  const Vec2 start = free_start_for_test(f);
  PolicyParams params;
  params.growth_rate = 0.3;
  std::ostringstream a, b;
  write_trajectory_log(a, run_trajectory(f.world(), start, params, 5));
  write_trajectory_log(b, run_trajectory(f.world(), start, params, 5));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Trajectory, LogFormats) {
  const Fixture f = random_world(13, DensityBand::medium, 0.5);
  const Vec2 start = free_start_for_test(f);
  const TrajectoryLog log = run_trajectory(f.world(), start, PolicyParams{}, 3);
  std::ostringstream out, path;
  write_trajectory_log(out, log);
  write_trajectory_path_csv(path, log);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("# outcome=" + std::string(to_string(log.outcome)), 0), 0u);
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("step,est_x,est_y,sigma_p", 0), 0u);
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, log.step_count());
  EXPECT_EQ(path.str().rfind("step,t,x,y\n", 0), 0u);
}

TEST(Trajectory, GrowthReducesCrashesInStrongCurrents) {
  SweepConfig config = SweepConfig::desk();
  int crashes_g0 = 0, crashes_g7 = 0;
  for (int chart_index = 0; chart_index < 4; ++chart_index) {
    const ChartSetup setup = prepare_chart(config, DensityBand::high, chart_index);
    const CurrentSpec spec = current_spec(config, 0.8);
    const PolicyWorld world{setup.chart, spec, setup.target, setup.grid};
    for (const Vec2 &start : setup.starts) {
      crashes_g0 += run_trajectory(world, start, policy_params(config, 0.0)).outcome == Outcome::crash;
      crashes_g7 += run_trajectory(world, start, policy_params(config, 0.7)).outcome == Outcome::crash;
    }
  }
  EXPECT_GT(crashes_g0, crashes_g7);
}

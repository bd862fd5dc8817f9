#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "vdlab/energy.hpp"

using namespace vdlab;

namespace {

PeriodicField taylor_green(const Grid& g, double scale = 1.0) {
  return PeriodicField::from_function(g, 2, [=](auto x, int c) {
    return scale * (c == 0 ? -std::sin(x[0]) * std::cos(x[1]) : std::cos(x[0]) * std::sin(x[1]));
  });
}

// Constant-in-time trajectory at times 0, dt, ..., (count-1) dt.
FlowTrajectory frozen(const PeriodicField& rho, const PeriodicField& u, double dt, int count) {
  FlowTrajectory tr(rho.grid());
  for (int i = 0; i < count; ++i) tr.append(make_state(rho, u, i * dt));
  return tr;
}

const RunResult& smooth_run() {
  static const RunResult r = [] {
    RunConfig c;
    c.resolution = 64;
    c.dt = 0.02;
    c.T = 1.0;
    c.init.rho_mean = 2.0;
    c.init.rho_amplitude = 0.5;
    c.init.perturbation = 0.3;
    return run(c);
  }();
  return r;
}

}  // namespace

TEST(Energy, AnalyticValues) {
  const auto g = Grid::make(2, 64);
  const auto rho = PeriodicField::constant(g, 1.0);
  const auto u = PeriodicField::from_function(g, 2, [](auto x, int c) { return c == 0 ? std::sin(x[1]) : 0.0; });
  EXPECT_NEAR(energy(rho, u), 2.0 * std::numbers::pi * std::numbers::pi, 1e-12);
  EXPECT_EQ(energy(rho, PeriodicField(g, 2)), 0.0);
  const auto r2 = PeriodicField::from_function(g, 1, [](auto x, int) { return 2.0 + std::cos(x[0]); });
  EXPECT_NEAR(energy(r2, 2.0 * u), 4.0 * energy(r2, u), 1e-12 * energy(r2, u));
  EXPECT_NEAR(relative_drift({2.0, 2.1, 1.8}), 0.1, 1e-15);
}

TEST(TestFunctions, SmoothCompactAndPlateau) {
  const auto s = TestFunction::smooth_compact(1.0, 3.0);
  EXPECT_DOUBLE_EQ(s.value(2.0), 1.0);
  EXPECT_EQ(s.value(1.0), 0.0);
  EXPECT_EQ(s.value(3.5), 0.0);
  for (double t : {1.3, 1.9, 2.6}) {
    const double h = 1e-6;
    EXPECT_NEAR(s.derivative(t), (s.value(t + h) - s.value(t - h)) / (2 * h), 1e-7);
  }
  const auto p = TestFunction::plateau(0.5, 1.0);
  EXPECT_EQ(p.value(0.2), 1.0);
  EXPECT_EQ(p.value(1.0), 0.0);
  EXPECT_NEAR(p.value(0.75), 0.5, 1e-15);
  EXPECT_EQ(s.scaled(0.0).value(2.0), 0.0);
  EXPECT_THROW(TestFunction::smooth_compact(2.0, 1.0), DomainError);
}

TEST(TestFunctions, RampMatchesLinearThenPlateau) {
  const double tau = 0.2, K = 10.0;
  const auto r = TestFunction::ramp(tau, K, 0.6, 0.9);
  const auto p = TestFunction::plateau(0.6, 0.9);
  EXPECT_DOUBLE_EQ(r.value(0.1), 0.5);
  EXPECT_DOUBLE_EQ(r.derivative(0.1), 1.0 / tau);
  for (double t : {0.31, 0.5, 0.7, 0.85}) EXPECT_EQ(r.value(t), p.value(t));
  // C^1 joints at tau and tau + 1/K
  for (double joint : {tau, tau + 1.0 / K}) {
    EXPECT_NEAR(r.value(joint - 1e-9), r.value(joint + 1e-9), 1e-8);
    EXPECT_NEAR(r.derivative(joint - 1e-9), r.derivative(joint + 1e-9), 1e-6);
  }
  EXPECT_THROW(TestFunction::ramp(0.5, 1.0, 0.6, 0.9), DomainError);
}

TEST(TestFunctions, StepProfile) {
  const auto s = TestFunction::step(1.0, 0.4);
  EXPECT_EQ(s.value(0.8), 0.0);
  EXPECT_EQ(s.value(1.2), 1.0);
  EXPECT_DOUBLE_EQ(s.value(1.1), 0.75);
  EXPECT_DOUBLE_EQ(s.derivative(1.0), 2.5);
  EXPECT_EQ(s.derivative(1.3), 0.0);
}

TEST(InitialContinuity, SteadyStateHasNoDefect) {
  const auto g = Grid::make(2, 32);
  const auto rho = PeriodicField::constant(g, 1.0);
  RunConfig c;
  c.resolution = 32;
  c.dt = 0.05;
  c.T = 0.5;
  const auto r = run(c);
  const auto cs = initial_continuity(r.trajectory, rho, taylor_green(g));
  for (std::size_t i = 0; i < cs.t.size(); ++i) {
    EXPECT_LE(std::abs(cs.W[i]), 1e-10);
    EXPECT_LE(cs.sqrt_distance[i], 1e-10);
  }
  EXPECT_TRUE(cs.W_trend.tends_to_zero());
}

TEST(InitialContinuity, InjectedDoubledVelocity) {
  const auto g = Grid::make(2, 32);
  const auto rho = PeriodicField::from_function(g, 1, [](auto x, int) { return 2.0 + std::sin(x[0]); });
  const auto u0 = taylor_green(g);
  const auto cs = initial_continuity(frozen(rho, 2.0 * u0, 0.1, 11), rho, u0);
  for (double w : cs.W) EXPECT_NEAR(w, -2.0 * energy(rho, u0), 1e-10);
  EXPECT_THROW(initial_continuity(frozen(rho, u0, 0.1, 11), -1.0 * rho, u0), DomainError);
}

TEST(InitialContinuity, SmoothRunApproachesInitialData) {
  const auto& r = smooth_run();
  const auto& s0 = r.trajectory.state(0);
  const auto cs = initial_continuity(r.trajectory, s0.rho, s0.u);
  EXPECT_NEAR(cs.sqrt_trend.slope, 1.0, 0.1);  // linear in t
  EXPECT_GT(cs.W_trend.slope, 0.0);
  EXPECT_EQ(cs.W[0], 0.0);
}

TEST(WeakResidual, ZeroVelocityVanishes) {
  const auto g = Grid::make(2, 32);
  const auto rho = PeriodicField::from_function(g, 1, [](auto x, int) { return 2.0 + std::sin(x[0]); });
  const auto w = weak_energy_residual(frozen(rho, PeriodicField(g, 2), 0.05, 61), TestFunction::smooth_compact(1.0, 2.0), 0.6);
  EXPECT_EQ(w.residual, 0.0);
  EXPECT_TRUE(w.weak_solution);
}

TEST(WeakResidual, SolverOutputConvergesUnderRefinement) {
  std::vector<double> dts{0.025, 0.0125}, res;
  for (double dt : dts) {
    RunConfig c;
    c.resolution = 64;
    c.dt = dt;
    c.T = 1.6;
    c.init.rho_mean = 2.0;
    c.init.rho_amplitude = 0.5;
    c.init.perturbation = 0.3;
    const auto w = weak_energy_residual(run(c).trajectory, TestFunction::smooth_compact(0.5, 1.0), 0.4);
    EXPECT_TRUE(w.weak_solution);
    res.push_back(std::abs(w.residual));
  }
  EXPECT_GE(std::log(res[0] / res[1]) / std::log(dts[0] / dts[1]), 2.0);
}

TEST(WeakResidual, ArbitraryFieldsAreFlagged) {
  const auto g = Grid::make(2, 64);
  SynthTrajectorySpec s;
  s.dt = 0.02;
  s.count = 80;
  s.space.mode = SynthMode::divfree_vector;
  const auto w = weak_energy_residual(synth_rough_trajectory(g, s), TestFunction::smooth_compact(0.5, 1.0), 0.4);
  EXPECT_FALSE(w.weak_solution);
  EXPECT_GT(w.relative, 1e-2);
}

TEST(WindowCheck, StepWeightsTelescope) {
  std::vector<double> t, E;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.01 * i);
    E.push_back(3.0);
  }
  const auto w = window_check(t, E, 3.0, 0.5, 0.2);
  EXPECT_NEAR(w.windowed_mean, 3.0, 1e-14);
  EXPECT_LE(w.gap, 1e-14);
  EXPECT_LE(w.snap_error, 1e-12);
  const auto off = window_check(t, E, 3.0, 0.5013, 0.2);
  EXPECT_NEAR(off.snap_error, 0.0013, 1e-12);
  EXPECT_THROW(window_check(t, E, 3.0, 0.05, 0.2), SupportError);
  EXPECT_THROW(window_check(t, E, 3.0, 0.95, 0.2), SupportError);
}

TEST(WindowCheck, SteadyAndSmoothRuns) {
  const auto g = Grid::make(2, 32);
  const auto steady = frozen(PeriodicField::constant(g, 1.0), taylor_green(g), 0.02, 51);
  for (const auto& w : window_table(steady, {0.1, 0.3, 0.6}, {0.04, 0.1, 0.2})) EXPECT_LE(w.gap, 1e-10);
  const auto rows = window_table(smooth_run().trajectory, {0.04, 0.1, 0.3, 0.6, 0.9}, {0.04, 0.08, 0.2});
  EXPECT_EQ(rows.size(), 14u);
  for (const auto& w : rows) EXPECT_LE(w.gap, 1e-6);
}

TEST(WindowCheck, DampedTrajectoryMatchesClosedForm) {
  const auto damped = damped_copy(smooth_run().trajectory);
  for (const auto& w : window_table(damped, {0.1, 0.3, 0.6}, {0.04, 0.2})) {
    EXPECT_NEAR(w.gap, damped_gap(w.t_tilde, w.eps), 1e-3);
    EXPECT_GT(w.gap, 1e-2);
  }
}

TEST(WindowCheck, NestedLimitAgreesWithStrongContinuity) {
  const auto& tr = smooth_run().trajectory;
  const auto cs = initial_continuity(tr, tr.state(0).rho, tr.state(0).u);
  const auto n = nested_window_limit(tr, cs, 0.32, 0.64, 4);
  EXPECT_TRUE(n.agree);
  EXPECT_LE(n.gap_limit, 1e-6);
  EXPECT_NEAR(n.sqrt_slope, 1.0, 0.15);
  // A damped copy breaks energy continuity: the window limit stays near the damped gap.
  const auto damped = damped_copy(tr);
  const auto dc = initial_continuity(damped, tr.state(0).rho, tr.state(0).u);
  const auto nd = nested_window_limit(damped, dc, 0.32, 0.64, 4);
  EXPECT_GT(nd.gap_limit, 1e-2);
}

TEST(Ramp, DoublingDifferencesShrinkLikeOneOverK) {
  const auto g = Grid::make(2, 16);
  const auto rho = PeriodicField::constant(g, 1.0);
  FlowTrajectory tr(g);
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.01 * i;
    tr.append(make_state(rho, std::exp(-0.5 * t) * taylor_green(g), t));
  }
  const auto r = ramp_doubling(tr, 0.2, 5.0, 4, 0.6, 0.9);
  ASSERT_EQ(r.difference.size(), 3u);
  for (std::size_t k = 0; k < r.difference.size(); ++k) {
    EXPECT_GT(r.difference[k], 0.0);
    EXPECT_LE(r.K[k] * r.difference[k], 2.0 * r.K[0] * r.difference[0]);
  }
  EXPECT_LT(r.difference.back(), r.difference.front());
  EXPECT_NEAR(r.residual.back(), r.limit, 2.0 * r.difference.back());

  // Constant energy: every ramp integrates to zero.
  const auto flat = frozen(rho, taylor_green(g), 0.01, 101);
  for (double v : ramp_doubling(flat, 0.2, 5.0, 3, 0.6, 0.9).residual) EXPECT_LE(std::abs(v), 1e-12);
}

TEST(Monitor, SteadyStateIsConstant) {
  const auto g = Grid::make(2, 32);
  const auto m = momentum_monitor(frozen(PeriodicField::constant(g, 1.0), taylor_green(g), 0.1, 4));
  ASSERT_EQ(m.size(), 4u);
  ASSERT_EQ(m[0].size(), 4u);
  for (const auto& row : m)
    for (std::size_t k = 0; k < row.size(); ++k) EXPECT_EQ(row[k], m[0][k]);
}

TEST(Report, CsvLayout) {
  const auto& tr = smooth_run().trajectory;
  const auto rep = energy_report(tr, tr.state(0).rho, tr.state(0).u, {0.1}, {0.04});
  EXPECT_LE(rep.max_drift, 1e-8);
  std::ostringstream a, b;
  write_energy_csv(a, rep);
  write_window_csv(b, rep.windows);
  std::istringstream ia(a.str()), ib(b.str());
  std::string line;
  std::getline(ia, line);
  EXPECT_EQ(line[0], '#');
  std::getline(ia, line);
  EXPECT_EQ(line, "t,E,W,sqrt_continuity,div_residual");
  std::getline(ib, line);
  std::getline(ib, line);
  EXPECT_EQ(line, "t_tilde,eps,windowed_mean,E0,gap,snap_error");
}

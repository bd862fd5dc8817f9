#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "vdlab/euler.hpp"

using namespace vdlab;

namespace {

double max_diff(const PeriodicField& a, const PeriodicField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double l2_diff(const PeriodicField& a, const PeriodicField& b) {
  auto d = a;
  d -= b;
  return lp_norm(d, 2.0);
}

PeriodicField taylor_green(const Grid& g) {
  return PeriodicField::from_function(g, 2, [](auto x, int c) {
    return c == 0 ? -std::sin(x[0]) * std::cos(x[1]) : std::cos(x[0]) * std::sin(x[1]);
  });
}

PeriodicField sinx_siny_density(const Grid& g, double mean, double amp) {
  return PeriodicField::from_function(g, 1, [=](auto x, int) { return mean + amp * std::sin(x[0]) * std::sin(x[1]); });
}

RunConfig variable_density(int n, double dt, double T) {
  RunConfig c;
  c.resolution = n;
  c.dt = dt;
  c.T = T;
  c.init.rho_mean = 2.0;
  c.init.rho_amplitude = 0.5;
  c.init.perturbation = 0.3;
  return c;
}

}  // namespace

TEST(Projection, DivergenceFreeInputIsUntouched) {
  const auto g = Grid::make(2, 64);
  const auto u = taylor_green(g);
  const auto p = project(sinx_siny_density(g, 2.0, 0.5), u);
  EXPECT_LE(p.P.max_abs(), 1e-11);
  EXPECT_LE(max_diff(p.u, u), 1e-11);
  EXPECT_EQ(p.iterations, 0);
}

TEST(Projection, PureGradientIsAnnihilated) {
  const auto g = Grid::make(2, 64);
  const auto phi = PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[0]); });
  for (bool dealiased : {false, true}) {
    ProjectionOptions opt;
    opt.dealias = dealiased;
    const auto p = project(PeriodicField::constant(g, 1.0), gradient(phi), opt);
    EXPECT_LE(p.u.max_abs(), 1e-10);
    EXPECT_LE(max_diff(p.P, phi), 1e-10);  // phi has zero mean already
  }
}

TEST(Projection, RecoversManufacturedPressure) {
  const auto g = Grid::make(2, 64);
  const auto rho = PeriodicField::from_function(g, 1, [](auto x, int) { return 2.0 + std::sin(x[0]) * std::cos(x[1]); });
  const auto P = PeriodicField::from_function(g, 1, [](auto x, int) { return std::cos(x[0]) + std::cos(x[1]); });
  // rhs = div(grad P / rho), assembled pointwise from analytic derivatives.
  const auto rhs = PeriodicField::from_function(g, 1, [](auto x, int) {
    const double r = 2.0 + std::sin(x[0]) * std::cos(x[1]);
    const double rx = std::cos(x[0]) * std::cos(x[1]), ry = -std::sin(x[0]) * std::sin(x[1]);
    const double px = -std::sin(x[0]), py = -std::sin(x[1]);
    const double lap = -std::cos(x[0]) - std::cos(x[1]);
    return lap / r - (rx * px + ry * py) / (r * r);
  });
  for (bool dealiased : {false, true}) {
    ProjectionOptions opt;
    opt.dealias = dealiased;
    const auto s = solve_pressure(rho, rhs, opt);
    EXPECT_LE(l2_diff(s.P, P), 1e-9);
    EXPECT_LE(s.residual, 1e-11);
    EXPECT_GT(s.iterations, 1);
  }
}

TEST(Projection, ReportsStallAndDensityFloor) {
  const auto g = Grid::make(2, 32);
  const auto rho = sinx_siny_density(g, 2.0, 1.5);
  const auto u = PeriodicField::from_function(g, 2, [](auto x, int c) { return c == 0 ? std::sin(x[0]) : 0.0; });
  ProjectionOptions opt;
  opt.max_iterations = 1;
  try {
    project(rho, u, opt);
    FAIL() << "expected a stalled solve";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual, 1e-11);
  }
  EXPECT_THROW(project(sinx_siny_density(g, 1.0, 1.0), u), DensityFloorError);
}

TEST(Projection, ProjectedFieldIsDivergenceFree) {
  const auto g = Grid::make(2, 64);
  const auto rho = sinx_siny_density(g, 2.0, 0.5);
  const auto u = PeriodicField::from_function(g, 2, [](auto x, int c) {
    return c == 0 ? std::sin(x[0]) * std::cos(2 * x[1]) : std::cos(3 * x[0] + x[1]);
  });
  const auto p = project(rho, u);
  EXPECT_LE(divergence(p.u).max_abs(), 1e-10);
  EXPECT_NEAR(p.P.integral(), 0.0, 1e-12);
}

TEST(Solver, ZeroVelocityIsFixedPoint) {
  const auto g = Grid::make(2, 32);
  const EulerSolver solver;
  const auto s = solver.prepare(sinx_siny_density(g, 2.0, 0.5), PeriodicField(g, 2));
  const auto next = solver.step(solver.step(s, 0.05), 0.05);
  EXPECT_LE(max_diff(next.rho, s.rho), 1e-12);
  EXPECT_LE(next.u.max_abs(), 1e-12);
}

TEST(Solver, TaylorGreenIsSteady) {
  RunConfig c;
  c.resolution = 128;
  c.dt = 0.02;
  c.T = 1.0;
  c.every = 50;
  const auto r = run(c);
  const auto& u0 = r.trajectory.state(0).u;
  const auto& u1 = r.trajectory.state(r.trajectory.size() - 1).u;
  EXPECT_LE(l2_diff(u1, u0) / lp_norm(u0, 2.0), 1e-6);
}

TEST(Solver, FourthOrderInTime) {
  std::vector<double> dts{0.08, 0.04, 0.02, 0.005};
  std::vector<PeriodicField> end;
  for (double dt : dts) {
    auto c = variable_density(32, dt, 0.8);
    c.every = static_cast<int>(std::round(0.8 / dt));
    c.solver.max_cfl = 2.0;
    end.push_back(run(c).trajectory.snapshots().back().u);
  }
  std::vector<double> h, err;
  for (std::size_t i = 0; i + 1 < dts.size(); ++i) {
    h.push_back(dts[i]);
    err.push_back(l2_diff(end[i], end.back()));
  }
  EXPECT_NEAR(fit_loglog(h, err).slope, 4.0, 0.3);
}

TEST(Solver, ConservesMassMomentumAndDivergence) {
  auto c = variable_density(64, 0.02, 0.5);
  c.init.kind = InitKind::rayleigh_taylor_like;
  c.init.rho_amplitude = 0.4;
  c.init.width = 0.5;
  c.init.amplitude = 0.5;
  const auto r = run(c);
  const auto m0 = momentum(r.trajectory.state(0));
  const double M0 = mass(r.trajectory.state(0));
  for (std::size_t i = 1; i < r.trajectory.size(); ++i) {
    const auto& s = r.trajectory.state(i);
    EXPECT_LE(std::abs(mass(s) - M0) / M0, 1e-10);
    EXPECT_LE(divergence(s.u).max_abs(), 1e-9);
    const auto m = momentum(s);
    for (std::size_t a = 0; a < m.size(); ++a) EXPECT_LE(std::abs(m[a] - m0[a]), 1e-11 * static_cast<double>(i));
  }
}

TEST(Solver, SmoothVariableDensityInvariants) {
  auto c = variable_density(128, 0.01, 1.0);  // 64^2 under-resolves the extrema at the 1e-6 level
  c.every = 50;
  const auto r = run(c);
  const auto& a = r.trajectory.state(0);
  const auto& b = r.trajectory.snapshots().back();
  EXPECT_LE(std::abs(energy(b) - energy(a)) / energy(a), 1e-6);
  const auto [lo0, hi0] = interpolant_extrema(a.rho);
  const auto [lo1, hi1] = interpolant_extrema(b.rho);
  EXPECT_NEAR(lo0, 1.5, 1e-12);
  EXPECT_NEAR(hi0, 2.5, 1e-12);
  EXPECT_LE(std::abs(lo1 - lo0) / lo0, 1e-6);
  EXPECT_LE(std::abs(hi1 - hi0) / hi0, 1e-6);
  EXPECT_GT(l2_diff(b.u, a.u), 1e-3);  // the flow actually evolves
}

TEST(Run, ZeroVelocityGivesIdenticalSnapshots) {
  RunConfig c;
  c.resolution = 32;
  c.dt = 0.1;
  c.T = 1.0;
  c.init.amplitude = 0.0;
  c.init.rho_mean = 2.0;
  c.init.rho_amplitude = 0.5;
  const auto r = run(c);
  ASSERT_EQ(r.trajectory.size(), 11u);
  for (const auto& s : r.trajectory.snapshots()) {
    EXPECT_EQ(max_diff(s.rho, r.trajectory.state(0).rho), 0.0);
    EXPECT_EQ(s.u.max_abs(), 0.0);
  }
}

TEST(Run, RejectsBadTimeConfiguration) {
  RunConfig c;
  c.resolution = 32;
  c.dt = 0.2;  // CFL 1.02 for unit Taylor-Green
  EXPECT_THROW(run(c), CflError);
  c.dt = 0.03;
  c.T = 1.0;
  EXPECT_THROW(run(c), ConfigError);
  c.dt = 0.05;
  c.every = 0;
  EXPECT_THROW(run(c), ConfigError);
}

TEST(Run, DeterministicAndRestartable) {
  const auto dir = std::filesystem::temp_directory_path() / "vdlab_run_test";
  std::filesystem::remove_all(dir);
  auto c = variable_density(32, 0.05, 0.5);
  c.every = 5;
  c.checkpoint_dir = dir.string();
  const auto a = run(c);
  c.checkpoint_dir.clear();
  const auto b = run(c);
  ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i)
    EXPECT_EQ(max_diff(a.trajectory.state(i).u, b.trajectory.state(i).u), 0.0);
  EXPECT_EQ(a.trajectory.config_digest(), b.trajectory.config_digest());

  // Continue from the half-way checkpoint and land on the same final state.
  RunConfig r = c;
  r.T = 0.25;
  r.init.kind = InitKind::from_checkpoint;
  r.init.rho_file = (dir / "snap_000001_rho.bin").string();
  r.init.u_file = (dir / "snap_000001_u.bin").string();
  const auto tail = run(r);
  EXPECT_NEAR(tail.trajectory.state(0).t, 0.25, 1e-15);
  EXPECT_LE(max_diff(tail.trajectory.snapshots().back().u, a.trajectory.snapshots().back().u), 1e-12);
  std::filesystem::remove_all(dir);
}

TEST(Run, EveryInitKindStartsDivergenceFree) {
  for (auto k : {InitKind::shear_layer, InitKind::rayleigh_taylor_like, InitKind::synthetic}) {
    RunConfig c;
    c.resolution = 64;
    c.dt = 0.01;
    c.T = 0.02;
    c.init.kind = k;
    c.init.rho_mean = 2.0;
    c.init.rho_amplitude = 0.5;
    c.init.width = 0.3;
    const auto r = run(c);
    for (const auto& row : r.log) EXPECT_LE(row.div_residual, 1e-10) << to_string(k);
  }
  EXPECT_THROW(parse_init_kind("vortex-sheet"), ConfigError);
  EXPECT_EQ(parse_init_kind("shear-layer"), InitKind::shear_layer);
}

TEST(Diagnostics, TaylorGreenVorticity) {
  const auto g = Grid::make(2, 64);
  const auto s = make_state(PeriodicField::constant(g, 1.0), taylor_green(g));
  const auto w = vorticity(s);
  const auto oracle = PeriodicField::from_function(g, 1, [](auto x, int) { return -2.0 * std::sin(x[0]) * std::sin(x[1]); });
  EXPECT_LE(max_diff(w, oracle), 1e-10);
}

TEST(Diagnostics, BaroclinicTorqueVanishesForAlignedGradients) {
  const auto g = Grid::make(2, 64);
  const auto P = PeriodicField::from_function(g, 1, [](auto x, int) { return std::cos(x[0]) + std::cos(x[1]); });
  FlowState s = make_state(PeriodicField::constant(g, 1.5), PeriodicField(g, 2));
  s.P = P;
  EXPECT_LE(baroclinic_torque(s).max_abs(), 1e-10);
  // rho = f(P)
  s.rho = PeriodicField::from_function(g, 1, [](auto x, int) { return 3.0 + 0.4 * std::tanh(std::cos(x[0]) + std::cos(x[1])); });
  EXPECT_LE(baroclinic_torque(s).max_abs(), 1e-9);
  // Misaligned gradients do produce torque.
  s.rho = sinx_siny_density(g, 2.0, 0.5);
  EXPECT_GT(baroclinic_torque(s).max_abs(), 1e-2);
}

TEST(Diagnostics, InterpolantExtremaBetweenNodes) {
  const auto g = Grid::make(2, 32);
  const auto f = PeriodicField::from_function(g, 1, [](auto x, int) { return 1.0 + std::cos(x[0] - 0.05) * std::cos(x[1] + 0.07); });
  const auto [lo, hi] = interpolant_extrema(f);
  EXPECT_NEAR(hi, 2.0, 1e-12);
  EXPECT_NEAR(lo, 0.0, 1e-12);
  EXPECT_LT(f.max_value(), 2.0 - 1e-4);
}

TEST(Diagnostics, RunLogCsv) {
  RunConfig c;
  c.resolution = 16;
  c.dt = 0.1;
  c.T = 0.2;
  std::ostringstream os;
  write_run_log(os, run(c).log);
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,E,mass,max_u,div_residual,pressure_iterations");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

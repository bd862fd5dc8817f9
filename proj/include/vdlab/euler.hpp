#pragma once

// 2D pseudo-spectral solver for the variable-density incompressible Euler system
//
//   rho_t + div(rho u) = 0,   u_t + u.grad u + grad P / rho = 0,   div u = 0.
//
// Density is stepped in conservative form (exact mass conservation), velocity in
// advective form. Every right-hand side is truncated to the 2/3 range, and the
// pressure is the Galerkin solution of div(sigma grad P) = div N on that range,
// sigma = 1/rho, so each RK4 stage is divergence free up to the solver residual.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vdlab/checkpoint.hpp"
#include "vdlab/flow.hpp"
#include "vdlab/grid.hpp"
#include "vdlab/scaling.hpp"
#include "vdlab/synth.hpp"

namespace vdlab {

struct ProjectionOptions {
  double rho_min = 1e-3;
  double tolerance = 1e-11;  // absolute L2 norm of the divergence residual
  int max_iterations = 500;
  bool dealias = false;  // Galerkin on the 2/3 range (what the time stepper uses)
};

struct PressureSolve {
  PeriodicField P;
  int iterations = 0;
  double residual = 0.0;
};

struct Projection {
  PeriodicField u;
  PeriodicField P;
  int iterations = 0;
  double residual = 0.0;
};

inline void require_density_floor(const PeriodicField& rho, double rho_min, double t = 0.0) {
  const double m = rho.min_value();
  if (!(m >= rho_min))
    throw DensityFloorError("density " + format_number(m) + " below floor " + format_number(rho_min) + " at t = " +
                                format_number(t),
                            t, m);
}

namespace detail {

// A P = -div(sigma grad P), symmetric positive definite on zero-mean fields.
class PressureOperator {
 public:
  PressureOperator(const PeriodicField& rho, bool dealias) : grid_(rho.grid()), sigma_(rho.grid(), 1), dealias_(dealias) {
    for (std::size_t i = 0; i < rho.points(); ++i) sigma_[i] = 1.0 / rho[i];
    sigma_mean_ = sigma_.integral() / grid_.volume();
  }

  PeriodicField flux(const PeriodicField& P) const {
    auto f = multiply(gradient(P), sigma_);
    return dealias_ ? dealias(f) : f;
  }

  PeriodicField apply(const PeriodicField& P) const {
    auto d = divergence_spectral(forward_transform(multiply(gradient(P), sigma_)));
    if (dealias_) dealias_spectral(d);
    auto out = inverse_transform(d);
    out *= -1.0;
    return out;
  }

  // Inverse of -sigma_mean Laplacian with the same Nyquist convention as the derivatives.
  PeriodicField precondition(const PeriodicField& r) const {
    auto s = forward_transform(r);
    const double k0 = grid_.wavenumber_unit();
    Complex* c = s.component(0).data();
    for_each_mode(grid_, [&](std::size_t k, const std::array<int, 3>& m, const std::array<bool, 3>& nyq) {
      double symbol = 0.0;
      for (int a = 0; a < grid_.dim; ++a)
        if (!nyq[a]) symbol += (k0 * m[a]) * (k0 * m[a]);
      const bool keep = symbol > 0.0 && (!dealias_ || dealias_keeps(grid_, m));
      c[k] = keep ? c[k] / (sigma_mean_ * symbol) : Complex(0.0);
    });
    return inverse_transform(s);
  }

 private:
  Grid grid_;
  PeriodicField sigma_;
  double sigma_mean_ = 1.0;
  bool dealias_;
};

inline double l2(const PeriodicField& f) { return lp_norm(f, 2.0); }

inline PressureSolve pcg(const PressureOperator& A, const PeriodicField& rho, const PeriodicField& rhs,
                         const ProjectionOptions& opt, const PeriodicField* guess) {
  auto b = rhs;
  b *= -1.0;
  b += -b.integral() / rho.grid().volume();
  if (opt.dealias) b = dealias(b);

  PressureSolve out;
  out.P = guess ? (opt.dealias ? dealias(*guess) : *guess) : PeriodicField(rho.grid(), 1);
  out.P += -out.P.integral() / rho.grid().volume();
  // Recursive residuals drift from the true one; restart from b - A x a few times.
  for (int restart = 0; restart < 3; ++restart) {
    auto r = b;
    r -= A.apply(out.P);
    out.residual = detail::l2(r);
    if (out.residual <= opt.tolerance) return out;
    auto z = A.precondition(r);
    auto p = z;
    double rz = inner_product(r, z);
    while (out.iterations < opt.max_iterations) {
      ++out.iterations;
      const auto Ap = A.apply(p);
      const double pAp = inner_product(p, Ap);
      if (!(pAp > 0.0)) break;
      const double a = rz / pAp;
      out.P.axpy(a, p);
      r.axpy(-a, Ap);
      out.residual = detail::l2(r);
      if (out.residual <= opt.tolerance) break;
      z = A.precondition(r);
      const double rz_next = inner_product(r, z);
      p *= rz_next / rz;
      p += z;
      rz = rz_next;
    }
    if (out.iterations >= opt.max_iterations) break;
  }
  auto r = b;
  r -= A.apply(out.P);
  out.residual = detail::l2(r);
  if (out.residual > opt.tolerance)
    throw ConvergenceError("pressure solve stalled at residual " + format_number(out.residual) + " after " +
                               std::to_string(out.iterations) + " iterations",
                           out.iterations, out.residual);
  return out;
}

}  // namespace detail

// Solves div(sigma grad P) = rhs by preconditioned conjugate gradients.
inline PressureSolve solve_pressure(const PeriodicField& rho, const PeriodicField& rhs, const ProjectionOptions& opt = {},
                                    const PeriodicField* guess = nullptr) {
  require_density_floor(rho, opt.rho_min);
  return detail::pcg(detail::PressureOperator(rho, opt.dealias), rho, rhs, opt, guess);
}

// u = u_star - sigma grad P with div(sigma grad P) = div u_star.
inline Projection project(const PeriodicField& rho, const PeriodicField& u_star, const ProjectionOptions& opt = {},
                          const PeriodicField* guess = nullptr) {
  if (u_star.components() != rho.grid().dim) throw DomainError("projection expects a velocity field");
  require_density_floor(rho, opt.rho_min);
  const detail::PressureOperator A(rho, opt.dealias);
  auto ps = detail::pcg(A, rho, divergence(u_star), opt, guess);
  Projection out;
  out.u = opt.dealias ? dealias(u_star) : u_star;
  out.u -= A.flux(ps.P);
  out.P = std::move(ps.P);
  out.iterations = ps.iterations;
  out.residual = ps.residual;
  return out;
}

// omega = d_x u_y - d_y u_x
inline PeriodicField vorticity(const FlowState& s) {
  if (s.grid().dim != 2) throw DomainError("vorticity is computed for 2D states");
  auto w = derivative(s.u.component_field(1), 0);
  w -= derivative(s.u.component_field(0), 1);
  return w;
}

// (grad^perp rho . grad P) / rho^2
inline PeriodicField baroclinic_torque(const FlowState& s) {
  const auto gr = perp_gradient(s.rho);
  const auto gp = gradient(s.P);
  PeriodicField out(s.grid(), 1);
  for (std::size_t i = 0; i < out.points(); ++i) {
    const double num = gr.component(0)[i] * gp.component(0)[i] + gr.component(1)[i] * gp.component(1)[i];
    out[i] = num / (s.rho[i] * s.rho[i]);
  }
  return out;
}

// Minimum and maximum of the trigonometric interpolant of a 2D scalar field:
// Newton refinement from the extreme grid samples. Grid samples alone miss
// extrema that move between nodes by O(dx^2).
inline std::pair<double, double> interpolant_extrema(const PeriodicField& f) {
  const Grid& g = f.grid();
  if (g.dim != 2 || f.components() != 1) throw DomainError("interpolant extrema are computed for 2D scalars");
  const auto s = forward_transform(f);
  const double k0 = g.wavenumber_unit();
  struct Mode {
    double kx, ky, mult;
    Complex c;
  };
  std::vector<Mode> modes;
  for_each_mode(g, [&](std::size_t k, const std::array<int, 3>& m, const std::array<bool, 3>& nyq) {
    if (nyq[0] || nyq[1] || std::abs(s[k]) < 1e-300) return;
    modes.push_back({k0 * m[0], k0 * m[1], m[1] == 0 ? 1.0 : 2.0, s[k]});
  });
  const auto refine = [&](std::size_t idx) {
    auto x = g.coordinates(idx);
    double value = f[idx];
    for (int it = 0; it < 8; ++it) {
      double v = 0, gx = 0, gy = 0, hxx = 0, hxy = 0, hyy = 0;
      for (const auto& m : modes) {
        const Complex e = m.c * std::polar(1.0, m.kx * x[0] + m.ky * x[1]) * m.mult;
        v += e.real();
        gx -= m.kx * e.imag();
        gy -= m.ky * e.imag();
        hxx -= m.kx * m.kx * e.real();
        hxy -= m.kx * m.ky * e.real();
        hyy -= m.ky * m.ky * e.real();
      }
      value = v;
      const double det = hxx * hyy - hxy * hxy;
      if (!(std::abs(det) > 1e-300)) break;
      const double dx = (hyy * gx - hxy * gy) / det, dy = (hxx * gy - hxy * gx) / det;
      if (std::hypot(dx, dy) > g.spacing()) break;  // left the basin of the sampled extremum
      x[0] -= dx;
      x[1] -= dy;
      if (std::hypot(dx, dy) < 1e-14) break;
    }
    return value;
  };
  const auto& v = f.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = refine(static_cast<std::size_t>(lo - v.begin()));
  const double b = refine(static_cast<std::size_t>(hi - v.begin()));
  return {std::min(a, *lo), std::max(b, *hi)};
}

inline double max_speed(const PeriodicField& u) { return lp_norm(u, infinity); }

inline double cfl_number(const FlowState& s, double dt) { return dt * max_speed(s.u) / s.grid().spacing(); }

// L2 norm of the spectral divergence.
inline double divergence_residual(const PeriodicField& u) { return lp_norm(divergence(u), 2.0); }

// ---------------------------------------------------------------------------
// Time stepping

struct SolverOptions {
  double rho_min = 1e-3;
  double tolerance = 1e-11;
  int max_iterations = 500;
  double max_cfl = 0.5;
};

struct StepStats {
  int pressure_iterations = 0;
  double max_residual = 0.0;
};

class EulerSolver {
 public:
  explicit EulerSolver(SolverOptions opt = {}) : opt_(opt) {}

  const SolverOptions& options() const { return opt_; }

  ProjectionOptions projection_options() const { return {opt_.rho_min, opt_.tolerance, opt_.max_iterations, true}; }

  // Truncates to the 2/3 range and projects; P is the pressure of the state.
  FlowState prepare(PeriodicField rho, const PeriodicField& u, double t = 0.0) const {
    rho = dealias(rho);
    require_density_floor(rho, opt_.rho_min, t);
    auto pr = project(rho, u, projection_options());
    FlowState s = make_state(std::move(rho), std::move(pr.u), t);
    s.P = pressure(s, nullptr);
    return s;
  }

  // Pressure of a state with div-free u: div(sigma grad P) = div(N), N = -u.grad u.
  PeriodicField pressure(const FlowState& s, const PeriodicField* guess) const {
    return evaluate(s.rho, s.u, guess).P;
  }

  FlowState step(const FlowState& s, double dt, StepStats* stats = nullptr) const {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    const double cfl = cfl_number(s, dt);
    if (cfl > opt_.max_cfl)
      throw CflError("CFL number " + format_number(cfl) + " exceeds " + format_number(opt_.max_cfl) + " at t = " +
                         format_number(s.t),
                     cfl);
    StepStats local;
    StepStats& st = stats ? *stats : local;
    const auto k1 = evaluate(s.rho, s.u, &s.P, &st);
    const auto k2 = evaluate(stage(s.rho, k1.rho, 0.5 * dt), stage(s.u, k1.u, 0.5 * dt), &k1.P, &st);
    const auto k3 = evaluate(stage(s.rho, k2.rho, 0.5 * dt), stage(s.u, k2.u, 0.5 * dt), &k2.P, &st);
    const auto k4 = evaluate(stage(s.rho, k3.rho, dt), stage(s.u, k3.u, dt), &k3.P, &st);
    FlowState out;
    out.t = s.t + dt;
    out.rho = combine(s.rho, k1.rho, k2.rho, k3.rho, k4.rho, dt);
    out.u = combine(s.u, k1.u, k2.u, k3.u, k4.u, dt);
    require_density_floor(out.rho, opt_.rho_min, out.t);
    out.P = evaluate(out.rho, out.u, &k4.P, &st).P;
    return out;
  }

 private:
  struct Rates {
    PeriodicField rho, u, P;
  };

  static PeriodicField stage(const PeriodicField& base, const PeriodicField& rate, double h) {
    auto out = base;
    out.axpy(h, rate);
    return out;
  }

  static PeriodicField combine(const PeriodicField& y, const PeriodicField& a, const PeriodicField& b,
                               const PeriodicField& c, const PeriodicField& d, double dt) {
    auto out = y;
    out.axpy(dt / 6.0, a);
    out.axpy(dt / 3.0, b);
    out.axpy(dt / 3.0, c);
    out.axpy(dt / 6.0, d);
    return out;
  }

  Rates evaluate(const PeriodicField& rho, const PeriodicField& u, const PeriodicField* guess,
                 StepStats* st = nullptr) const {
    require_density_floor(rho, opt_.rho_min);
    const Grid& g = rho.grid();
    const int d = g.dim;
    Rates r;
    r.rho = multiply(u, rho);
    r.rho = inverse_transform([&] {
      auto s = divergence_spectral(forward_transform(r.rho));
      dealias_spectral(s);
      return s;
    }());
    r.rho *= -1.0;

    PeriodicField N(g, d);
    const auto us = forward_transform(u);
    std::vector<PeriodicField> du;
    for (int j = 0; j < d; ++j) du.push_back(inverse_transform(derivative_spectral(us, j)));
    for (int i = 0; i < d; ++i) {
      double* n = N.component(i).data();
      for (int j = 0; j < d; ++j) {
        const double* uj = u.component(j).data();
        const double* dj = du[static_cast<std::size_t>(j)].component(i).data();
        for (std::size_t p = 0; p < N.points(); ++p) n[p] -= uj[p] * dj[p];
      }
    }
    N = dealias(N);
    auto proj = project(rho, N, projection_options(), guess);
    if (st) {
      st->pressure_iterations += proj.iterations;
      st->max_residual = std::max(st->max_residual, proj.residual);
    }
    r.u = std::move(proj.u);
    r.P = std::move(proj.P);
    return r;
  }

  SolverOptions opt_;
};

// ---------------------------------------------------------------------------
// Initial data and runs

enum class InitKind { taylor_green, shear_layer, rayleigh_taylor_like, from_checkpoint, synthetic };

inline const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::taylor_green: return "taylor-green";
    case InitKind::shear_layer: return "shear-layer";
    case InitKind::rayleigh_taylor_like: return "rayleigh-taylor-like";
    case InitKind::from_checkpoint: return "from-checkpoint";
    case InitKind::synthetic: return "synthetic";
  }
  return "?";
}

inline InitKind parse_init_kind(const std::string& s) {
  for (auto k : {InitKind::taylor_green, InitKind::shear_layer, InitKind::rayleigh_taylor_like, InitKind::from_checkpoint,
                 InitKind::synthetic})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown init.kind '" + s + "'");
}

struct InitSpec {
  InitKind kind = InitKind::taylor_green;
  double rho_mean = 1.0;
  double rho_amplitude = 0.0;  // rho = mean + amplitude sin x sin y (shear/RT use their own layouts)
  double amplitude = 1.0;      // velocity scale
  double perturbation = 0.0;   // taylor-green: adds a mode-2 swirl of this size
  double width = 0.1;          // shear-layer and interface thickness
  double alpha = 0.4;          // synthetic velocity exponent
  std::uint64_t seed = 1;
  std::string rho_file, u_file;
};

// Unprojected initial fields.
inline std::pair<PeriodicField, PeriodicField> initial_fields(const Grid& g, const InitSpec& s, double* t0 = nullptr) {
  if (g.dim != 2) throw ConfigError("the solver runs on 2D grids");
  PeriodicField rho = PeriodicField::from_function(g, 1, [&](auto x, int) {
    return s.rho_mean + s.rho_amplitude * std::sin(x[0]) * std::sin(x[1]);
  });
  PeriodicField u(g, 2);
  switch (s.kind) {
    case InitKind::taylor_green:
      u = PeriodicField::from_function(g, 2, [&](auto x, int c) {
        const double tg = c == 0 ? -std::sin(x[0]) * std::cos(x[1]) : std::cos(x[0]) * std::sin(x[1]);
        const double sw = c == 0 ? std::sin(2 * x[0]) * std::cos(x[1]) : -2.0 * std::cos(2 * x[0]) * std::sin(x[1]);
        return s.amplitude * tg + s.perturbation * sw;
      });
      break;
    case InitKind::shear_layer: {
      const double d = s.width;
      u = PeriodicField::from_function(g, 2, [&](auto x, int c) {
        if (c == 1) return 0.05 * s.amplitude * std::sin(x[0]);
        const double y = x[1];
        return s.amplitude * (y <= std::numbers::pi ? std::tanh((y - std::numbers::pi / 2) / d)
                                                    : std::tanh((3 * std::numbers::pi / 2 - y) / d));
      });
      rho = PeriodicField::from_function(g, 1, [&](auto x, int) {
        return s.rho_mean + s.rho_amplitude * std::tanh(std::cos(x[1]) / (4.0 * d));
      });
      break;
    }
    case InitKind::rayleigh_taylor_like:
      rho = PeriodicField::from_function(g, 1, [&](auto x, int) {
        return s.rho_mean + s.rho_amplitude * std::tanh((std::cos(x[1]) + 0.1 * std::cos(x[0])) / s.width);
      });
      u = PeriodicField::from_function(g, 2, [&](auto x, int c) {
        return s.amplitude * (c == 0 ? std::sin(x[0]) * std::cos(2 * x[1]) : 0.5 * std::cos(x[0]) * std::sin(2 * x[1]));
      });
      break;
    case InitKind::from_checkpoint: {
      const auto r = load_checkpoint(s.rho_file, g.length);
      const auto v = load_checkpoint(s.u_file, g.length);
      if (!(r.field.grid() == g) || !(v.field.grid() == g)) throw ConfigError("checkpoint grid differs from grid.resolution");
      if (r.field.components() != 1 || v.field.components() != 2) throw ConfigError("checkpoints must hold rho and a 2D u");
      rho = r.field;
      u = v.field;
      if (t0) *t0 = r.time;
      break;
    }
    case InitKind::synthetic: {
      u = synth_rough_field(g, {s.alpha, 0.5, s.seed, -1, SynthMode::divfree_vector});
      u = dealias(u);
      u *= s.amplitude / std::max(max_speed(u), 1e-300);
      break;
    }
  }
  return {std::move(rho), std::move(u)};
}

struct RunConfig {
  int resolution = 128;
  double length = two_pi;
  double dt = 0.01;
  double T = 1.0;
  int every = 1;  // snapshot interval in steps
  InitSpec init;
  SolverOptions solver;
  std::string checkpoint_dir;  // empty: no checkpoints
};

struct RunLogRow {
  double t = 0.0, E = 0.0, mass = 0.0, max_u = 0.0, div_residual = 0.0;
  int iterations = 0;
};

struct RunResult {
  FlowTrajectory trajectory;
  std::vector<RunLogRow> log;
  int steps = 0;
  double max_cfl = 0.0;
};

inline std::string describe(const RunConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17) << "grid.resolution=" << c.resolution << ";grid.length=" << c.length << ";time.dt=" << c.dt
     << ";time.T=" << c.T << ";output.every=" << c.every << ";init.kind=" << to_string(c.init.kind)
     << ";init.rho_mean=" << c.init.rho_mean << ";init.rho_amplitude=" << c.init.rho_amplitude
     << ";init.amplitude=" << c.init.amplitude << ";init.perturbation=" << c.init.perturbation
     << ";init.width=" << c.init.width << ";init.alpha=" << c.init.alpha << ";init.seed=" << c.init.seed
     << ";init.rho_file=" << c.init.rho_file << ";init.u_file=" << c.init.u_file << ";solver.rho_min=" << c.solver.rho_min
     << ";solver.tolerance=" << c.solver.tolerance;
  return os.str();
}

// FNV-1a, hex.
inline std::string digest(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline int step_count(double T, double dt) {
  if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("time.dt and time.T must be positive");
  const double steps = std::round(T / dt);
  if (steps < 1 || std::abs(steps * dt - T) > 1e-9 * T) throw ConfigError("time.T must be a whole number of time steps");
  return static_cast<int>(steps);
}

inline RunLogRow log_row(const FlowState& s, int iterations = 0) {
  return {s.t, energy(s), mass(s), max_speed(s.u), divergence_residual(s.u), iterations};
}

inline void write_checkpoints(const std::string& dir, std::size_t index, const FlowState& s) {
  char name[32];
  std::snprintf(name, sizeof(name), "snap_%06zu", index);
  const auto base = std::filesystem::path(dir) / name;
  save_checkpoint(base.string() + "_rho.bin", s.rho, s.t);
  save_checkpoint(base.string() + "_u.bin", s.u, s.t);
  save_checkpoint(base.string() + "_P.bin", s.P, s.t);
}

// Validates, steps, and records snapshots every `every` steps (t0 included).
inline RunResult run(const RunConfig& c) {
  if (c.every < 1) throw ConfigError("output.every must be >= 1");
  const int steps = step_count(c.T, c.dt);
  const Grid g = Grid::make(2, c.resolution, c.length);
  double t0 = 0.0;
  auto [rho, u] = initial_fields(g, c.init, &t0);
  const EulerSolver solver(c.solver);
  FlowState s = solver.prepare(std::move(rho), u, t0);
  const double cfl0 = cfl_number(s, c.dt);
  if (cfl0 > c.solver.max_cfl)
    throw CflError("time.dt gives CFL " + format_number(cfl0) + " > " + format_number(c.solver.max_cfl), cfl0);

  RunResult out;
  out.trajectory = FlowTrajectory(g, digest(describe(c)));
  if (!c.checkpoint_dir.empty()) std::filesystem::create_directories(c.checkpoint_dir);
  const auto record = [&](const FlowState& st, int iters) {
    out.log.push_back(log_row(st, iters));
    if (!c.checkpoint_dir.empty()) write_checkpoints(c.checkpoint_dir, out.trajectory.size(), st);
    out.trajectory.append(st);
  };
  record(s, 0);
  int iters = 0;
  for (int n = 1; n <= steps; ++n) {
    out.max_cfl = std::max(out.max_cfl, cfl_number(s, c.dt));
    StepStats st;
    s = solver.step(s, c.dt, &st);
    s.t = t0 + n * c.dt;  // no accumulated rounding in the snapshot times
    iters += st.pressure_iterations;
    if (!s.u.is_finite() || !s.rho.is_finite()) throw ConvergenceError("non-finite state at t = " + format_number(s.t), n, 0.0);
    if (n % c.every == 0) {
      record(s, iters);
      iters = 0;
    }
  }
  out.steps = steps;
  return out;
}

// t,E,mass,max_u,div_residual,pressure_iterations. E = int rho|u|^2 (no 1/2).
inline void write_run_log(std::ostream& os, const std::vector<RunLogRow>& log) {
  os << "t,E,mass,max_u,div_residual,pressure_iterations\n";
  for (const auto& r : log)
    os << format_number(r.t) << ',' << format_number(r.E) << ',' << format_number(r.mass) << ','
       << format_number(r.max_u) << ',' << format_number(r.div_residual) << ',' << r.iterations << '\n';
}

}  // namespace vdlab

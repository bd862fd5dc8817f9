#pragma once

// Energy diagnostics on trajectories.
//
// E(t) = int rho|u|^2 dx is reported without the 1/2; weak-form residuals use
// the (1/2) rho|u|^2 density of the mollified identity. The window average
// and its gap are normalization free.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vdlab/commutator.hpp"
#include "vdlab/euler.hpp"
#include "vdlab/flow.hpp"
#include "vdlab/scaling.hpp"
#include "vdlab/testfn.hpp"

namespace vdlab {

inline constexpr const char* energy_convention = "E = int rho|u|^2 dx (no 1/2); weak residuals use 1/2 rho|u|^2";

template <SnapshotSource S>
std::vector<double> energy_series(const S& src) {
  std::vector<double> e;
  for (std::size_t i = 0; i < src.size(); ++i) e.push_back(energy(src.state(i)));
  return e;
}

// max_t |E(t) - E(0)| / max(E(0), floor)
inline double relative_drift(const std::vector<double>& E, double floor = 1e-300) {
  double m = 0.0;
  for (double e : E) m = std::max(m, std::abs(e - E.front()));
  return m / std::max(E.front(), floor);
}

// -int psi_t F dt on the snapshot grid via Stieltjes sums
// -sum (psi_{i+1} - psi_i)(F_i + F_{i+1})/2, so int psi_t is exact.
template <class Psi>
double stieltjes(const std::vector<double>& t, const std::vector<double>& F, Psi&& psi) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) s -= (psi(t[i + 1]) - psi(t[i])) * 0.5 * (F[i] + F[i + 1]);
  return s;
}

template <SnapshotSource S>
std::vector<double> snapshot_times(const S& src) {
  std::vector<double> t;
  for (std::size_t i = 0; i < src.size(); ++i) t.push_back(src.time(i));
  return t;
}

// ---------------------------------------------------------------------------
// Continuity at the initial time

struct TrendFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
  bool vanishing = false;  // every value at or below the zero threshold

  bool tends_to_zero() const { return vanishing || slope > 0.0; }
};

struct ContinuitySeries {
  std::vector<double> t, W, sqrt_distance;
  TrendFit W_trend, sqrt_trend;
};

// Log-log fit of |value| against t over the first decade (t_1 .. 10 t_1) of positive times.
inline TrendFit first_decade_trend(const std::vector<double>& t, const std::vector<double>& v, double zero = 1e-13) {
  TrendFit f;
  double t1 = 0.0;
  for (double x : t)
    if (x > 0.0) {
      t1 = x;
      break;
    }
  if (!(t1 > 0.0)) throw ResolutionError("trend fit needs positive snapshot times");
  std::vector<double> x, y;
  double vmax = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] > 0.0 && t[i] <= 10.0 * t1 * (1.0 + 1e-12)) {
      x.push_back(t[i]);
      y.push_back(std::abs(v[i]));
      vmax = std::max(vmax, std::abs(v[i]));
    }
  f.points = x.size();
  if (!(vmax > zero)) {
    f.vanishing = true;
    return f;
  }
  if (x.size() < 3) throw ResolutionError("trend fit needs at least 3 snapshots in the first decade");
  for (double& val : y) val = std::max(val, std::numeric_limits<double>::epsilon() * vmax);
  const auto fit = fit_loglog(x, y);
  f.slope = fit.slope;
  f.intercept = fit.intercept;
  return f;
}

// W(t) = 2 int sqrt(rho0) u0 . (sqrt(rho0) u0 - sqrt(rho) u) dx and ||sqrt(rho) u - sqrt(rho0) u0||_2.
template <SnapshotSource S>
ContinuitySeries initial_continuity(const S& src, const PeriodicField& rho0, const PeriodicField& u0) {
  if (std::abs(src.time(0)) > 1e-12) throw ConfigError("initial continuity needs a trajectory starting at t = 0");
  if (rho0.min_value() < 0.0) throw DomainError("negative initial density");
  const auto sqrt_weighted = [](const PeriodicField& rho, const PeriodicField& u) {
    PeriodicField out(u.grid(), u.components());
    for (int c = 0; c < u.components(); ++c)
      for (std::size_t i = 0; i < u.points(); ++i) out.component(c)[i] = std::sqrt(rho[i]) * u.component(c)[i];
    return out;
  };
  const auto a = sqrt_weighted(rho0, u0);
  ContinuitySeries c;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto st = src.state(i);
    if (st.rho.min_value() < 0.0) throw DomainError("negative density at t = " + format_number(st.t));
    auto diff = a;
    diff -= sqrt_weighted(st.rho, st.u);
    c.t.push_back(st.t);
    c.W.push_back(2.0 * inner_product(a, diff));
    c.sqrt_distance.push_back(lp_norm(diff, 2.0));
  }
  c.W_trend = first_decade_trend(c.t, c.W);
  c.sqrt_trend = first_decade_trend(c.t, c.sqrt_distance);
  return c;
}

// ---------------------------------------------------------------------------
// Weak-form residual

struct WeakResidual {
  double residual = 0.0;   // -int psi_t 1/2 rho|u^eps|^2 + A + B
  double reference = 0.0;  // int |psi_t| 1/2 E dt, the size of an unbalanced energy flux
  double relative = 0.0;
  bool weak_solution = true;
  CommutatorTerms terms;
};

struct WeakResidualOptions {
  ProofVariant variant = ProofVariant::thm1;
  TermOptions terms{};
  double flag_threshold = 1e-2;  // relative residual above this: not a weak solution
};

template <SnapshotSource S>
WeakResidual weak_energy_residual(const S& src, const TestFunction& psi, double eps,
                                  const WeakResidualOptions& opt = {}) {
  WeakResidual r;
  r.terms = evaluate_terms(src, psi, eps, opt.variant, opt.terms);
  r.residual = r.terms.identity_residual();
  const auto t = snapshot_times(src);
  const auto E = energy_series(src);
  for (std::size_t i = 0; i + 1 < t.size(); ++i)
    r.reference += std::abs(psi.value(t[i + 1]) - psi.value(t[i])) * 0.25 * (E[i] + E[i + 1]);
  r.relative = r.reference > 0.0 ? std::abs(r.residual) / r.reference : (r.residual == 0.0 ? 0.0 : infinity);
  r.weak_solution = r.relative <= opt.flag_threshold;
  return r;
}

// Un-mollified form for test functions that reach t = 0 (ramp):
// -int psi_t 1/2 E dt, which vanishes when E is constant.
template <SnapshotSource S>
double energy_flux_residual(const S& src, const TestFunction& psi) {
  const auto t = snapshot_times(src);
  auto E = energy_series(src);
  for (double& e : E) e *= 0.5;
  return stieltjes(t, E, [&](double x) { return psi.value(x); });
}

// tau-average limit of the ramp: -(1/tau) int_0^tau 1/2 E - int plateau_t 1/2 E,
// both with the Stieltjes weights of the piecewise-linear psi.
template <SnapshotSource S>
double ramp_limit_residual(const S& src, double tau, double t1, double t2) {
  const auto plateau = TestFunction::plateau(t1, t2);
  const auto t = snapshot_times(src);
  auto E = energy_series(src);
  for (double& e : E) e *= 0.5;
  return stieltjes(t, E, [&](double x) { return x <= tau ? x / tau : plateau.value(x); });
}

struct RampStudy {
  std::vector<double> K, residual, difference;  // difference[k] = |R(K_{k+1}) - R(K_k)|
  double limit = 0.0;
  double max_scaled_difference = 0.0;  // max K_k * difference[k]
};

// K doubling from K0; the transition 1/K must fit before the plateau descent ends.
template <SnapshotSource S>
RampStudy ramp_doubling(const S& src, double tau, double K0, int levels, double t1, double t2) {
  RampStudy r;
  r.limit = ramp_limit_residual(src, tau, t1, t2);
  double K = K0;
  for (int l = 0; l < levels; ++l, K *= 2.0) {
    r.K.push_back(K);
    r.residual.push_back(energy_flux_residual(src, TestFunction::ramp(tau, K, t1, t2)));
  }
  for (std::size_t k = 0; k + 1 < r.residual.size(); ++k) {
    r.difference.push_back(std::abs(r.residual[k + 1] - r.residual[k]));
    r.max_scaled_difference = std::max(r.max_scaled_difference, r.K[k] * r.difference.back());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Window check

struct WindowRow {
  double t_tilde = 0.0, eps = 0.0;
  double windowed_mean = 0.0;  // average of E over the snapped window
  double E0 = 0.0;
  double gap = 0.0;  // |windowed_mean - E0| / E0
  double snap_error = 0.0;
};

// Average of E over [t~ - eps/2, t~ + eps/2] through the step test function,
// with both window edges snapped to the nearest snapshot.
inline WindowRow window_check(const std::vector<double>& t, const std::vector<double>& E, double E0, double t_tilde,
                              double eps) {
  if (!(eps > 0.0)) throw DomainError("window width must be positive");
  const double lo = t_tilde - eps / 2.0, hi = t_tilde + eps / 2.0;
  const double slack = 1e-9 * (t.back() - t.front());
  if (lo < t.front() - slack || hi > t.back() + slack)
    throw SupportError("window [" + format_number(lo) + ", " + format_number(hi) + "] outside the trajectory");
  const auto nearest = [&](double x) {
    const auto it = std::lower_bound(t.begin(), t.end(), x);
    std::size_t j = static_cast<std::size_t>(it - t.begin());
    if (j == t.size() || (j > 0 && std::abs(t[j - 1] - x) <= std::abs(t[j] - x))) --j;
    return j;
  };
  const std::size_t a = nearest(lo), b = nearest(hi);
  if (b <= a) throw ResolutionError("window narrower than the snapshot spacing");
  WindowRow w;
  w.t_tilde = t_tilde;
  w.eps = eps;
  w.E0 = E0;
  w.snap_error = std::max(std::abs(t[a] - lo), std::abs(t[b] - hi));
  const auto step = TestFunction::step(0.5 * (t[a] + t[b]), t[b] - t[a]);
  // psi(t_a) = 0 and psi(t_b) = 1 exactly, so the weights telescope to one.
  double s = 0.0;
  for (std::size_t i = a; i < b; ++i) {
    const double pa = i == a ? 0.0 : step.value(t[i]);
    const double pb = i + 1 == b ? 1.0 : step.value(t[i + 1]);
    s += (pb - pa) * 0.5 * (E[i] + E[i + 1]);
  }
  w.windowed_mean = s;
  w.gap = std::abs(s - E0) / std::max(std::abs(E0), 1e-300);
  return w;
}

template <SnapshotSource S>
std::vector<WindowRow> window_table(const S& src, const std::vector<double>& t_tildes, const std::vector<double>& eps) {
  const auto t = snapshot_times(src);
  const auto E = energy_series(src);
  std::vector<WindowRow> out;
  for (double tt : t_tildes)
    for (double e : eps)
      if (tt >= e / 2.0 - 1e-12 && tt + e / 2.0 <= t.back() + 1e-12) out.push_back(window_check(t, E, E.front(), tt, e));
  return out;
}

// 1 - e^{-t~} sinh(eps/2)/(eps/2): gap of a trajectory whose energy decays like e^{-t}.
inline double damped_gap(double t_tilde, double eps) {
  const double h = eps / 2.0;
  return 1.0 - std::exp(-t_tilde) * std::sinh(h) / h;
}

// Copy with u scaled by e^{-rate t/2}, so E(t) picks up e^{-rate t}.
template <SnapshotSource S>
FlowTrajectory damped_copy(const S& src, double rate = 1.0) {
  FlowTrajectory out(src.grid());
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto st = src.state(i);
    st.u *= std::exp(-0.5 * rate * (st.t - src.time(0)));
    out.append(std::move(st));
  }
  return out;
}

struct NestedLimit {
  std::vector<double> t_tilde;
  std::vector<double> gaps;           // windowed-mean gap
  std::vector<double> strong_gaps;    // |E(t~) - E0| / E0 with E(t~) = ||sqrt(rho)u||^2
  std::vector<double> sqrt_relative;  // ||sqrt(rho)u - sqrt(rho0)u0||_2 / sqrt(E0) at t~
  double gap_limit = 0.0, strong_limit = 0.0;
  double sqrt_slope = 0.0;  // log-log rate of sqrt_relative as t~ -> 0
  bool agree = false;       // both energy limits match and the strong distance vanishes
};

// Windows (t~_k, eps_k) = (t~_0, eps_0) / 2^k shrinking onto t = 0. Strong
// continuity bounds |E(t) - E0| by d (2 sqrt(E0) + d), d the sqrt distance, so
// the window limit and the pointwise energy limit must coincide as d -> 0.
template <SnapshotSource S>
NestedLimit nested_window_limit(const S& src, const ContinuitySeries& c, double t_tilde0, double eps0, int levels,
                                double tolerance = 1e-6) {
  const auto t = snapshot_times(src);
  const auto E = energy_series(src);
  NestedLimit n;
  double tt = t_tilde0, e = eps0;
  for (int k = 0; k < levels; ++k, tt /= 2.0, e /= 2.0) {
    n.gaps.push_back(window_check(t, E, E.front(), tt, e).gap);
    const auto it = std::lower_bound(t.begin(), t.end(), tt - 1e-12);
    const auto j = static_cast<std::size_t>(it - t.begin());
    n.t_tilde.push_back(t[j]);
    n.strong_gaps.push_back(std::abs(E[j] - E.front()) / E.front());
    n.sqrt_relative.push_back(c.sqrt_distance[j] / std::sqrt(E.front()));
  }
  n.gap_limit = n.gaps.back();
  n.strong_limit = n.strong_gaps.back();
  double vmax = 0.0;
  for (double v : n.sqrt_relative) vmax = std::max(vmax, v);
  const bool vanishing = !(vmax > 1e-13);
  if (!vanishing && levels >= 2) {
    std::vector<double> y;
    for (double v : n.sqrt_relative) y.push_back(std::max(v, std::numeric_limits<double>::epsilon() * vmax));
    n.sqrt_slope = fit_loglog(n.t_tilde, y).slope;
  }
  n.agree = std::abs(n.gap_limit - n.strong_limit) <= tolerance && (vanishing || n.sqrt_slope > 0.0);
  return n;
}

// ---------------------------------------------------------------------------
// Weak-continuity monitor: int rho u . phi dx for a fixed divergence-free battery.

inline std::vector<PeriodicField> monitor_battery(const Grid& g) {
  std::vector<PeriodicField> b;
  b.push_back(perp_gradient(PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[0]); })));
  b.push_back(perp_gradient(PeriodicField::from_function(g, 1, [](auto x, int) { return std::cos(x[1]); })));
  b.push_back(perp_gradient(PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[0] + x[1]); })));
  b.push_back(perp_gradient(
      PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[0]) * std::sin(2.0 * x[1]); })));
  return b;
}

template <SnapshotSource S>
std::vector<std::vector<double>> momentum_monitor(const S& src) {
  const auto battery = monitor_battery(src.grid());
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto st = src.state(i);
    const auto m = multiply(st.u, st.rho);
    std::vector<double> row;
    for (const auto& phi : battery) row.push_back(inner_product(m, phi));
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct EnergyReport {
  std::vector<double> t, E;
  double E0 = 0.0;
  double max_drift = 0.0;
  ContinuitySeries continuity;
  std::vector<double> div_residual;
  std::vector<WindowRow> windows;
};

template <SnapshotSource S>
EnergyReport energy_report(const S& src, const PeriodicField& rho0, const PeriodicField& u0,
                           const std::vector<double>& t_tildes, const std::vector<double>& eps) {
  EnergyReport r;
  r.t = snapshot_times(src);
  r.E = energy_series(src);
  r.E0 = energy(rho0, u0);
  std::vector<double> shifted = r.E;
  shifted.insert(shifted.begin(), r.E0);
  r.max_drift = relative_drift(shifted);
  r.continuity = initial_continuity(src, rho0, u0);
  for (std::size_t i = 0; i < src.size(); ++i) r.div_residual.push_back(divergence_residual(src.state(i).u));
  r.windows = window_table(src, t_tildes, eps);
  return r;
}

// t,E,W,sqrt_continuity,div_residual
inline void write_energy_csv(std::ostream& os, const EnergyReport& r) {
  os << "# " << energy_convention << "\n";
  os << "t,E,W,sqrt_continuity,div_residual\n";
  for (std::size_t i = 0; i < r.t.size(); ++i)
    os << format_number(r.t[i]) << ',' << format_number(r.E[i]) << ',' << format_number(r.continuity.W[i]) << ','
       << format_number(r.continuity.sqrt_distance[i]) << ',' << format_number(r.div_residual[i]) << '\n';
}

// t_tilde,eps,windowed_mean,E0,gap,snap_error
inline void write_window_csv(std::ostream& os, const std::vector<WindowRow>& rows) {
  os << "# " << energy_convention << "\n";
  os << "t_tilde,eps,windowed_mean,E0,gap,snap_error\n";
  for (const auto& w : rows)
    os << format_number(w.t_tilde) << ',' << format_number(w.eps) << ',' << format_number(w.windowed_mean) << ','
       << format_number(w.E0) << ',' << format_number(w.gap) << ',' << format_number(w.snap_error) << '\n';
}

}  // namespace vdlab

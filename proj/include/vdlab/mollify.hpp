#pragma once

// Mollifier kernels and space / time / space-time convolution.
//
// Spatial convolution is applied spectrally: the kernel weights live on the
// grid (wrapped around the origin) and their transform multiplies the field
// spectrum. The space-time kernel is the tensor product of a time profile
// and a space profile, each of radius eps/sqrt(2), so its support lies in
// the space-time ball of radius eps. Time convolution is a weighted sum over
// neighbouring snapshots.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "vdlab/flow.hpp"
#include "vdlab/grid.hpp"
#include "vdlab/scaling.hpp"

namespace vdlab {

enum class KernelShape { compact_bump, truncated_gaussian };
enum class KernelAxes { space, time, spacetime };

inline const char* to_string(KernelShape s) {
  return s == KernelShape::compact_bump ? "compact-bump" : "truncated-gaussian";
}
inline const char* to_string(KernelAxes a) {
  switch (a) {
    case KernelAxes::space: return "space";
    case KernelAxes::time: return "time";
    case KernelAxes::spacetime: return "spacetime";
  }
  return "?";
}

namespace detail {

inline constexpr double gaussian_sigma = 1.0 / 3.0;

// Unnormalized radial profile on [0, 1); zero outside.
inline double kernel_profile(KernelShape shape, double r) {
  if (r >= 1.0) return 0.0;
  if (shape == KernelShape::compact_bump) return std::exp(-1.0 / (1.0 - r * r));
  return std::exp(-r * r / (2.0 * gaussian_sigma * gaussian_sigma));
}

inline double kernel_profile_slope(KernelShape shape, double r) {
  if (r >= 1.0) return 0.0;
  if (shape == KernelShape::compact_bump) {
    const double q = 1.0 - r * r;
    return std::exp(-1.0 / q) * (-2.0 * r / (q * q));
  }
  return -r / (gaussian_sigma * gaussian_sigma) * kernel_profile(shape, r);
}

}  // namespace detail

struct MollifierKernel {
  KernelShape shape = KernelShape::compact_bump;
  KernelAxes axes = KernelAxes::space;
  double epsilon = 0.0;
  Grid grid{};
  double time_step = 0.0;
  double space_radius = 0.0;
  double time_radius = 0.0;

  // Spatial weights on the grid, wrapped around the origin; they sum to one.
  RealBuffer weights;
  // Real transform of `weights` (unnormalized DFT), one entry per spectral mode.
  std::vector<double> spectrum;

  // Time weights for offsets -S..S stored at index s + S; they sum to one.
  int time_offsets = 0;
  std::vector<double> time_weights;
  // Weights of d/dt of the time profile; exact on linear-in-time data.
  std::vector<double> time_derivative_weights;

  bool has_space() const { return axes != KernelAxes::time; }
  bool has_time() const { return axes != KernelAxes::space; }

  double weight_at(const std::array<int, 3>& offset) const {
    std::size_t idx = 0;
    for (int a = 0; a < grid.dim; ++a) {
      const int w = ((offset[a] % grid.n) + grid.n) % grid.n;
      idx = idx * static_cast<std::size_t>(grid.n) + static_cast<std::size_t>(w);
    }
    return weights[idx];
  }
  double time_weight(int s) const { return time_weights[static_cast<std::size_t>(s + time_offsets)]; }
  double time_derivative_weight(int s) const {
    return time_derivative_weights[static_cast<std::size_t>(s + time_offsets)];
  }
};

inline double minimum_epsilon(const Grid& g, KernelAxes axes) {
  if (axes == KernelAxes::time) return 0.0;
  const double smallest_radius = 2.0 * g.spacing();
  return axes == KernelAxes::space ? smallest_radius : smallest_radius * std::numbers::sqrt2;
}

inline MollifierKernel make_kernel(KernelShape shape, double epsilon, KernelAxes axes, const Grid& grid,
                                   double time_step = 0.0) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("mollifier radius must be positive");
  MollifierKernel k;
  k.shape = shape;
  k.axes = axes;
  k.epsilon = epsilon;
  k.grid = grid;
  k.time_step = time_step;
  const double split = axes == KernelAxes::spacetime ? epsilon / std::numbers::sqrt2 : epsilon;
  k.space_radius = k.has_space() ? split : 0.0;
  k.time_radius = k.has_time() ? split : 0.0;

  const double h = grid.spacing();
  const std::size_t np = grid.points();
  k.weights.assign(np, 0.0);
  if (k.has_space()) {
    const double eps_min = minimum_epsilon(grid, axes);
    if (epsilon < eps_min * (1.0 - 1e-12))
      throw ResolutionError("mollifier radius " + format_number(epsilon) + " is under-resolved; minimum epsilon is " +
                            format_number(eps_min));
    const int R = static_cast<int>(std::floor(k.space_radius / h));
    if (2 * R >= grid.n) throw ResolutionError("mollifier wider than half the period");
    double total = 0.0;
    std::array<int, 3> m{0, 0, 0};
    const int lo2 = grid.dim == 3 ? -R : 0;
    const int hi2 = grid.dim == 3 ? R : 0;
    for (m[0] = -R; m[0] <= R; ++m[0]) {
      for (m[1] = -R; m[1] <= R; ++m[1]) {
        for (m[2] = lo2; m[2] <= hi2; ++m[2]) {
          const double r2 = static_cast<double>(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
          const double w = detail::kernel_profile(shape, h * std::sqrt(r2) / k.space_radius);
          if (w <= 0.0) continue;
          std::size_t idx = 0;
          for (int a = 0; a < grid.dim; ++a)
            idx = idx * static_cast<std::size_t>(grid.n) + static_cast<std::size_t>((m[a] + grid.n) % grid.n);
          k.weights[idx] = w;
          total += w;
        }
      }
    }
    for (double& w : k.weights) w /= total;
    PeriodicField wf(grid, 1);
    std::copy(k.weights.begin(), k.weights.end(), wf.values().begin());
    const auto ws = forward_transform(wf);
    k.spectrum.resize(grid.spectral_points());
    const double scale = static_cast<double>(np);
    for (std::size_t s = 0; s < k.spectrum.size(); ++s) k.spectrum[s] = ws[s].real() * scale;
  } else {
    k.weights[0] = 1.0;
    k.spectrum.assign(grid.spectral_points(), 1.0);
  }

  if (k.has_time()) {
    if (!(time_step > 0.0)) throw ConfigError("time mollification needs the snapshot interval");
    if (time_step > epsilon / 4.0 * (1.0 + 1e-12))
      throw ResolutionError("snapshot interval " + format_number(time_step) + " exceeds epsilon/4 = " +
                            format_number(epsilon / 4.0));
    const int S = static_cast<int>(std::ceil(k.time_radius / time_step - 1e-12)) - 1;
    k.time_offsets = S;
    k.time_weights.assign(static_cast<std::size_t>(2 * S + 1), 0.0);
    k.time_derivative_weights.assign(static_cast<std::size_t>(2 * S + 1), 0.0);
    double total = 0.0, moment = 0.0;
    for (int s = -S; s <= S; ++s) {
      const double r = std::abs(s) * time_step / k.time_radius;
      const double w = detail::kernel_profile(shape, r);
      const double sign = s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0);
      const double d = detail::kernel_profile_slope(shape, r) * sign;
      k.time_weights[static_cast<std::size_t>(s + S)] = w;
      k.time_derivative_weights[static_cast<std::size_t>(s + S)] = d;
      total += w;
      moment += -time_step * s * d;
    }
    for (double& w : k.time_weights) w /= total;
    for (double& d : k.time_derivative_weights) d /= moment;
  } else {
    k.time_offsets = 0;
    k.time_weights = {1.0};
    k.time_derivative_weights = {0.0};
  }
  return k;
}

// ---------------------------------------------------------------------------
// Spatial convolution

inline void mollify_spectral(SpectralField& s, const MollifierKernel& k) {
  if (!(s.grid() == k.grid)) throw ConfigError("kernel built for a different grid");
  for (int c = 0; c < s.components(); ++c) {
    Complex* coef = s.component(c).data();
    for (std::size_t m = 0; m < k.spectrum.size(); ++m) coef[m] *= k.spectrum[m];
  }
}

// Spatial part of `k` applied to every component.
inline PeriodicField mollify_space(const PeriodicField& f, const MollifierKernel& k) {
  if (!k.has_space()) return f;
  auto s = forward_transform(f);
  mollify_spectral(s, k);
  return inverse_transform(s);
}

// ---------------------------------------------------------------------------
// Time and space-time convolution

template <SnapshotSource S>
void require_stencil(const S& src, std::size_t i, const MollifierKernel& k) {
  const auto S_ = static_cast<std::size_t>(k.time_offsets);
  if (i < S_ || i + S_ >= src.size())
    throw SupportError("time stencil at snapshot " + std::to_string(i) + " leaves the trajectory");
}

template <SnapshotSource S>
void require_matching_step(const S& src, const MollifierKernel& k) {
  if (!k.has_time()) return;
  const double dt = uniform_time_step(src);
  if (std::abs(dt - k.time_step) > 1e-9 * dt) throw ConfigError("kernel time step does not match trajectory sampling");
}

struct TimeAccumulation {
  PeriodicField value;       // sum_s w_s q(t_{i-s})
  PeriodicField derivative;  // sum_s d_s q(t_{i-s}) over the leading components
};

// One pass over the stencil of snapshot i. `quantity(state)` returns a
// PeriodicField with a fixed component count; the first
// `derivative_components` of them also receive the time-derivative weights.
template <SnapshotSource S, class Quantity>
TimeAccumulation accumulate_time(const S& src, std::size_t i, const MollifierKernel& k, Quantity&& quantity,
                                 int derivative_components = 0) {
  require_stencil(src, i, k);
  TimeAccumulation acc;
  const int S_ = k.time_offsets;
  for (int s = -S_; s <= S_; ++s) {
    const auto idx = static_cast<std::size_t>(static_cast<long>(i) - s);
    const PeriodicField q = quantity(src.state(idx));
    if (acc.value.components() == 0) {
      acc.value = PeriodicField(q.grid(), q.components());
      if (derivative_components > 0) acc.derivative = PeriodicField(q.grid(), derivative_components);
    }
    acc.value.axpy(k.time_weight(s), q);
    if (derivative_components > 0) {
      const double d = k.time_derivative_weight(s);
      const std::size_t len = q.points() * static_cast<std::size_t>(derivative_components);
      const double* src_p = q.data();
      double* dst = acc.derivative.data();
      for (std::size_t j = 0; j < len; ++j) dst[j] += d * src_p[j];
    }
  }
  return acc;
}

// Space-time mollified quantity at snapshot i (optionally with its time derivative).
template <SnapshotSource S, class Quantity>
TimeAccumulation mollify_at(const S& src, std::size_t i, const MollifierKernel& k, Quantity&& quantity,
                            int derivative_components = 0) {
  auto acc = accumulate_time(src, i, k, std::forward<Quantity>(quantity), derivative_components);
  acc.value = mollify_space(acc.value, k);
  if (derivative_components > 0) acc.derivative = mollify_space(acc.derivative, k);
  return acc;
}

// Indices whose times lie in the interior range [t0 + eps, T - eps].
template <SnapshotSource S>
std::vector<std::size_t> interior_indices(const S& src, double epsilon) {
  std::vector<std::size_t> out;
  const double t0 = src.time(0);
  const double t1 = src.time(src.size() - 1);
  const double slack = 1e-9 * (t1 - t0);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double t = src.time(i);
    if (t - t0 >= epsilon - slack && t1 - t >= epsilon - slack) out.push_back(i);
  }
  return out;
}

// Applies the kernel to density, velocity and pressure of every interior
// snapshot. The result only covers times in (eps, T - eps).
template <SnapshotSource S>
FlowTrajectory mollify_spacetime(const S& src, const MollifierKernel& k) {
  if (!k.has_time()) throw ConfigError("mollify_spacetime needs a time or space-time kernel");
  if (src.size() < 2) throw ResolutionError("trajectory too short to mollify");
  require_matching_step(src, k);
  const auto ids = interior_indices(src, k.epsilon);
  if (ids.empty()) throw ResolutionError("trajectory shorter than 2 epsilon; nothing left after mollification");
  const Grid g = src.grid();
  const int d = g.dim;
  FlowTrajectory out(g);
  for (std::size_t i : ids) {
    auto acc = mollify_at(src, i, k, [d](const FlowState& st) {
      PeriodicField q(st.grid(), d + 2);
      q.set_component(0, st.rho);
      for (int a = 0; a < d; ++a) q.set_component(1 + a, st.u.component_field(a));
      q.set_component(d + 1, st.P);
      return q;
    });
    FlowState m;
    m.t = src.time(i);
    m.rho = acc.value.component_field(0);
    m.u = PeriodicField(g, d);
    for (int a = 0; a < d; ++a) m.u.set_component(a, acc.value.component_field(1 + a));
    m.P = acc.value.component_field(d + 1);
    out.append(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classical mollification estimates

// L^p norm of the full gradient (Frobenius over components and axes).
inline double gradient_lp_norm(const SpectralField& s, double p) {
  const Grid& g = s.grid();
  PeriodicField jac(g, s.components() * g.dim);
  for (int c = 0; c < s.components(); ++c) {
    SpectralField one(g, 1);
    std::copy(s.component(c).begin(), s.component(c).end(), one.component(0).begin());
    for (int a = 0; a < g.dim; ++a) jac.set_component(c * g.dim + a, inverse_transform(derivative_spectral(one, a)));
  }
  return lp_norm(jac, p);
}

struct MollifierRateReport {
  ScalingReport difference;  // ||w^eps - w||_p, predicted slope >= alpha
  ScalingReport gradient;    // ||grad w^eps||_p, predicted slope >= alpha - 1
  bool passed() const { return !is_failure(difference.verdict) && !is_failure(gradient.verdict); }
};

struct RateCheckOptions {
  double tolerance = 0.1;
  // `equal` for fields built to saturate the Besov class.
  SlopeCheck difference_check = SlopeCheck::at_least;
  KernelShape shape = KernelShape::compact_bump;
};

inline MollifierRateReport mollifier_rate_check(const PeriodicField& w, double alpha, double p,
                                                std::span<const double> eps, const RateCheckOptions& opt = {}) {
  require_sweep_shape(eps);
  const Grid& g = w.grid();
  const auto ws = forward_transform(w);
  std::vector<double> diff, grad;
  for (double e : eps) {
    const auto k = make_kernel(opt.shape, e, KernelAxes::space, g);
    auto ms = ws;
    mollify_spectral(ms, k);
    auto delta = inverse_transform(ms);
    delta -= w;
    diff.push_back(lp_norm(delta, p));
    grad.push_back(gradient_lp_norm(ms, p));
  }
  MollifierRateReport r;
  r.difference = make_scaling_report("mollifier_difference", eps, diff,
                                     {alpha, opt.tolerance, opt.difference_check, false, 1e-12 * (1.0 + lp_norm(w, p))});
  r.gradient = make_scaling_report("mollified_gradient", eps, grad,
                                   {alpha - 1.0, opt.tolerance, SlopeCheck::at_least, false, 1e-12 * (1.0 + lp_norm(w, p))});
  // A negative predicted gradient slope is still a checkable lower bound here.
  if (!r.gradient.identically_zero) {
    r.gradient.verdict = r.gradient.fitted_slope >= alpha - 1.0 - opt.tolerance ? Verdict::pass : Verdict::fail;
    r.gradient.note.clear();
  }
  return r;
}

}  // namespace vdlab

#pragma once

// Besov B_p^{alpha,inf} norms by translations, exponent estimation from
// increment scaling, and the time-Besov norm of a trajectory.
//
// The continuous sup over xi is sampled on log-spaced magnitudes times a
// fixed direction set (axes and diagonals). For p = 2 the increments are
// evaluated from the spectrum: ||w(.+xi) - w||^2 = V sum |w_k|^2 |e^{ik.xi} - 1|^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "vdlab/flow.hpp"
#include "vdlab/grid.hpp"
#include "vdlab/scaling.hpp"

namespace vdlab {

struct BesovParams {
  double alpha = 0.5;
  double p = 2.0;
  // Number of (magnitude, direction) pairs sampled; split evenly over directions.
  int shift_count = 64;
  // Shift magnitudes run from `min_shift_cells` grid spacings to `max_shift_fraction` of the period.
  double min_shift_cells = 2.0;
  double max_shift_fraction = 0.25;
};

struct ShiftSample {
  double magnitude = 0.0;
  int direction = 0;
  double increment = 0.0;  // ||w(.+xi) - w||_p
  double ratio = 0.0;      // increment / |xi|^alpha
};

struct BesovEstimate {
  double norm_value = 0.0;
  double lp_part = 0.0;
  double increment_sup = 0.0;
  std::optional<double> fitted_alpha;
  double alpha_stderr = 0.0;
  double fit_residual = 0.0;
  bool no_increments = false;
  std::vector<ShiftSample> table;
};

// Unit directions: coordinate axes, then face diagonals.
inline std::vector<std::array<double, 3>> shift_directions(int dim) {
  const double s = 1.0 / std::numbers::sqrt2;
  if (dim == 2) return {{1, 0, 0}, {0, 1, 0}, {s, s, 0}, {s, -s, 0}};
  return {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {s, s, 0}, {s, 0, s}, {0, s, s}};
}

inline void validate(const BesovParams& bp) {
  if (!(bp.alpha > 0.0 && bp.alpha < 1.0)) throw DomainError("Besov exponent alpha must lie in (0,1)");
  if (!(bp.p >= 1.0)) throw DomainError("Besov integrability p must be >= 1");
  if (bp.shift_count < 16) throw DomainError("Besov estimate needs shift_count >= 16");
}

namespace detail {

// ||w(.+xi) - w||_2 from the spectrum, with the same Nyquist convention as shift().
inline double l2_increment_spectral(const SpectralField& s, const std::array<double, 3>& xi) {
  const Grid& g = s.grid();
  const double k0 = g.wavenumber_unit();
  const int n = g.n;
  const int h = n / 2 + 1;
  // Per-axis phase tables indexed by storage position.
  std::array<std::vector<Complex>, 3> phase;
  for (int a = 0; a < g.dim; ++a) {
    const int len = a == g.dim - 1 ? h : n;
    phase[a].resize(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
      const int m = i <= n / 2 ? i : i - n;
      const double arg = k0 * m * xi[a];
      phase[a][static_cast<std::size_t>(i)] = (i == n / 2) ? Complex(std::cos(arg), 0.0) : std::polar(1.0, arg);
    }
  }
  double total = 0.0;
  for (int c = 0; c < s.components(); ++c) {
    const Complex* coef = s.component(c).data();
    std::size_t k = 0;
    if (g.dim == 2) {
      for (int i = 0; i < n; ++i) {
        const Complex pi = phase[0][static_cast<std::size_t>(i)];
        for (int j = 0; j < h; ++j, ++k) {
          const double mult = (j == 0 || j == n / 2) ? 1.0 : 2.0;
          total += mult * std::norm(coef[k]) * std::norm(pi * phase[1][static_cast<std::size_t>(j)] - 1.0);
        }
      }
    } else {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const Complex pij = phase[0][static_cast<std::size_t>(i)] * phase[1][static_cast<std::size_t>(j)];
          for (int l = 0; l < h; ++l, ++k) {
            const double mult = (l == 0 || l == n / 2) ? 1.0 : 2.0;
            total += mult * std::norm(coef[k]) * std::norm(pij * phase[2][static_cast<std::size_t>(l)] - 1.0);
          }
        }
    }
  }
  return std::sqrt(total * g.volume());
}

// Increments for every sampled (magnitude, direction) pair.
inline std::vector<ShiftSample> increment_table(const PeriodicField& w, double p, std::span<const double> magnitudes) {
  const Grid& g = w.grid();
  const auto dirs = shift_directions(g.dim);
  const auto spec = forward_transform(w);
  std::vector<ShiftSample> out;
  out.reserve(magnitudes.size() * dirs.size());
  for (double mag : magnitudes) {
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      std::array<double, 3> xi{mag * dirs[d][0], mag * dirs[d][1], mag * dirs[d][2]};
      double inc = 0.0;
      if (p == 2.0) {
        inc = l2_increment_spectral(spec, xi);
      } else {
        auto shifted = spec;
        shift_spectral(shifted, std::span<const double>(xi.data(), 3));
        auto diff = inverse_transform(shifted);
        diff -= w;
        inc = lp_norm(diff, p);
      }
      out.push_back({mag, static_cast<int>(d), inc, 0.0});
    }
  }
  return out;
}

inline std::vector<double> shift_magnitudes(const Grid& g, int count, double min_cells, double max_fraction) {
  return log_spaced(min_cells * g.spacing(), max_fraction * g.length, std::max(count, 2));
}

}  // namespace detail

inline BesovEstimate besov_norm(const PeriodicField& w, const BesovParams& bp) {
  validate(bp);
  const Grid& g = w.grid();
  const int ndir = static_cast<int>(shift_directions(g.dim).size());
  const auto mags = detail::shift_magnitudes(g, (bp.shift_count + ndir - 1) / ndir, bp.min_shift_cells, bp.max_shift_fraction);
  BesovEstimate est;
  est.table = detail::increment_table(w, bp.p, mags);
  est.lp_part = lp_norm(w, bp.p);
  for (auto& s : est.table) {
    s.ratio = s.increment / std::pow(s.magnitude, bp.alpha);
    est.increment_sup = std::max(est.increment_sup, s.ratio);
  }
  est.norm_value = est.lp_part + est.increment_sup;
  return est;
}

struct ExponentOptions {
  double p = 2.0;
  int magnitudes = 16;
  double min_shift_cells = 2.0;
  // Upper end of the regression window as a fraction of the period. Increments
  // of the lowest torus mode stop scaling well before L/4, so the fit window is
  // narrower than the sup window of besov_norm.
  double max_shift_fraction = 1.0 / 16.0;
};

struct ExponentEstimate {
  std::optional<double> alpha;
  double slope_stderr = 0.0;
  double band_low = 0.0;
  double band_high = 0.0;
  double residual = 0.0;
  bool no_increments = false;
  std::vector<double> magnitudes;
  std::vector<double> increments;  // sup over directions at each magnitude
};

namespace detail {

inline ExponentEstimate fit_increments(std::vector<double> mags, std::vector<double> incs, double scale) {
  ExponentEstimate e;
  e.magnitudes = std::move(mags);
  e.increments = std::move(incs);
  const double top = *std::max_element(e.increments.begin(), e.increments.end());
  if (!(top > 1e-13 * std::max(1.0, scale))) {
    e.no_increments = true;
    return e;
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < e.magnitudes.size(); ++i) {
    if (e.increments[i] <= 0.0) continue;
    x.push_back(e.magnitudes[i]);
    y.push_back(e.increments[i]);
  }
  const auto fit = fit_loglog(x, y);
  e.alpha = fit.slope;
  e.slope_stderr = fit.slope_stderr;
  e.band_low = fit.slope - 2.0 * fit.slope_stderr;
  e.band_high = fit.slope + 2.0 * fit.slope_stderr;
  e.residual = fit.residual_rms;
  return e;
}

}  // namespace detail

// Slope of log sup_dir ||w(.+xi) - w||_p against log |xi|.
inline ExponentEstimate estimate_exponent(const PeriodicField& w, const ExponentOptions& opt = {}) {
  if (!(opt.p >= 1.0)) throw DomainError("exponent estimate needs p >= 1");
  const Grid& g = w.grid();
  const auto mags = detail::shift_magnitudes(g, opt.magnitudes, opt.min_shift_cells, opt.max_shift_fraction);
  const auto table = detail::increment_table(w, opt.p, mags);
  std::vector<double> incs(mags.size(), 0.0);
  const std::size_t ndir = shift_directions(g.dim).size();
  for (std::size_t i = 0; i < table.size(); ++i) incs[i / ndir] = std::max(incs[i / ndir], table[i].increment);
  return detail::fit_increments(mags, std::move(incs), lp_norm(w, opt.p));
}

// ---------------------------------------------------------------------------
// Time Besov norm: B_{p_time}^{beta,inf}(0,T; B_q^{alpha,inf}) of a trajectory's velocity.

struct TimeBesovParams {
  double beta = 0.5;
  double p_time = 2.0;
  BesovParams spatial{};
  // Lags run from 2 snapshot intervals up to this fraction of the duration.
  double max_lag_fraction = 1.0 / 16.0;
  int lag_count = 12;
};

struct TimeBesovEstimate {
  BesovEstimate estimate;        // norm parts and the fitted temporal exponent
  std::vector<double> lags;       // tau
  std::vector<double> increments; // || ||u(.+tau) - u||_B ||_{L^p(0, T - tau)}
};

inline double time_lp(std::span<const double> values, double dt, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double s = 0.0;
  for (double v : values) s += std::pow(std::abs(v), p);
  return std::pow(s * dt, 1.0 / p);
}

template <SnapshotSource S>
TimeBesovEstimate time_besov_norm(const S& src, const TimeBesovParams& tp) {
  if (!(tp.beta > 0.0 && tp.beta < 1.0)) throw DomainError("temporal exponent beta must lie in (0,1)");
  validate(tp.spatial);
  if (src.size() < 32) throw ResolutionError("time Besov norm needs at least 32 snapshots, got " + std::to_string(src.size()));
  const double dt = uniform_time_step(src);
  const std::size_t N = src.size();
  std::vector<PeriodicField> u;
  u.reserve(N);
  for (std::size_t i = 0; i < N; ++i) u.push_back(src.state(i).u);

  TimeBesovEstimate out;
  std::vector<double> norms(N);
  for (std::size_t i = 0; i < N; ++i) norms[i] = besov_norm(u[i], tp.spatial).norm_value;
  out.estimate.lp_part = time_lp(norms, dt, tp.p_time);

  const double max_lag = std::max(4.0, tp.max_lag_fraction * static_cast<double>(N - 1));
  std::vector<int> lags;
  for (double l : log_spaced(2.0, max_lag, tp.lag_count)) {
    const int m = static_cast<int>(std::lround(l));
    if (lags.empty() || m != lags.back()) lags.push_back(m);
  }
  for (int m : lags) {
    std::vector<double> vals;
    for (std::size_t i = 0; i + static_cast<std::size_t>(m) < N; ++i) {
      auto d = u[i + static_cast<std::size_t>(m)];
      d -= u[i];
      vals.push_back(besov_norm(d, tp.spatial).norm_value);
    }
    const double tau = m * dt;
    const double inc = time_lp(vals, dt, tp.p_time);
    out.lags.push_back(tau);
    out.increments.push_back(inc);
    out.estimate.table.push_back({tau, 0, inc, inc / std::pow(tau, tp.beta)});
    out.estimate.increment_sup = std::max(out.estimate.increment_sup, inc / std::pow(tau, tp.beta));
  }
  out.estimate.norm_value = out.estimate.lp_part + out.estimate.increment_sup;
  out.estimate.no_increments = !(out.estimate.increment_sup > 0.0);
  if (out.lags.size() >= 2 && !out.estimate.no_increments) {
    auto fit = detail::fit_increments(out.lags, out.increments, out.estimate.lp_part);
    out.estimate.no_increments = fit.no_increments;
    out.estimate.fitted_alpha = fit.alpha;
    out.estimate.alpha_stderr = fit.slope_stderr;
    out.estimate.fit_residual = fit.residual;
  }
  return out;
}

// CSV rows: magnitude,direction,increment,ratio
inline void write_besov_rows(std::ostream& os, const BesovEstimate& e) {
  for (const auto& s : e.table)
    os << format_number(s.magnitude) << ',' << s.direction << ',' << format_number(s.increment) << ','
       << format_number(s.ratio) << '\n';
}

}  // namespace vdlab

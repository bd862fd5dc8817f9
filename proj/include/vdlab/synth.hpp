#pragma once

// Synthetic fields and trajectories of prescribed Besov regularity.
//
// scalar mode:        w(x) = sum_{j=0..J} 2^{-j alpha} cos(2^j x + phi_j)
// divfree-vector mode: u = perp_gradient(phi), phi a sum over octaves j of a few
//                      random integer wavevectors with |k| ~ 2^j and amplitude
//                      2^{-j alpha} / |k|, so every octave of u carries 2^{-j alpha}.
// Trajectories are separable: rho = R0(x) + b(t) R(x), u = a(t) U(x), with a(t)
// optionally a temporal lacunary series of exponent beta.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vdlab/flow.hpp"
#include "vdlab/grid.hpp"

namespace vdlab {

// Platform-independent uniform deviates: the standard engines are portable,
// the standard distributions are not.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  std::uint64_t next() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

enum class SynthMode { scalar, divfree_vector };

inline const char* to_string(SynthMode m) { return m == SynthMode::scalar ? "scalar" : "divfree-vector"; }

struct SynthSpec {
  double alpha = 0.5;
  double beta = 0.5;
  std::uint64_t seed = 1;
  int octaves = -1;  // -1: largest J with 2^J <= n/4
  SynthMode mode = SynthMode::scalar;
  int waves_per_octave = 4;
};

inline std::string to_config(const SynthSpec& s) {
  std::ostringstream os;
  os.precision(17);
  os << "alpha = " << s.alpha << "\nbeta = " << s.beta << "\nseed = " << s.seed << "\noctaves = " << s.octaves
     << "\nmode = " << to_string(s.mode) << '\n';
  return os.str();
}

inline int default_octaves(int samples) {
  int J = 0;
  while ((2 << J) <= samples / 4) ++J;
  return J;
}

inline void require_unit_exponent(double e, const char* name) {
  if (!(e > 0.0 && e < 1.0)) throw DomainError(std::string(name) + " must lie in (0,1)");
}

namespace detail {

// cos(k.x + phase) accumulated with weight `amp` via per-axis tables.
inline void add_plane_wave(PeriodicField& f, const std::array<int, 3>& k, double phase, double amp) {
  const Grid& g = f.grid();
  const int n = g.n;
  const double h = g.spacing() * g.wavenumber_unit();
  std::vector<double> cx(static_cast<std::size_t>(n)), sx(static_cast<std::size_t>(n));
  std::vector<double> cy(static_cast<std::size_t>(n)), sy(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cx[static_cast<std::size_t>(i)] = std::cos(h * k[0] * i);
    sx[static_cast<std::size_t>(i)] = std::sin(h * k[0] * i);
  }
  double* out = f.data();
  if (g.dim == 2) {
    for (int j = 0; j < n; ++j) {
      cy[static_cast<std::size_t>(j)] = std::cos(h * k[1] * j + phase);
      sy[static_cast<std::size_t>(j)] = std::sin(h * k[1] * j + phase);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out[static_cast<std::size_t>(i) * n + j] +=
            amp * (cx[static_cast<std::size_t>(i)] * cy[static_cast<std::size_t>(j)] -
                   sx[static_cast<std::size_t>(i)] * sy[static_cast<std::size_t>(j)]);
  } else {
    for (std::size_t idx = 0; idx < g.points(); ++idx) {
      const auto x = g.coordinates(idx);
      out[idx] += amp * std::cos(g.wavenumber_unit() * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]) + phase);
    }
  }
}

}  // namespace detail

// Temporal (or 1D) lacunary series sum_j 2^{-j beta} cos(2 pi 2^j t / period + phi_j).
inline std::vector<double> lacunary_series(const std::vector<double>& t, double beta, int octaves, std::uint64_t seed,
                                           double period) {
  require_unit_exponent(beta, "temporal exponent beta");
  PortableRng rng(seed);
  std::vector<double> phases(static_cast<std::size_t>(octaves + 1));
  for (double& p : phases) p = two_pi * rng.uniform();
  std::vector<double> out(t.size(), 0.0);
  for (int j = 0; j <= octaves; ++j) {
    const double amp = std::pow(2.0, -j * beta);
    const double w = two_pi * std::ldexp(1.0, j) / period;
    for (std::size_t i = 0; i < t.size(); ++i) out[i] += amp * std::cos(w * t[i] + phases[static_cast<std::size_t>(j)]);
  }
  return out;
}

inline PeriodicField synth_rough_field(const Grid& g, const SynthSpec& spec) {
  require_unit_exponent(spec.alpha, "spatial exponent alpha");
  const int J = spec.octaves < 0 ? default_octaves(g.n) : spec.octaves;
  if (std::ldexp(1.0, J) > g.n / 2 - 1) throw ResolutionError("too many octaves for the grid");
  PortableRng rng(spec.seed);
  if (spec.mode == SynthMode::scalar) {
    PeriodicField w(g, 1);
    for (int j = 0; j <= J; ++j) {
      const double phase = two_pi * rng.uniform();
      detail::add_plane_wave(w, {1 << j, 0, 0}, phase, std::pow(2.0, -j * spec.alpha));
    }
    return w;
  }
  if (g.dim != 2) throw DomainError("divfree-vector synthesis is implemented for 2D grids");
  if (spec.waves_per_octave < 1) throw DomainError("waves_per_octave must be positive");
  const int cap = g.n / 2 - 1;
  PeriodicField phi(g, 1);
  const double k0 = g.wavenumber_unit();
  for (int j = 0; j <= J; ++j) {
    int placed = 0;
    while (placed < spec.waves_per_octave) {
      const double r = std::ldexp(1.0, j) * std::pow(2.0, rng.uniform());
      const double theta = std::numbers::pi * rng.uniform();
      const double phase = two_pi * rng.uniform();
      const std::array<int, 3> k{static_cast<int>(std::lround(r * std::cos(theta))),
                                 static_cast<int>(std::lround(r * std::sin(theta))), 0};
      if ((k[0] == 0 && k[1] == 0) || std::abs(k[0]) > cap || std::abs(k[1]) > cap) continue;
      const double kmag = k0 * std::hypot(k[0], k[1]);
      detail::add_plane_wave(phi, k, phase, std::pow(2.0, -j * spec.alpha) / (kmag * std::sqrt(spec.waves_per_octave)));
      ++placed;
    }
  }
  return perp_gradient(phi);
}

// ---------------------------------------------------------------------------

// Lazily evaluated separable trajectory; states are built on demand, so long
// high-resolution trajectories never have to be stored.
class SyntheticTrajectory {
 public:
  SyntheticTrajectory(std::vector<double> times, PeriodicField rho_base, PeriodicField rho_mode,
                      std::vector<double> rho_factor, PeriodicField velocity, std::vector<double> velocity_factor)
      : times_(std::move(times)),
        rho_base_(std::move(rho_base)),
        rho_mode_(std::move(rho_mode)),
        b_(std::move(rho_factor)),
        U_(std::move(velocity)),
        a_(std::move(velocity_factor)) {
    if (times_.size() != b_.size() || times_.size() != a_.size()) throw ConfigError("factor tables differ in length");
    if (times_.size() < 2) throw ResolutionError("trajectory needs at least two snapshots");
  }

  std::size_t size() const { return times_.size(); }
  double time(std::size_t i) const { return times_[i]; }
  const Grid& grid() const { return U_.grid(); }
  FlowState state(std::size_t i) const {
    FlowState s;
    s.t = times_[i];
    s.rho = rho_base_;
    s.rho.axpy(b_[i], rho_mode_);
    s.u = U_;
    s.u *= a_[i];
    s.P = PeriodicField(grid(), 1);
    return s;
  }

  const PeriodicField& density_base() const { return rho_base_; }
  const PeriodicField& density_mode() const { return rho_mode_; }
  const PeriodicField& velocity_mode() const { return U_; }
  const std::vector<double>& velocity_factor() const { return a_; }
  const std::vector<double>& density_factor() const { return b_; }

 private:
  std::vector<double> times_;
  PeriodicField rho_base_;
  PeriodicField rho_mode_;
  std::vector<double> b_;
  PeriodicField U_;
  std::vector<double> a_;
};

enum class TimeProfile { steady, smooth, lacunary };
enum class DensityProfile { constant, smooth, rough };

struct SynthTrajectorySpec {
  SynthSpec space{};  // alpha, seed, mode for U; beta for a(t)
  std::uint64_t time_seed = 2;
  TimeProfile time_profile = TimeProfile::lacunary;
  int time_octaves = -1;  // -1: largest J with 2^J <= count/4
  DensityProfile density = DensityProfile::smooth;
  double rho_mean = 2.0;
  double rho_amplitude = 0.5;
  double rho_alpha = 0.3;  // only for rough density
  double t0 = 0.0;
  double dt = 0.01;
  int count = 256;
};

inline std::vector<double> uniform_times(double t0, double dt, int count) {
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = t0 + dt * i;
  return t;
}

inline SyntheticTrajectory synth_rough_trajectory(const Grid& g, const SynthTrajectorySpec& s) {
  if (s.count < 2 || !(s.dt > 0.0)) throw ConfigError("trajectory needs count >= 2 and dt > 0");
  const auto t = uniform_times(s.t0, s.dt, s.count);
  const double period = s.dt * s.count;

  std::vector<double> a(t.size(), 1.0);
  if (s.time_profile == TimeProfile::smooth) {
    for (std::size_t i = 0; i < t.size(); ++i) a[i] = 1.0 + 0.5 * std::sin(two_pi * (t[i] - s.t0) / period);
  } else if (s.time_profile == TimeProfile::lacunary) {
    const int J = s.time_octaves < 0 ? default_octaves(s.count) : s.time_octaves;
    std::vector<double> rel(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) rel[i] = t[i] - s.t0;
    a = lacunary_series(rel, s.space.beta, J, s.time_seed, period);
  }

  PeriodicField U = synth_rough_field(g, s.space);
  PeriodicField R0 = PeriodicField::constant(g, s.rho_mean);
  PeriodicField R(g, 1);
  std::vector<double> b(t.size(), 0.0);
  if (s.density == DensityProfile::smooth) {
    R = PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[0]) * std::sin(x[1]); });
    for (std::size_t i = 0; i < t.size(); ++i) b[i] = s.rho_amplitude * (1.0 + 0.2 * std::sin(t[i]));
  } else if (s.density == DensityProfile::rough) {
    require_unit_exponent(s.rho_alpha, "density exponent");
    SynthSpec rs{s.rho_alpha, 0.5, s.space.seed + 7919, -1, SynthMode::scalar, 1};
    R = synth_rough_field(g, rs);
    R *= 1.0 / R.max_abs();
    std::fill(b.begin(), b.end(), s.rho_amplitude);
  }
  if (s.rho_mean - 1.2 * s.rho_amplitude <= 0.0) throw DomainError("synthetic density would reach vacuum");
  return SyntheticTrajectory(t, std::move(R0), std::move(R), std::move(b), std::move(U), std::move(a));
}

}  // namespace vdlab

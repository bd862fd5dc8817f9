#pragma once

// Time test functions psi(t) with analytic derivatives.
//
//   smooth-compact(a, b): C-infinity bump supported in (a, b), psi = 1 at the midpoint.
//   plateau(t1, t2):      1 up to t1, smooth monotone descent to 0 at t2.
//   ramp(tau, K):         t/tau on [0, tau], cubic Hermite (C^1) transition on
//                         [tau, tau + 1/K], plateau(t1, t2) afterwards.
//   step(t~, eps):        0 below t~ - eps/2, linear across the window, 1 above.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "vdlab/errors.hpp"

namespace vdlab {

enum class TestFunctionKind { smooth_compact, plateau, ramp, step };

inline const char* to_string(TestFunctionKind k) {
  switch (k) {
    case TestFunctionKind::smooth_compact: return "smooth-compact";
    case TestFunctionKind::plateau: return "plateau";
    case TestFunctionKind::ramp: return "ramp";
    case TestFunctionKind::step: return "step";
  }
  return "?";
}

namespace detail {

inline double bump_exp(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
inline double bump_exp_slope(double x) { return x > 0.0 ? std::exp(-1.0 / x) / (x * x) : 0.0; }

// Smooth 1 -> 0 transition on r in [0, 1].
inline double smooth_fall(double r) {
  if (r <= 0.0) return 1.0;
  if (r >= 1.0) return 0.0;
  const double a = bump_exp(1.0 - r), b = bump_exp(r);
  return a / (a + b);
}
inline double smooth_fall_slope(double r) {
  if (r <= 0.0 || r >= 1.0) return 0.0;
  const double a = bump_exp(1.0 - r), b = bump_exp(r);
  const double da = -bump_exp_slope(1.0 - r), db = bump_exp_slope(r);
  return (da * b - a * db) / ((a + b) * (a + b));
}

}  // namespace detail

class TestFunction {
 public:
  static TestFunction smooth_compact(double a, double b) {
    if (!(b > a)) throw DomainError("smooth-compact test function needs a < b");
    TestFunction f(TestFunctionKind::smooth_compact);
    f.p0_ = a;
    f.p1_ = b;
    return f;
  }
  static TestFunction plateau(double t1, double t2) {
    if (!(t2 > t1)) throw DomainError("plateau test function needs t1 < t2");
    TestFunction f(TestFunctionKind::plateau);
    f.p0_ = t1;
    f.p1_ = t2;
    return f;
  }
  static TestFunction ramp(double tau, double K, double t1, double t2) {
    if (!(tau > 0.0) || !(K > 0.0)) throw DomainError("ramp test function needs tau > 0 and K > 0");
    if (!(t2 > t1) || tau + 1.0 / K > t2) throw DomainError("ramp transition must end before the plateau descent ends");
    TestFunction f(TestFunctionKind::ramp);
    f.p0_ = t1;
    f.p1_ = t2;
    f.tau_ = tau;
    f.K_ = K;
    return f;
  }
  static TestFunction step(double t_tilde, double eps) {
    if (!(eps > 0.0)) throw DomainError("step test function needs a positive window");
    TestFunction f(TestFunctionKind::step);
    f.p0_ = t_tilde;
    f.p1_ = eps;
    return f;
  }

  // c * psi; c = 0 gives the zero test function with the same support.
  TestFunction scaled(double c) const {
    TestFunction f = *this;
    f.scale_ = c * scale_;
    return f;
  }

  TestFunctionKind kind() const { return kind_; }

  double value(double t) const { return scale_ * raw_value(t); }
  double derivative(double t) const { return scale_ * raw_derivative(t); }

  // Closed interval outside which psi and psi_t vanish (step and plateau: psi
  // is constant, not zero, on one side; the interval covers where it varies
  // or is nonzero).
  std::pair<double, double> support() const {
    const double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
      case TestFunctionKind::smooth_compact: return {p0_, p1_};
      case TestFunctionKind::plateau: return {-inf, p1_};
      case TestFunctionKind::ramp: return {0.0, p1_};
      case TestFunctionKind::step: return {p0_ - p1_ / 2.0, inf};
    }
    return {-inf, inf};
  }

  double tau() const { return tau_; }
  double K() const { return K_; }
  double first() const { return p0_; }
  double second() const { return p1_; }

 private:
  explicit TestFunction(TestFunctionKind k) : kind_(k) {}

  double raw_value(double t) const {
    switch (kind_) {
      case TestFunctionKind::smooth_compact: {
        const double s = (2.0 * t - p0_ - p1_) / (p1_ - p0_);
        if (std::abs(s) >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - s * s));
      }
      case TestFunctionKind::plateau: return detail::smooth_fall((t - p0_) / (p1_ - p0_));
      case TestFunctionKind::ramp: {
        if (t <= tau_) return t / tau_;
        const double t_end = tau_ + 1.0 / K_;
        const auto base = plateau(p0_, p1_);
        if (t >= t_end) return base.value(t);
        return hermite(t, base, false);
      }
      case TestFunctionKind::step: {
        const double lo = p0_ - p1_ / 2.0, hi = p0_ + p1_ / 2.0;
        if (t <= lo) return 0.0;
        if (t >= hi) return 1.0;
        return 0.5 + (t - p0_) / p1_;
      }
    }
    return 0.0;
  }

  double raw_derivative(double t) const {
    switch (kind_) {
      case TestFunctionKind::smooth_compact: {
        const double s = (2.0 * t - p0_ - p1_) / (p1_ - p0_);
        if (std::abs(s) >= 1.0) return 0.0;
        const double q = 1.0 - s * s;
        return std::exp(1.0 - 1.0 / q) * (-2.0 * s / (q * q)) * 2.0 / (p1_ - p0_);
      }
      case TestFunctionKind::plateau: return detail::smooth_fall_slope((t - p0_) / (p1_ - p0_)) / (p1_ - p0_);
      case TestFunctionKind::ramp: {
        if (t <= tau_) return 1.0 / tau_;
        const double t_end = tau_ + 1.0 / K_;
        const auto base = plateau(p0_, p1_);
        if (t >= t_end) return base.derivative(t);
        return hermite(t, base, true);
      }
      case TestFunctionKind::step: {
        const double lo = p0_ - p1_ / 2.0, hi = p0_ + p1_ / 2.0;
        return (t > lo && t < hi) ? 1.0 / p1_ : 0.0;
      }
    }
    return 0.0;
  }

  double hermite(double t, const TestFunction& base, bool slope) const {
    const double a = tau_, h = 1.0 / K_;
    const double y0 = 1.0, m0 = 1.0 / tau_;
    const double y1 = base.value(a + h), m1 = base.derivative(a + h);
    const double s = (t - a) / h;
    if (!slope) {
      const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
      const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
      return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
    }
    const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
    const double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
    return (d00 * y0 + d01 * y1) / h + d10 * m0 + d11 * m1;
  }

  TestFunctionKind kind_;
  double p0_ = 0.0, p1_ = 0.0, tau_ = 0.0, K_ = 0.0, scale_ = 1.0;
};

}  // namespace vdlab

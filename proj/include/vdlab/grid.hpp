#pragma once

// Periodic sample grids on the N-torus, spectral transforms, calculus
// operators and quadrature norms.
//
// Physical samples are stored component-major; inside a component the
// layout is row-major with axis 0 (x) slowest. Spectral coefficients use
// the half-complex layout of a real-to-complex transform: the last axis
// keeps modes 0..n/2, the other axes the usual wrapped 0..n-1 order.
// Coefficients are normalized so that a constant field c has c in the
// zero mode and sin(x) has amplitude 1/2 in each of its two modes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include "vdlab/errors.hpp"
#include "vdlab/fft.hpp"

namespace vdlab {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct Grid {
  int dim = 2;
  int n = 64;
  double length = two_pi;

  static Grid make(int dim, int n, double length = two_pi) {
    if (dim != 2 && dim != 3) throw ConfigError("grid dimension must be 2 or 3, got " + std::to_string(dim));
    if (n < 8) throw ConfigError("grid resolution must be at least 8, got " + std::to_string(n));
    if ((n & (n - 1)) != 0) throw ConfigError("grid resolution must be a power of two, got " + std::to_string(n));
    if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("grid length must be positive");
    return Grid{dim, n, length};
  }

  std::size_t points() const {
    std::size_t p = 1;
    for (int a = 0; a < dim; ++a) p *= static_cast<std::size_t>(n);
    return p;
  }
  std::size_t spectral_points() const { return points() / static_cast<std::size_t>(n) * static_cast<std::size_t>(n / 2 + 1); }
  double spacing() const { return length / n; }
  double cell_volume() const { return std::pow(spacing(), dim); }
  double volume() const { return std::pow(length, dim); }
  double wavenumber_unit() const { return two_pi / length; }
  // (x, y[, z]) of the sample with linear index `idx`.
  std::array<double, 3> coordinates(std::size_t idx) const {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = dim - 1; a >= 0; --a) {
      x[a] = spacing() * static_cast<double>(idx % static_cast<std::size_t>(n));
      idx /= static_cast<std::size_t>(n);
    }
    return x;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

// Visits every spectral index with its signed integer mode numbers and a
// per-axis Nyquist flag.
template <class F>
void for_each_mode(const Grid& g, F&& f) {
  const int n = g.n;
  const int h = n / 2 + 1;
  auto mode = [n](int i) { return i <= n / 2 ? i : i - n; };
  std::size_t s = 0;
  if (g.dim == 2) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < h; ++j, ++s) {
        std::array<int, 3> m{mode(i), j, 0};
        std::array<bool, 3> nyq{i == n / 2, j == n / 2, false};
        f(s, m, nyq);
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < h; ++k, ++s) {
          std::array<int, 3> m{mode(i), mode(j), k};
          std::array<bool, 3> nyq{i == n / 2, j == n / 2, k == n / 2};
          f(s, m, nyq);
        }
      }
    }
  }
}

// Multiplicity of a half-spectrum entry in the full spectrum (1 or 2).
inline double mode_multiplicity(const Grid& g, int last_index) {
  return (last_index == 0 || last_index == g.n / 2) ? 1.0 : 2.0;
}

class PeriodicField {
 public:
  PeriodicField() = default;
  PeriodicField(const Grid& grid, int components)
      : grid_(grid), components_(components), values_(grid.points() * static_cast<std::size_t>(components), 0.0) {
    if (components < 1) throw ConfigError("field needs at least one component");
  }

  static PeriodicField scalar(const Grid& g) { return PeriodicField(g, 1); }
  static PeriodicField vector(const Grid& g) { return PeriodicField(g, g.dim); }
  static PeriodicField constant(const Grid& g, double c, int components = 1) {
    PeriodicField f(g, components);
    std::fill(f.values_.begin(), f.values_.end(), c);
    return f;
  }
  // f(x, component) sampled on the grid.
  template <class F>
  static PeriodicField from_function(const Grid& g, int components, F&& f) {
    PeriodicField out(g, components);
    const std::size_t np = g.points();
    for (std::size_t idx = 0; idx < np; ++idx) {
      const auto x = g.coordinates(idx);
      for (int c = 0; c < components; ++c) out.values_[static_cast<std::size_t>(c) * np + idx] = f(x, c);
    }
    return out;
  }

  const Grid& grid() const { return grid_; }
  int components() const { return components_; }
  std::size_t points() const { return grid_.points(); }
  std::size_t size() const { return values_.size(); }

  std::span<double> component(int c) {
    return {values_.data() + static_cast<std::size_t>(c) * points(), points()};
  }
  std::span<const double> component(int c) const {
    return {values_.data() + static_cast<std::size_t>(c) * points(), points()};
  }
  PeriodicField component_field(int c) const {
    PeriodicField out(grid_, 1);
    auto src = component(c);
    std::copy(src.begin(), src.end(), out.values_.begin());
    return out;
  }
  void set_component(int c, const PeriodicField& scalar_field) {
    auto src = scalar_field.component(0);
    std::copy(src.begin(), src.end(), component(c).begin());
  }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  RealBuffer& values() { return values_; }
  const RealBuffer& values() const { return values_; }

  bool is_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_value() const { return *std::max_element(values_.begin(), values_.end()); }
  double integral(int c = 0) const {
    double s = 0.0;
    for (double v : component(c)) s += v;
    return s * grid_.cell_volume();
  }

  PeriodicField& operator+=(const PeriodicField& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  PeriodicField& operator-=(const PeriodicField& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  PeriodicField& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }
  PeriodicField& operator+=(double a) {
    for (double& v : values_) v += a;
    return *this;
  }
  // this += a * o
  PeriodicField& axpy(double a, const PeriodicField& o) {
    check_same(o);
    const double* src = o.values_.data();
    double* dst = values_.data();
    const std::size_t n = values_.size();
    for (std::size_t i = 0; i < n; ++i) dst[i] += a * src[i];
    return *this;
  }

  friend PeriodicField operator+(PeriodicField a, const PeriodicField& b) { return a += b; }
  friend PeriodicField operator-(PeriodicField a, const PeriodicField& b) { return a -= b; }
  friend PeriodicField operator*(double s, PeriodicField a) { return a *= s; }
  friend PeriodicField operator*(PeriodicField a, double s) { return a *= s; }

  void check_same(const PeriodicField& o) const {
    if (!(grid_ == o.grid_) || components_ != o.components_) throw ConfigError("field shape mismatch");
  }

 private:
  Grid grid_{};
  int components_ = 0;
  RealBuffer values_;
};

class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(const Grid& grid, int components)
      : grid_(grid), components_(components), coeffs_(grid.spectral_points() * static_cast<std::size_t>(components)) {}

  const Grid& grid() const { return grid_; }
  int components() const { return components_; }
  std::size_t modes() const { return grid_.spectral_points(); }
  std::span<Complex> component(int c) {
    return {coeffs_.data() + static_cast<std::size_t>(c) * modes(), modes()};
  }
  std::span<const Complex> component(int c) const {
    return {coeffs_.data() + static_cast<std::size_t>(c) * modes(), modes()};
  }
  Complex& operator[](std::size_t i) { return coeffs_[i]; }
  Complex operator[](std::size_t i) const { return coeffs_[i]; }
  ComplexBuffer& coeffs() { return coeffs_; }
  const ComplexBuffer& coeffs() const { return coeffs_; }

 private:
  Grid grid_{};
  int components_ = 0;
  ComplexBuffer coeffs_;
};

// ---------------------------------------------------------------------------
// Transforms

inline SpectralField forward_transform(const PeriodicField& f) {
  const Grid& g = f.grid();
  SpectralField out(g, f.components());
  const auto& plan = detail::plan_for(g.dim, g.n);
  for (int c = 0; c < f.components(); ++c) plan.forward(f.component(c).data(), out.component(c).data());
  return out;
}

inline PeriodicField inverse_transform(const SpectralField& s) {
  const Grid& g = s.grid();
  PeriodicField out(g, s.components());
  const auto& plan = detail::plan_for(g.dim, g.n);
  for (int c = 0; c < s.components(); ++c) plan.inverse(s.component(c).data(), out.component(c).data());
  return out;
}

enum class Direction { forward, inverse };

// L^2 norm squared from the spectrum (cell-volume weighted Parseval sum).
inline double spectral_energy(const SpectralField& s) {
  const Grid& g = s.grid();
  const int h = g.n / 2 + 1;
  double e = 0.0;
  for (int c = 0; c < s.components(); ++c) {
    auto coef = s.component(c);
    for (std::size_t k = 0; k < coef.size(); ++k) {
      const int last = static_cast<int>(k % static_cast<std::size_t>(h));
      e += mode_multiplicity(g, last) * std::norm(coef[k]);
    }
  }
  return e * g.volume();
}

// ---------------------------------------------------------------------------
// Spectral calculus

inline void check_axis(const Grid& g, int axis) {
  if (axis < 0 || axis >= g.dim)
    throw DomainError("axis " + std::to_string(axis) + " out of range for a " + std::to_string(g.dim) + "D grid");
}

// d/dx_axis applied in place to every component; Nyquist mode of the axis is dropped.
inline void differentiate_spectral(SpectralField& s, int axis) {
  const Grid& g = s.grid();
  check_axis(g, axis);
  const double k0 = g.wavenumber_unit();
  for (int c = 0; c < s.components(); ++c) {
    Complex* coef = s.component(c).data();
    for_each_mode(g, [&](std::size_t k, const std::array<int, 3>& m, const std::array<bool, 3>& nyq) {
      coef[k] = nyq[axis] ? Complex(0.0) : coef[k] * Complex(0.0, k0 * m[axis]);
    });
  }
}

inline SpectralField derivative_spectral(SpectralField s, int axis) {
  differentiate_spectral(s, axis);
  return s;
}

inline PeriodicField derivative(const PeriodicField& f, int axis) {
  check_axis(f.grid(), axis);
  auto s = forward_transform(f);
  differentiate_spectral(s, axis);
  return inverse_transform(s);
}

// Scalar field -> vector of partial derivatives.
inline PeriodicField gradient(const PeriodicField& f) {
  if (f.components() != 1) throw DomainError("gradient expects a scalar field");
  const Grid& g = f.grid();
  const auto s = forward_transform(f);
  PeriodicField out(g, g.dim);
  for (int a = 0; a < g.dim; ++a) out.set_component(a, inverse_transform(derivative_spectral(s, a)));
  return out;
}

inline SpectralField divergence_spectral(const SpectralField& v) {
  const Grid& g = v.grid();
  if (v.components() != g.dim) throw DomainError("divergence expects a vector field");
  SpectralField out(g, 1);
  const double k0 = g.wavenumber_unit();
  Complex* dst = out.component(0).data();
  for (int a = 0; a < g.dim; ++a) {
    const Complex* src = v.component(a).data();
    for_each_mode(g, [&](std::size_t k, const std::array<int, 3>& m, const std::array<bool, 3>& nyq) {
      if (!nyq[a]) dst[k] += src[k] * Complex(0.0, k0 * m[a]);
    });
  }
  return out;
}

inline PeriodicField divergence(const PeriodicField& v) {
  return inverse_transform(divergence_spectral(forward_transform(v)));
}

// 2D only: (-d/dy, d/dx) of a scalar.
inline PeriodicField perp_gradient(const PeriodicField& f) {
  const Grid& g = f.grid();
  if (g.dim != 2) throw DomainError("perp_gradient is defined for 2D grids only");
  if (f.components() != 1) throw DomainError("perp_gradient expects a scalar field");
  const auto s = forward_transform(f);
  PeriodicField out(g, 2);
  auto dy = inverse_transform(derivative_spectral(s, 1));
  dy *= -1.0;
  out.set_component(0, dy);
  out.set_component(1, inverse_transform(derivative_spectral(s, 0)));
  return out;
}

// ---------------------------------------------------------------------------
// Translations

// Multiplies by exp(i k.xi). On a Nyquist axis the phase is replaced by its
// real part so the spectrum stays that of a real field.
inline void shift_spectral(SpectralField& s, std::span<const double> xi) {
  const Grid& g = s.grid();
  const double k0 = g.wavenumber_unit();
  std::array<double, 3> off{0.0, 0.0, 0.0};
  for (int a = 0; a < g.dim && a < static_cast<int>(xi.size()); ++a) off[a] = xi[a];
  for (int c = 0; c < s.components(); ++c) {
    Complex* coef = s.component(c).data();
    for_each_mode(g, [&](std::size_t k, const std::array<int, 3>& m, const std::array<bool, 3>& nyq) {
      Complex phase(1.0, 0.0);
      for (int a = 0; a < g.dim; ++a) {
        const double arg = k0 * m[a] * off[a];
        phase *= nyq[a] ? Complex(std::cos(arg), 0.0) : std::polar(1.0, arg);
      }
      coef[k] *= phase;
    });
  }
}

// Returns w(. + xi) for an arbitrary real offset.
inline PeriodicField shift(const PeriodicField& f, std::span<const double> xi) {
  auto s = forward_transform(f);
  shift_spectral(s, xi);
  return inverse_transform(s);
}
inline PeriodicField shift(const PeriodicField& f, std::initializer_list<double> xi) {
  return shift(f, std::span<const double>(xi.begin(), xi.size()));
}

// ---------------------------------------------------------------------------
// Norms

inline constexpr double infinity = std::numeric_limits<double>::infinity();

// Pointwise Euclidean magnitude over components, then rectangle-rule L^p.
inline double lp_norm(const PeriodicField& f, double p) {
  if (!(p >= 1.0)) throw DomainError("lp_norm requires p >= 1");
  const std::size_t np = f.points();
  const int nc = f.components();
  auto magnitude = [&](std::size_t idx) {
    if (nc == 1) return std::abs(f.component(0)[idx]);
    double s = 0.0;
    for (int c = 0; c < nc; ++c) {
      const double v = f.component(c)[idx];
      s += v * v;
    }
    return std::sqrt(s);
  };
  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t i = 0; i < np; ++i) m = std::max(m, magnitude(i));
    return m;
  }
  double s = 0.0;
  if (p == 2.0) {
    for (double v : f.values()) s += v * v;
    return std::sqrt(s * f.grid().cell_volume());
  }
  for (std::size_t i = 0; i < np; ++i) s += std::pow(magnitude(i), p);
  return std::pow(s * f.grid().cell_volume(), 1.0 / p);
}

inline double inner_product(const PeriodicField& a, const PeriodicField& b) {
  a.check_same(b);
  double s = 0.0;
  const std::size_t n = a.size();
  const double* x = a.data();
  const double* y = b.data();
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s * a.grid().cell_volume();
}

// ---------------------------------------------------------------------------
// Dealiasing (2/3 rule)

inline bool dealias_keeps(const Grid& g, const std::array<int, 3>& m) {
  for (int a = 0; a < g.dim; ++a)
    if (3 * std::abs(m[a]) > g.n) return false;
  return true;
}

inline void dealias_spectral(SpectralField& s) {
  const Grid& g = s.grid();
  for (int c = 0; c < s.components(); ++c) {
    Complex* coef = s.component(c).data();
    for_each_mode(g, [&](std::size_t k, const std::array<int, 3>& m, const std::array<bool, 3>&) {
      if (!dealias_keeps(g, m)) coef[k] = 0.0;
    });
  }
}

inline PeriodicField dealias(const PeriodicField& f) {
  auto s = forward_transform(f);
  dealias_spectral(s);
  return inverse_transform(s);
}

// Pointwise product of two fields; `b` may be scalar (broadcast) or match `a`.
inline PeriodicField multiply(const PeriodicField& a, const PeriodicField& b) {
  if (!(a.grid() == b.grid())) throw ConfigError("grid mismatch in product");
  if (b.components() != 1 && b.components() != a.components()) throw ConfigError("component mismatch in product");
  PeriodicField out(a.grid(), a.components());
  const std::size_t np = a.points();
  for (int c = 0; c < a.components(); ++c) {
    const double* x = a.component(c).data();
    const double* y = b.component(b.components() == 1 ? 0 : c).data();
    double* z = out.component(c).data();
    for (std::size_t i = 0; i < np; ++i) z[i] = x[i] * y[i];
  }
  return out;
}

}  // namespace vdlab

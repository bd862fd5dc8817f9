#pragma once

// Log-log regression and the ScalingReport used by every epsilon sweep.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vdlab/errors.hpp"
#include "vdlab/grid.hpp"

namespace vdlab {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double residual_rms = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares y = slope * x + intercept.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("line fit needs at least two matching points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw DomainError("line fit needs distinct abscissae");
  LinearFit fit;
  fit.points = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  fit.slope_stderr = x.size() > 2 ? std::sqrt(ss / (n - 2.0) / sxx) : 0.0;
  return fit;
}

// Fit of log(y) against log(x); all inputs must be positive.
inline LinearFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("log-log fit needs positive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return fit_line(lx, ly);
}

inline std::vector<double> log_spaced(double lo, double hi, int count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw DomainError("log_spaced needs 0 < lo < hi and count >= 2");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return out;
}

// Eight geometric points from four grid spacings up to a eighth of the period.
inline std::vector<double> default_epsilons(const Grid& g, int count = 8) {
  return log_spaced(4.0 * g.spacing(), g.length / 8.0, count);
}

enum class Verdict { pass, fail, vacuous_pass, marginal, informational };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::vacuous_pass: return "vacuous-pass";
    case Verdict::marginal: return "marginal";
    case Verdict::informational: return "informational";
  }
  return "?";
}

inline bool is_failure(Verdict v) { return v == Verdict::fail; }

// at_least: rate is an upper bound, faster decay is compliant.
// equal: the construction saturates the rate, both sides are checked.
enum class SlopeCheck { at_least, equal };

struct ScalingEntry {
  double epsilon = 0.0;
  double value = 0.0;
  bool floored = false;
};

struct ScalingReport {
  std::string quantity;
  std::vector<ScalingEntry> entries;
  double fitted_slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  double predicted_slope = 0.0;
  double tolerance = 0.0;
  SlopeCheck check = SlopeCheck::at_least;
  Verdict verdict = Verdict::fail;
  bool identically_zero = false;
  bool any_floored = false;
  std::string note;

  bool fitted() const { return !identically_zero; }
};

struct ScalingOptions {
  double predicted_slope = 0.0;
  double tolerance = 0.1;
  SlopeCheck check = SlopeCheck::at_least;
  // Verdict is recorded but never counted as a failure.
  bool informational = false;
  // max |value| at or below this counts as an identically vanishing term.
  double zero_threshold = 1e-13;
};

inline void require_sweep_shape(std::span<const double> eps) {
  if (eps.size() < 4) throw DomainError("scaling sweep needs at least 4 epsilon points, got " + std::to_string(eps.size()));
  const auto [lo, hi] = std::minmax_element(eps.begin(), eps.end());
  if (!(*lo > 0.0)) throw DomainError("scaling sweep needs positive epsilons");
  if (*hi / *lo < 10.0 * (1.0 - 1e-12)) throw DomainError("scaling sweep must span at least one decade of epsilon");
}

// Builds the report from magnitudes already evaluated at each epsilon.
inline ScalingReport make_scaling_report(std::string quantity, std::span<const double> eps,
                                         std::span<const double> values, const ScalingOptions& opt) {
  require_sweep_shape(eps);
  if (eps.size() != values.size()) throw DomainError("epsilon and value tables differ in length");
  ScalingReport r;
  r.quantity = std::move(quantity);
  r.predicted_slope = opt.predicted_slope;
  r.tolerance = opt.tolerance;
  r.check = opt.check;
  double vmax = 0.0;
  for (double v : values) vmax = std::max(vmax, std::abs(v));
  for (std::size_t i = 0; i < eps.size(); ++i) r.entries.push_back({eps[i], std::abs(values[i]), false});

  if (!(vmax > opt.zero_threshold)) {
    r.identically_zero = true;
    r.verdict = opt.informational ? Verdict::informational : Verdict::vacuous_pass;
    r.note = "term vanishes identically";
    return r;
  }
  const double floor = std::numeric_limits<double>::epsilon() * vmax;
  std::vector<double> x, y;
  for (auto& e : r.entries) {
    if (!(e.value > floor)) {
      e.value = floor;
      e.floored = true;
      r.any_floored = true;
    }
    x.push_back(e.epsilon);
    y.push_back(e.value);
  }
  const auto fit = fit_loglog(x, y);
  r.fitted_slope = fit.slope;
  r.intercept = fit.intercept;
  r.residual_rms = fit.residual_rms;
  if (r.any_floored) r.note = "nonpositive values replaced by machine floor";

  const bool ok = opt.check == SlopeCheck::equal
                      ? std::abs(fit.slope - opt.predicted_slope) <= opt.tolerance
                      : fit.slope >= opt.predicted_slope - opt.tolerance;
  if (opt.informational || opt.predicted_slope < -1e-12) {
    r.verdict = Verdict::informational;
    if (opt.predicted_slope < -1e-12 && r.note.empty()) r.note = "no guaranteed decay";
  } else if (std::abs(opt.predicted_slope) <= 1e-12) {
    r.verdict = Verdict::marginal;
    if (r.note.empty()) r.note = "predicted slope at threshold";
  } else {
    r.verdict = ok ? Verdict::pass : Verdict::fail;
  }
  return r;
}

// Evaluates `term(eps)` on every epsilon and fits the result.
template <class Term>
ScalingReport scaling_sweep(std::string quantity, Term&& term, std::span<const double> eps, const ScalingOptions& opt) {
  require_sweep_shape(eps);
  std::vector<double> values;
  values.reserve(eps.size());
  for (double e : eps) values.push_back(term(e));
  return make_scaling_report(std::move(quantity), eps, values, opt);
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// CSV rows: epsilon,quantity,value
inline void write_scaling_rows(std::ostream& os, const ScalingReport& r, const std::string& prefix = "") {
  for (const auto& e : r.entries) os << prefix << format_number(e.epsilon) << ',' << r.quantity << ',' << format_number(e.value) << '\n';
}

}  // namespace vdlab

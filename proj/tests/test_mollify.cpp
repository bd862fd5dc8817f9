#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vdlab/mollify.hpp"

using namespace vdlab;

namespace {

PeriodicField random_field(const Grid& g, int comps, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  PeriodicField f(g, comps);
  for (double& v : f.values()) v = d(rng);
  return f;
}

double max_diff(const PeriodicField& a, const PeriodicField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Direct periodic convolution sum_z eta(z) f(x - z).
PeriodicField brute_convolve(const PeriodicField& f, const MollifierKernel& k) {
  const Grid& g = f.grid();
  const int n = g.n;
  PeriodicField out(g, f.components());
  for (int c = 0; c < f.components(); ++c)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            const double w = k.weights[static_cast<std::size_t>(a * n + b)];
            if (w == 0.0) continue;
            s += w * f.component(c)[static_cast<std::size_t>(((i - a + n) % n) * n + (j - b + n) % n)];
          }
        out.component(c)[static_cast<std::size_t>(i * n + j)] = s;
      }
  return out;
}

}  // namespace

TEST(Kernel, NormalizedEvenAndSupported) {
  const auto g = Grid::make(2, 64);
  for (auto shape : {KernelShape::compact_bump, KernelShape::truncated_gaussian}) {
    const double eps = 0.5;
    const auto k = make_kernel(shape, eps, KernelAxes::space, g);
    double sum = 0.0;
    for (double w : k.weights) {
      sum += w;
      EXPECT_GE(w, 0.0);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (int a = -10; a <= 10; ++a)
      for (int b = -10; b <= 10; ++b) {
        EXPECT_EQ(k.weight_at({a, b, 0}), k.weight_at({-a, -b, 0}));
        if (g.spacing() * std::hypot(a, b) > eps) {
          EXPECT_EQ(k.weight_at({a, b, 0}), 0.0);
        }
      }
  }
}

TEST(Kernel, TimeWeightsAreEvenAndExactOnLinearData) {
  const auto g = Grid::make(2, 32);
  const auto k = make_kernel(KernelShape::compact_bump, 1.0, KernelAxes::spacetime, g, 0.05);
  double sum = 0.0, slope = 0.0;
  for (int s = -k.time_offsets; s <= k.time_offsets; ++s) {
    EXPECT_EQ(k.time_weight(s), k.time_weight(-s));
    EXPECT_EQ(k.time_derivative_weight(s), -k.time_derivative_weight(-s));
    EXPECT_LE(std::abs(s) * 0.05, k.time_radius);
    sum += k.time_weight(s);
    // d/dt of f(t) = t evaluated through the stencil f(t_i - s dt).
    slope += k.time_derivative_weight(s) * (-s * 0.05);
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(slope, 1.0, 1e-12);
  // Space and time radii combine to the space-time radius.
  EXPECT_NEAR(std::hypot(k.space_radius, k.time_radius), 1.0, 1e-14);
}

TEST(Kernel, RejectsUnderResolvedRadius) {
  const auto g = Grid::make(2, 64);
  try {
    make_kernel(KernelShape::compact_bump, g.spacing(), KernelAxes::space, g);
    FAIL() << "expected ResolutionError";
  } catch (const ResolutionError& e) {
    EXPECT_NE(std::string(e.what()).find("minimum epsilon"), std::string::npos);
  }
  EXPECT_NO_THROW(make_kernel(KernelShape::compact_bump, 2.0 * g.spacing(), KernelAxes::space, g));
  EXPECT_THROW(make_kernel(KernelShape::compact_bump, 0.4, KernelAxes::spacetime, g, 0.2), ResolutionError);
}

TEST(MollifySpace, ConstantIsFixedPoint) {
  const auto g = Grid::make(2, 32);
  const auto k = make_kernel(KernelShape::compact_bump, 0.8, KernelAxes::space, g);
  const auto c = PeriodicField::constant(g, 2.5);
  EXPECT_LE(max_diff(mollify_space(c, k), c), 1e-12);
}

TEST(MollifySpace, SpectralMatchesBruteForceConvolution) {
  const auto g = Grid::make(2, 32);
  const auto f = random_field(g, 2, 4);
  for (auto shape : {KernelShape::compact_bump, KernelShape::truncated_gaussian}) {
    const auto k = make_kernel(shape, 0.9, KernelAxes::space, g);
    EXPECT_LE(max_diff(mollify_space(f, k), brute_convolve(f, k)), 1e-12);
  }
}

TEST(MollifySpace, SineAmplitudeShrinksAndRecovers) {
  const auto g = Grid::make(2, 128);
  const auto f = PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(3.0 * x[0]); });
  double previous = 0.0;
  for (double eps : {1.0, 0.5, 0.25, 0.1}) {
    const auto k = make_kernel(KernelShape::compact_bump, eps, KernelAxes::space, g);
    // Oracle: the kernel's cosine moment at wavenumber 3 along x.
    double oracle = 0.0;
    const int R = static_cast<int>(eps / g.spacing()) + 1;
    for (int a = -R; a <= R; ++a)
      for (int b = -R; b <= R; ++b) oracle += k.weight_at({a, b, 0}) * std::cos(3.0 * a * g.spacing());
    const double amp = mollify_space(f, k).max_abs();
    EXPECT_LE(amp, 1.0);
    EXPECT_NEAR(amp, oracle, 1e-3 * oracle + 1e-12);
    EXPECT_GT(amp, previous);
    previous = amp;
  }
  EXPECT_GT(previous, 0.99);
}

TEST(MollifySpace, CommutesWithGradient) {
  const auto g = Grid::make(2, 32);
  const auto f = random_field(g, 1, 8);
  const auto k = make_kernel(KernelShape::compact_bump, 0.7, KernelAxes::space, g);
  EXPECT_LE(max_diff(gradient(mollify_space(f, k)), mollify_space(gradient(f), k)), 1e-10);
}

TEST(MollifySpace, YoungInequality) {
  const auto g = Grid::make(2, 32);
  const auto f = random_field(g, 1, 12);
  const auto k = make_kernel(KernelShape::compact_bump, 0.6, KernelAxes::space, g);
  const auto m = mollify_space(f, k);
  for (double p : {1.0, 2.0, infinity}) EXPECT_LE(lp_norm(m, p), lp_norm(f, p) + 1e-10);
}

TEST(MollifySpace, AdjointIdentity) {
  const auto g = Grid::make(2, 32);
  const auto k = make_kernel(KernelShape::truncated_gaussian, 0.6, KernelAxes::space, g);
  for (unsigned seed = 0; seed < 5; ++seed) {
    const auto w = random_field(g, 1, seed);
    const auto v = random_field(g, 1, seed + 50);
    EXPECT_NEAR(inner_product(mollify_space(w, k), v), inner_product(w, mollify_space(v, k)), 1e-10);
  }
}

namespace {

FlowTrajectory linear_in_time(const Grid& g, double dt, int count) {
  FlowTrajectory tr(g);
  const auto base = random_field(g, 1, 31);
  for (int i = 0; i < count; ++i) {
    const double t = i * dt;
    auto rho = PeriodicField::constant(g, 1.0 + t);
    PeriodicField u(g, 2);
    u.set_component(0, t * base);
    tr.append(make_state(rho, u, t));
  }
  return tr;
}

}  // namespace

TEST(MollifySpacetime, ShrinksTimeRangeAndKeepsConstants) {
  const auto g = Grid::make(2, 32);
  const double dt = 0.05;
  const auto tr = linear_in_time(g, dt, 61);  // T = 3
  const auto k = make_kernel(KernelShape::compact_bump, 0.8, KernelAxes::spacetime, g, dt);
  const auto m = mollify_spacetime(tr, k);
  ASSERT_GT(m.size(), 0u);
  EXPECT_GE(m.time(0), 0.8 - 1e-12);
  EXPECT_LE(m.time(m.size() - 1), 3.0 - 0.8 + 1e-12);
  // rho = 1 + t is affine in time and constant in space: the even kernel reproduces it.
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& s = m.state(i);
    EXPECT_NEAR(s.rho.max_value(), 1.0 + s.t, 1e-12);
    EXPECT_NEAR(s.rho.min_value(), 1.0 + s.t, 1e-12);
  }
}

TEST(MollifySpacetime, RejectsCoarseOrShortTrajectories) {
  const auto g = Grid::make(2, 64);
  const auto tr = linear_in_time(g, 0.05, 21);  // T = 1
  EXPECT_THROW(mollify_spacetime(tr, make_kernel(KernelShape::compact_bump, 0.8, KernelAxes::spacetime, g, 0.05)),
               ResolutionError);
  EXPECT_THROW(mollify_spacetime(tr, make_kernel(KernelShape::compact_bump, 0.4, KernelAxes::spacetime, g, 0.1)),
               ConfigError);
}

TEST(RateCheck, SmoothFieldIsSuperconvergent) {
  const auto g = Grid::make(2, 512);
  const auto f = PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[0]); });
  const auto eps = default_epsilons(g);
  const auto r = mollifier_rate_check(f, 1.0, 2.0, eps);
  EXPECT_NEAR(r.difference.fitted_slope, 2.0, 0.1);
  EXPECT_EQ(r.difference.verdict, Verdict::pass);
  EXPECT_TRUE(r.passed());
}

TEST(RateCheck, ConstantFieldIsVacuous) {
  const auto g = Grid::make(2, 128);
  const auto r = mollifier_rate_check(PeriodicField::constant(g, 1.0), 0.5, 2.0, log_spaced(0.1, 1.0, 5));
  EXPECT_EQ(r.difference.verdict, Verdict::vacuous_pass);
  EXPECT_TRUE(r.difference.identically_zero);
  EXPECT_TRUE(r.passed());
}

TEST(RateCheck, NeedsFourPointsOverADecade) {
  const auto g = Grid::make(2, 128);
  const auto f = random_field(g, 1, 1);
  const std::vector<double> few{0.2, 0.4, 2.0};
  EXPECT_THROW(mollifier_rate_check(f, 0.5, 2.0, few), DomainError);
  const std::vector<double> narrow{0.2, 0.3, 0.4, 0.5};
  EXPECT_THROW(mollifier_rate_check(f, 0.5, 2.0, narrow), DomainError);
}

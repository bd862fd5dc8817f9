#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vdlab/checkpoint.hpp"
#include "vdlab/grid.hpp"

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

}  // namespace

TEST(Grid, RejectsBadResolution) {
  EXPECT_THROW(Grid::make(2, 48), ConfigError);
  EXPECT_THROW(Grid::make(2, 4), ConfigError);
  EXPECT_THROW(Grid::make(4, 16), ConfigError);
  EXPECT_NO_THROW(Grid::make(3, 16));
}

TEST(Transform, ConstantLivesInZeroMode) {
  const auto g = Grid::make(2, 16);
  const auto s = forward_transform(PeriodicField::constant(g, 3.5));
  EXPECT_NEAR(s[0].real(), 3.5, 1e-14);
  for (std::size_t k = 1; k < s.modes(); ++k) EXPECT_LT(std::abs(s[k]), 1e-14);
}

TEST(Transform, SineHasHalfAmplitudePair) {
  const auto g = Grid::make(2, 64);
  const auto f = PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[0]); });
  const auto s = forward_transform(f);
  int count = 0;
  for_each_mode(g, [&](std::size_t k, auto m, auto) {
    const double a = std::abs(s[k]);
    if (a > 1e-12) {
      ++count;
      EXPECT_EQ(std::abs(m[0]), 1);
      EXPECT_EQ(m[1], 0);
      EXPECT_NEAR(a, 0.5, 1e-14);
    }
  });
  // The half-complex layout stores both x-modes because the last axis is y.
  EXPECT_EQ(count, 2);
}

TEST(Transform, RoundTrip) {
  for (int dim : {2, 3}) {
    const auto g = Grid::make(dim, 16);
    const auto f = random_field(g, dim, 7);
    EXPECT_LE(max_diff(inverse_transform(forward_transform(f)), f), 1e-12);
  }
}

TEST(Transform, Parseval) {
  const auto g = Grid::make(2, 32);
  const auto f = random_field(g, 2, 11);
  const double l2 = lp_norm(f, 2.0);
  EXPECT_NEAR(spectral_energy(forward_transform(f)) / (l2 * l2), 1.0, 1e-10);
}

TEST(Calculus, SineDerivative) {
  const auto g = Grid::make(2, 64);
  const auto f = PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[0]); });
  const auto c = PeriodicField::from_function(g, 1, [](auto x, int) { return std::cos(x[0]); });
  EXPECT_LE(max_diff(derivative(f, 0), c), 1e-10);
  EXPECT_LE(derivative(f, 1).max_abs(), 1e-12);
  EXPECT_THROW(derivative(f, 2), DomainError);
}

TEST(Calculus, DivergenceOfPerpGradientVanishes) {
  const auto g = Grid::make(2, 32);
  const auto v = perp_gradient(random_field(g, 1, 3));
  EXPECT_LE(divergence(v).max_abs(), 1e-12);
}

TEST(Calculus, GradientOfConstantIsZero) {
  const auto g = Grid::make(2, 16);
  EXPECT_EQ(gradient(PeriodicField::constant(g, 2.0)).max_abs(), 0.0);
}

TEST(Calculus, DerivativeCommutesWithShift) {
  const auto g = Grid::make(2, 32);
  const auto f = dealias(random_field(g, 1, 5));
  const std::array<double, 2> xi{0.37, -1.1};
  EXPECT_LE(max_diff(derivative(shift(f, xi), 0), shift(derivative(f, 0), xi)), 1e-10);
}

TEST(Shift, SineByPi) {
  const auto g = Grid::make(2, 32);
  const auto f = PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[0]); });
  auto neg = f;
  neg *= -1.0;
  EXPECT_LE(max_diff(shift(f, {std::numbers::pi, 0.0}), neg), 1e-12);
}

TEST(Shift, GridStepMatchesRotation) {
  const auto g = Grid::make(2, 16);
  const auto f = random_field(g, 1, 9);
  const auto s = shift(f, {g.spacing(), 0.0});
  // Oracle: w(x + h) read directly from the neighbouring row.
  PeriodicField rot(g, 1);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) rot[static_cast<std::size_t>(i * g.n + j)] = f[static_cast<std::size_t>(((i + 1) % g.n) * g.n + j)];
  EXPECT_LE(max_diff(s, rot), 1e-12);
}

TEST(Shift, ZeroAndIsometry) {
  const auto g = Grid::make(2, 32);
  // Nyquist content has no exact continuous shift; a band-limited field does.
  const auto f = dealias(random_field(g, 1, 13));
  EXPECT_LE(max_diff(shift(f, {0.0, 0.0}), f), 1e-14);
  EXPECT_NEAR(lp_norm(shift(f, {0.31, 0.77}), 2.0) / lp_norm(f, 2.0), 1.0, 1e-10);
}

TEST(Norms, AnalyticValues) {
  const auto g = Grid::make(2, 32);
  const auto one = PeriodicField::constant(g, 1.0);
  EXPECT_NEAR(lp_norm(one, 2.0), two_pi, 1e-12);
  EXPECT_NEAR(lp_norm(one, 1.0), two_pi * two_pi, 1e-10);
  EXPECT_NEAR(lp_norm(one, 3.0), std::pow(two_pi, 2.0 / 3.0), 1e-12);
  EXPECT_EQ(lp_norm(one, infinity), 1.0);
  const auto s = PeriodicField::from_function(g, 1, [](auto x, int) { return std::sin(x[1]); });
  EXPECT_NEAR(lp_norm(s, 2.0), std::sqrt(2.0 * std::numbers::pi * std::numbers::pi), 1e-12);
  EXPECT_THROW(lp_norm(s, 0.5), DomainError);
}

TEST(Norms, TriangleInequality) {
  const auto g = Grid::make(2, 16);
  for (unsigned seed = 0; seed < 10; ++seed) {
    const auto a = random_field(g, 2, seed);
    const auto b = random_field(g, 2, seed + 100);
    for (double p : {1.0, 2.0, 3.5, infinity}) EXPECT_LE(lp_norm(a + b, p), lp_norm(a, p) + lp_norm(b, p) + 1e-12);
  }
}

TEST(Norms, InnerProductMatchesL2) {
  const auto g = Grid::make(2, 16);
  const auto a = random_field(g, 2, 21);
  EXPECT_NEAR(inner_product(a, a), std::pow(lp_norm(a, 2.0), 2), 1e-10);
}

TEST(Dealias, IdempotentAndKeepsConstants) {
  const auto g = Grid::make(2, 32);
  const auto f = random_field(g, 1, 17);
  const auto d = dealias(f);
  EXPECT_LE(max_diff(dealias(d), d), 1e-14);
  const auto c = PeriodicField::constant(g, 4.0);
  EXPECT_LE(max_diff(dealias(c), c), 1e-14);
  const auto nyq = PeriodicField::from_function(g, 1, [](auto x, int) { return std::cos(16.0 * x[0]); });
  EXPECT_LE(dealias(nyq).max_abs(), 1e-14);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto g = Grid::make(2, 16);
  const auto f = random_field(g, 3, 23);
  std::stringstream ss;
  write_checkpoint(ss, f, 0.125);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 6u + 12u + 8u + f.size() * 8u);
  EXPECT_EQ(bytes.substr(0, 6), "BOLAB1");
  const auto cp = read_checkpoint(ss);
  EXPECT_EQ(cp.time, 0.125);
  EXPECT_EQ(cp.field.components(), 3);
  EXPECT_EQ(max_diff(cp.field, f), 0.0);
}

TEST(Checkpoint, RejectsGarbage) {
  std::stringstream ss("NOTLAB");
  EXPECT_THROW(read_checkpoint(ss), ConfigError);
}

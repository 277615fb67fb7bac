#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gen.hpp"
#include "homeostat/numeric.hpp"

using namespace homeostat;

TEST(CompensatedSum, RecoversCancelledTerms) {
  std::vector<double> v{1e16, 1.0, -1e16, 1.0};
  EXPECT_EQ(compensated_sum(v), 2.0);
}

TEST(Linspace, EndpointsExact) {
  const auto v = linspace(-0.8, 0.4, 121);
  ASSERT_EQ(v.size(), 121u);
  EXPECT_EQ(v.front(), -0.8);
  EXPECT_EQ(v.back(), 0.4);
}

TEST(Logspace, EndpointsExactAndIncreasing) {
  const auto v = logspace(1e-3, 1e3, 2000);
  EXPECT_EQ(v.front(), 1e-3);
  EXPECT_EQ(v.back(), 1e3);
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_LT(v[i - 1], v[i]);
}

TEST(BrentRoot, CubicToMachinePrecision) {
  auto f = [](double x) { return x * x * x - 2.0; };
  const auto r = brent_root(f, 0.0, 2.0, f(0.0), f(2.0));
  EXPECT_NEAR(r.x, std::cbrt(2.0), 4e-16);
  EXPECT_LT(r.iterations, 60);
}

TEST(BrentRoot, RejectsMissingBracket) {
  auto f = [](double x) { return x * x + 1.0; };
  EXPECT_THROW(brent_root(f, -1.0, 1.0, f(-1.0), f(1.0)), DomainError);
}

// Property: roots of random shifted exponentials are found inside the bracket.
TEST(BrentRoot, PropertyRandomBrackets) {
  gen::Source g(101);
  for (int i = 0; i < 200; ++i) {
    const double c = g.uniform(-3.0, 3.0);
    auto f = [c](double x) { return std::exp(x) - std::exp(c); };
    const auto r = brent_root(f, -4.0, 4.0, f(-4.0), f(4.0));
    EXPECT_NEAR(r.x, c, 1e-14 * std::max(1.0, std::abs(c))) << "c=" << c;
  }
}

TEST(TimeDerivative, ExactForQuadraticsOnNonUniformGrid) {
  std::vector<double> t{0.0, 0.1, 0.25, 0.3, 0.7, 1.0};
  std::vector<double> y;
  for (double s : t) y.push_back(3.0 * s * s - s + 2.0);
  const auto d = time_derivative(t, y);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(d[i], 6.0 * t[i] - 1.0, 1e-12);
}

TEST(InterpolateLinear, MidpointAndClamp) {
  std::vector<double> t{0.0, 1.0, 2.0}, y{0.0, 2.0, 6.0};
  EXPECT_DOUBLE_EQ(interpolate_linear(t, y, 1.5), 4.0);
  EXPECT_DOUBLE_EQ(interpolate_linear(t, y, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(interpolate_linear(t, y, 2.0), 6.0);
}

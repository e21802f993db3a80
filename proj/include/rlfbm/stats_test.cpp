#include "rlfbm/stats.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "rlfbm/rng.hpp"

namespace rlfbm {
namespace {

TEST(PairwiseSum, SmallAndLarge) {
  EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
  std::vector<double> x(1001);
  std::iota(x.begin(), x.end(), 0.0);
  EXPECT_EQ(pairwise_sum(x), 500500.0);
  std::vector<double> tiny(1 << 20, 0.1);
  EXPECT_NEAR(pairwise_sum(tiny), 0.1 * (1 << 20), 1e-8);
}

TEST(Moments, KnownBatch) {
  const std::vector<double> x{1, 2, 3, 4};
  const auto m = moments(x);
  EXPECT_EQ(m.n, 4u);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.stderr_mean, std::sqrt(5.0 / 12.0));
  // central moments 1.25 and 2.5625
  EXPECT_DOUBLE_EQ(m.stderr_variance, std::sqrt((2.5625 - 1.25 * 1.25) / 4.0));
  EXPECT_THROW(moments(std::vector<double>{}), std::invalid_argument);
  EXPECT_EQ(moments(std::vector<double>{3.0}).variance, 0.0);
  EXPECT_DOUBLE_EQ(square_moments(x).mean, 7.5);
}

TEST(ControlledMean, ExactControlRemovesNoise) {
  NormalStream z(3, 0);
  std::vector<double> c(500), y(500);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = z.next();
    y[i] = 2.0 + 3.0 * c[i];
  }
  const auto r = controlled_mean(y, {c}, std::vector<double>{0.0});
  EXPECT_NEAR(r.mean, 2.0, 1e-12);
  EXPECT_NEAR(r.stderr_mean, 0.0, 1e-12);
  EXPECT_NEAR(r.coefficients[0], 3.0, 1e-12);
  EXPECT_GT(r.plain_stderr, 0.05);
  EXPECT_THROW(controlled_mean(y, {c}, std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(controlled_mean(std::vector<double>{1, 2}, {{1, 2}}, std::vector<double>{0.0}),
               std::invalid_argument);
}

TEST(ControlledVariance, UnbiasedAndTighter) {
  // y = x + noise with x a known-moment control: Var(y) = 1 + 0.01
  NormalStream z(4, 0);
  const std::size_t n = 20000;
  std::vector<double> x(n), x2(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = z.next();
    x2[i] = x[i] * x[i];
    y[i] = x[i] + 0.1 * z.next();
  }
  const auto v = controlled_variance(y, {x, x2}, std::vector<double>{0.0, 1.0});
  EXPECT_NEAR(v.variance, 1.01, 3.0 * v.stderr_variance);
  EXPECT_LT(v.stderr_variance, 0.5 * v.plain_stderr);
  EXPECT_NEAR(v.plain_variance, 1.01, 3.0 * v.plain_stderr);
}

TEST(LogLogSlope, PowerLaw) {
  const std::vector<double> x{1, 2, 4, 8};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 0.5));
  EXPECT_NEAR(loglog_slope(x, y), 0.5, 1e-12);
  EXPECT_THROW(loglog_slope(x, std::vector<double>{1, 2}), std::invalid_argument);
  EXPECT_THROW(loglog_slope(std::vector<double>{1, 2}, std::vector<double>{1, 0}), std::domain_error);
}

}  // namespace
}  // namespace rlfbm

#include "rlfbm/gauss.hpp"

#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "rlfbm/kernels.hpp"
#include "rlfbm/rng.hpp"
#include "rlfbm/stats.hpp"

namespace rlfbm {
namespace {

const StateFunction kLinear = [](double, double x) { return x; };
const StateFunction kSquare = [](double, double x) { return x * x; };
const StateFunction kCube = [](double, double x) { return x * x * x; };
const StateFunction kCos = [](double, double x) { return std::cos(x); };

TEST(QuadratureRule, NormalMoments) {
  for (std::size_t order : {1u, 2u, 8u, 20u, 64u, 256u, 1024u}) {
    const QuadratureRule rule(order);
    double w = 0, m1 = 0, m2 = 0, m4 = 0;
    for (std::size_t k = 0; k < order; ++k) {
      const double z = rule.nodes()[k];
      EXPECT_GE(rule.weights()[k], 0.0);
      w += rule.weights()[k];
      m1 += rule.weights()[k] * z;
      m2 += rule.weights()[k] * z * z;
      m4 += rule.weights()[k] * z * z * z * z;
    }
    EXPECT_NEAR(w, 1.0, 1e-12) << order;
    EXPECT_NEAR(m1, 0.0, 1e-10) << order;
    if (order >= 8) {
      EXPECT_NEAR(m2, 1.0, 1e-10) << order;
      EXPECT_NEAR(m4, 3.0, 1e-9) << order;
    }
  }
  EXPECT_THROW(QuadratureRule(0), std::invalid_argument);
}

TEST(QuadratureRule, NodesAscendingAndSymmetric) {
  const QuadratureRule rule(33);
  for (std::size_t k = 1; k < rule.order(); ++k) EXPECT_LT(rule.nodes()[k - 1], rule.nodes()[k]);
  for (std::size_t k = 0; k < rule.order(); ++k) {
    EXPECT_NEAR(rule.nodes()[k], -rule.nodes()[rule.order() - 1 - k], 1e-13);
  }
}

TEST(HeatApply, Examples) {
  const QuadratureRule rule;
  for (double s : {0.01, 0.5, 1.0}) {
    EXPECT_NEAR(heat_apply(kLinear, 0.3, 0.7, s, rule), 0.7, 1e-13);
    EXPECT_NEAR(heat_apply(kSquare, 0.3, 0.7, s, rule), 0.49 + s, 1e-12);
    EXPECT_NEAR(heat_apply(kCos, 0.3, 0.7, s, QuadratureRule(20)), std::cos(0.7) * std::exp(-s / 2), 1e-8);
  }
  EXPECT_THROW(heat_apply(kLinear, 0.3, 0.7, 0.0, rule), std::invalid_argument);
  EXPECT_THROW(heat_apply(kLinear, 0.3, 0.7, -1.0, rule), std::invalid_argument);
  // below the smoothing floor the semigroup is the identity
  EXPECT_EQ(heat_apply(kCos, 0.0, 0.7, 1e-14, rule), std::cos(0.7));
}

TEST(HeatDx, Examples) {
  const QuadratureRule rule;
  for (double s : {0.01, 0.5, 1.0}) {
    EXPECT_NEAR(heat_dx(kLinear, 0.0, -0.4, s, rule), 1.0, 1e-12);
    EXPECT_NEAR(heat_dx(kSquare, 0.0, -0.4, s, rule), -0.8, 1e-12);
    EXPECT_NEAR(heat_dx(kCos, 0.0, -0.4, s, rule), -std::sin(-0.4) * std::exp(-s / 2), 1e-10);
  }
  EXPECT_THROW(heat_dx(kLinear, 0.0, 0.0, 0.0, rule), std::invalid_argument);
  EXPECT_THROW(heat_dx(kLinear, 0.0, 0.0, 1e-13, rule), std::domain_error);
}

TEST(HeatD2x, Examples) {
  const QuadratureRule rule;
  for (double s : {0.01, 0.5, 1.0}) {
    EXPECT_NEAR(heat_d2x(kSquare, 0.0, 1.3, s, rule), 2.0, 1e-10);
    EXPECT_NEAR(heat_d2x(kLinear, 0.0, 1.3, s, rule), 0.0, 1e-10);
    EXPECT_NEAR(heat_d2x(kCos, 0.0, 1.3, s, rule), -std::cos(1.3) * std::exp(-s / 2), 1e-9);
  }
  EXPECT_THROW(heat_d2x(kSquare, 0.0, 0.0, 1e-13, rule), std::domain_error);
}

TEST(HeatAll, MatchesSeparateCalls) {
  const QuadratureRule rule;
  const auto hv = heat_all(kCube, 0.0, 0.2, 0.3, rule);
  EXPECT_NEAR(hv.value, heat_apply(kCube, 0.0, 0.2, 0.3, rule), 1e-14);
  EXPECT_NEAR(hv.dx, heat_dx(kCube, 0.0, 0.2, 0.3, rule), 1e-13);
  EXPECT_NEAR(hv.d2x, heat_d2x(kCube, 0.0, 0.2, 0.3, rule), 1e-12);
}

TEST(HeatSemigroup, Composition) {
  const QuadratureRule rule;
  for (const auto& g : {kCube, kCos}) {
    for (double s : {0.1, 0.7}) {
      for (double r : {0.2, 1.0}) {
        const StateFunction inner = [&](double t, double x) { return heat_apply(g, t, x, s, rule); };
        EXPECT_NEAR(heat_apply(inner, 0.0, 0.4, r, rule), heat_apply(g, 0.0, 0.4, s + r, rule), 1e-6);
      }
    }
  }
}

TEST(HeatSemigroup, DerivativesAgainstFiniteDifferences) {
  const QuadratureRule rule;
  const double x = 0.35;
  const double s = 0.4;
  for (const auto& g : {kSquare, kCube, kCos}) {
    const double h = 1e-5;
    const double fd1 = (heat_apply(g, 0.0, x + h, s, rule) - heat_apply(g, 0.0, x - h, s, rule)) / (2 * h);
    EXPECT_NEAR(heat_dx(g, 0.0, x, s, rule), fd1, 1e-5);
    const double fd2 = (heat_dx(g, 0.0, x + h, s, rule) - heat_dx(g, 0.0, x - h, s, rule)) / (2 * h);
    EXPECT_NEAR(heat_d2x(g, 0.0, x, s, rule), fd2, 1e-4);
    const double hs = 1e-5;
    const double fds = (heat_apply(g, 0.0, x, s + hs, rule) - heat_apply(g, 0.0, x, s - hs, rule)) / (2 * hs);
    EXPECT_NEAR(fds, 0.5 * heat_d2x(g, 0.0, x, s, rule), 1e-4);
  }
}

TEST(AdaptiveHeat, ConvergesForSmoothAndRough) {
  const AdaptiveHeat ladder;
  EXPECT_NEAR(ladder.apply(kCos, 0.0, 0.1, 2.0), std::cos(0.1) * std::exp(-1.0), 1e-10);
  const StateFunction step = [](double, double x) { return x > 0.0 ? 1.0 : 0.0; };
  // P_s 1{x>0}(0) = 1/2; an even rule straddles the jump symmetrically
  EXPECT_NEAR(ladder.apply(step, 0.0, 0.0, 1.0), 0.5, 1e-12);
  EXPECT_THROW(AdaptiveHeat(64, 64), std::invalid_argument);
}

TEST(RegressionIdentity, Examples) {
  const HurstConfig cfg(0.75, 1.0);
  const QuadratureRule rule;
  for (double t : {0.5, 1.0}) {
    for (double u : {0.1 * t, 0.9 * t}) {
      const double v = std::pow(t, 1.5);
      EXPECT_NEAR(regression_mean_phi1(kLinear, t, u, cfg, rule), 1.0, 1e-12);
      EXPECT_NEAR(regression_mean_phi1(kCube, t, u, cfg, rule), 3.0 * v, 1e-12);
      EXPECT_NEAR(regression_mean_phi1(kCos, t, u, cfg, rule), 0.0, 1e-14);
    }
  }
  EXPECT_THROW(regression_mean_phi1(kLinear, 1.0, 1.0, cfg, rule), std::invalid_argument);
  EXPECT_THROW(regression_mean_phi1(kLinear, 1.0, 0.0, cfg, rule), std::invalid_argument);
}

TEST(RegressionIdentity, AgainstMonteCarlo) {
  const HurstConfig cfg(0.75, 1.0);
  const QuadratureRule rule(32);
  const double t = 0.8, u = 0.5;
  const double sigma2 = sigma2_cond(cfg, u, t);
  const double theta = theta_var(cfg, u, t);
  const StateFunction g = [](double, double x) { return std::exp(0.5 * x) + x * x * x; };
  NormalStream z(7, 0);
  std::vector<double> draws(100000);
  for (double& d : draws) d = heat_dx(g, t, std::sqrt(sigma2) * z.next(), theta, rule);
  const auto m = moments(draws);
  EXPECT_NEAR(regression_mean_phi1(g, t, u, cfg, QuadratureRule()), m.mean, 3.0 * m.stderr_mean);
}

}  // namespace
}  // namespace rlfbm

#include "rlfbm/experiments.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace rlfbm {
namespace {

ExperimentConfig small(const std::string& model, std::size_t steps = 32, std::size_t paths = 40) {
  ExperimentConfig c;
  c.steps = steps;
  c.paths = paths;
  c.model = model;
  c.eps_ladder = {8, 4, 2};
  return c;
}

TEST(ExperimentConfig, Validation) {
  auto c = small("linear");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.resolved_ext(), 8u);
  c.hurst = 0.5;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small("linear");
  c.paths = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small("linear");
  c.ext_steps = 4;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small("linear");
  c.eps_ladder = {0};
  EXPECT_THROW(c.validate(), ValidationError);
  c = small("bogus");
  EXPECT_THROW(run_identity_experiment(c), ValidationError);
  // extension scales with the level
  EXPECT_EQ(small("linear").discretization(64)->grid().ext_steps(), 16u);
}

TEST(Identity, RowsAndSummaries) {
  const auto c = small("linear");
  const auto r = run_identity_experiment(c);
  ASSERT_EQ(r.rows.size(), 40u);
  ASSERT_EQ(r.per_eps.size(), 3u);
  EXPECT_TRUE(r.has_oracle);
  EXPECT_EQ(r.model, "linear");
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.lhs.size(), 3u);
    EXPECT_EQ(row.rhs_drift, r.drift);
  }
  EXPECT_NEAR(r.per_eps[0].eps, 8.0 / 32, 1e-15);
  EXPECT_GE(r.rhs_total.variance, 0.0);
  std::ostringstream os;
  write_identity_csv(os, c, r);
  const std::string csv = os.str();
  EXPECT_EQ(csv.rfind("path_index,eps,lhs,rhs_total,rhs_drift\r\n", 0), 0u);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  EXPECT_EQ(lines, 1u + 40u * 3u);
}

TEST(Identity, IndependentOfWorkerCount) {
  auto c = small("cos", 32, 24);
  const auto a = run_identity_experiment(c);
  c.workers = 3;
  const auto b = run_identity_experiment(c);
  std::ostringstream sa, sb;
  write_identity_csv(sa, c, a);
  write_identity_csv(sb, c, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.rhs_total.variance, b.rhs_total.variance);
}

TEST(Covariance, SmallRun) {
  auto c = small("linear", 64, 400);
  const auto r = run_covariance_validation(c, 4);
  ASSERT_EQ(r.times.size(), 4u);
  EXPECT_NEAR(r.times.back(), 1.0, 1e-15);
  EXPECT_LT(r.max_abs_z, 5.0);
  EXPECT_NEAR(r.terminal_variance_cv.variance, 1.0, 5.0 * r.terminal_variance_cv.stderr_variance + 0.02);
  EXPECT_THROW(run_covariance_validation(c, 3), ValidationError);
}

TEST(Wiener, ConstantIntegrand) {
  auto c = small("constant", 64, 400);
  const auto r = run_wiener(c);
  EXPECT_NEAR(r.hnorm, 1.0, 1e-6);
  EXPECT_NEAR(r.integral.variance, 1.0, 4.0 * r.integral.stderr_variance);
  EXPECT_THROW(run_wiener(small("linear")), ValidationError);
}

TEST(Remainder, SlopeFinite) {
  auto c = small("constant", 64, 200);
  c.eps_ladder = {16, 8, 4, 2};
  const auto r = run_remainder(c);
  ASSERT_EQ(r.second_moment.size(), 4u);
  EXPECT_TRUE(std::isfinite(r.slope));
  EXPECT_GT(r.slope, 0.0);
}

TEST(Consistency, LinearModelIsExact) {
  // B_t is the Ito sum of cell-averaged kernel weights, which the residual reproduces
  for (std::size_t n : {32u, 128u}) {
    const auto c = small("linear", n, 50);
    const auto m = c.named_model(c.discretization());
    const auto res = first_level_consistency(*m.model, 50, 1, {n / 2, n});
    for (const auto& r : res) {
      EXPECT_GT(r.reference_l2, 0.0);
      EXPECT_LT(r.relative(), 1e-12);
    }
    const auto ni = norm_identity(*m.model, 20, 1, n, n / 2);
    EXPECT_NEAR(ni.phi1_variance, 0.0, 1e-20);
    EXPECT_NEAR(ni.phi2_energy, 0.0, 1e-18);
    EXPECT_EQ(ni.relative(), 0.0);
  }
}

TEST(Diagnostics, DeterministicAndLinear) {
  auto c = small("constant", 8, 20);
  const auto d = run_assumption_diagnostics(c);
  ASSERT_EQ(d.entries.size(), 5u);
  for (const auto& e : d.entries) {
    if (e.name == "I1") {
      EXPECT_GT(e.value_n, 0.0);
    } else {
      EXPECT_EQ(e.value_n, 0.0) << e.name;
      EXPECT_EQ(e.value_2n, 0.0) << e.name;
    }
  }
  c.model = "linear";
  for (const auto& e : run_assumption_diagnostics(c).entries) {
    if (e.name == "I4") {
      EXPECT_NEAR(e.value_n, 0.0, 1e-12);
    } else if (e.name == "I3") {
      EXPECT_TRUE(std::isfinite(e.value_n) && e.value_n > 0.0);
    }
  }
  c.steps = 128;
  EXPECT_THROW(run_assumption_diagnostics(c), ValidationError);
}

TEST(Isometry, DeterministicIsZero) {
  auto c = small("constant", 16, 10);
  const auto r = run_isometry_expansion(c);
  EXPECT_EQ(r.lhs.mean, 0.0);
  EXPECT_EQ(r.rhs.mean, 0.0);
  c.steps = 256;
  EXPECT_THROW(run_isometry_expansion(c), ValidationError);
}

TEST(Sweep, LevelsAndValidation) {
  auto c = small("linear", 64, 30);
  const auto r = run_sweep(c);
  ASSERT_EQ(r.levels.size(), 3u);
  EXPECT_EQ(r.levels[0].steps, 16u);
  EXPECT_EQ(r.levels[2].steps, 64u);
  EXPECT_THROW(run_sweep(small("power_t", 64, 5)), ValidationError);
  EXPECT_THROW(run_sweep(small("linear", 30, 5)), ValidationError);
}

}  // namespace
}  // namespace rlfbm

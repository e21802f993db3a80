#include "rlfbm/paths.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rlfbm/stats.hpp"

namespace rlfbm {
namespace {

std::shared_ptr<const Discretization> small_disc(double h = 0.75) {
  return make_discretization(HurstConfig(h, 1.0), 32, 8);
}

TEST(SimulateBrownian, DeterministicAndSized) {
  const SimulationGrid g(1.0, 32, 8);
  const auto a = simulate_brownian(g, 5, 11);
  const auto b = simulate_brownian(g, 5, 11);
  const auto c = simulate_brownian(g, 5, 12);
  EXPECT_EQ(a.dW.size(), 40u);
  EXPECT_EQ(a.dW, b.dW);
  EXPECT_NE(a.dW, c.dW);
  const auto w = a.levels();
  EXPECT_EQ(w.front(), 0.0);
  EXPECT_NEAR(w.back(), pairwise_sum(a.dW), 1e-12);
}

TEST(SimulateBrownian, IncrementLaw) {
  const SimulationGrid g(1.0, 16, 0);
  const std::size_t n = 20000;
  std::vector<double> x(n), y(n), prod(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = simulate_brownian(g, 9, i).dW[5];
    y[i] = simulate_brownian(g, 9, i + n).dW[5];
    prod[i] = x[i] * y[i];
  }
  const auto m = moments(x);
  EXPECT_NEAR(m.mean, 0.0, 5.0 * m.stderr_mean);
  EXPECT_NEAR(m.variance, g.step(), 5.0 * m.stderr_variance);
  const auto c = moments(prod);
  EXPECT_NEAR(c.mean, 0.0, 5.0 * c.stderr_mean);
}

TEST(BrownianPath, Coarsening) {
  const SimulationGrid g(1.0, 32, 8);
  const auto fine = simulate_brownian(g, 1, 0);
  const auto coarse = fine.coarsened(4);
  EXPECT_EQ(coarse.grid.steps(), 8u);
  EXPECT_EQ(coarse.grid.ext_steps(), 2u);
  const auto wf = fine.levels();
  const auto wc = coarse.levels();
  for (std::size_t i = 0; i < wc.size(); ++i) EXPECT_NEAR(wc[i], wf[4 * i], 1e-13);
  EXPECT_THROW(fine.coarsened(3), std::invalid_argument);
  EXPECT_THROW(fine.coarsened(0), std::invalid_argument);
}

TEST(BuildRlfbm, VolterraSumAndStart) {
  const auto d = small_disc();
  const auto w = simulate_brownian(d->grid(), 3, 0);
  const auto p = build_rlfbm(d, w);
  EXPECT_EQ(p.B[0], 0.0);
  ASSERT_EQ(p.B.size(), d->grid().nodes());
  for (std::size_t i : {1u, 17u, 40u}) {
    double acc = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      acc += cell_integral_K(d->config(), d->grid().node(i), d->grid().node(j), d->grid().node(j + 1)) /
             d->grid().step() * w.dW[j];
    }
    EXPECT_NEAR(p.B[i], acc, 1e-12);
  }
  EXPECT_THROW(build_rlfbm(d, simulate_brownian(SimulationGrid(1.0, 16, 8), 3, 0)), std::invalid_argument);
}

TEST(BuildRlfbm, DiscreteCovarianceApproachesR) {
  for (double h : {0.6, 0.75, 0.9}) {
    const auto d = make_discretization(HurstConfig(h, 1.0), 512, 0);
    for (std::size_t i : {128u, 512u}) {
      for (std::size_t k : {256u, 512u}) {
        double c = 0.0;
        for (std::size_t j = 0; j < std::min(i, k); ++j) c += d->kernel_avg(i - j) * d->kernel_avg(k - j);
        c *= d->grid().step();
        const double r = covariance_R(d->config(), d->grid().node(i), d->grid().node(k));
        EXPECT_LT(std::abs(c - r) / r, 0.01) << h << " " << i << " " << k;
      }
    }
  }
}

TEST(ConditionalMean, EndpointsAndErrors) {
  const auto d = small_disc();
  const auto w = simulate_brownian(d->grid(), 4, 2);
  const auto p = build_rlfbm(d, w);
  EXPECT_EQ(conditional_mean_B(*d, w, 0, 20), 0.0);
  EXPECT_NEAR(conditional_mean_B(*d, w, 20, 20), p.B[20], 1e-14);
  EXPECT_THROW(conditional_mean_B(*d, w, 21, 20), std::invalid_argument);
  EXPECT_THROW(conditional_mean_B(*d, w, 0, 41), std::out_of_range);
}

TEST(ConditionalMean, ReadsOnlyThePast) {
  const auto d = small_disc();
  auto w = simulate_brownian(d->grid(), 4, 2);
  const double before = conditional_mean_B(*d, w, 10, 30);
  const double nel = nelson_derivative(*d, w, 10, 30);
  const double bold = bold_D_field(*d, w, 20, 25, 10);
  for (std::size_t j = 10; j < w.dW.size(); ++j) w.dW[j] += 100.0;
  EXPECT_EQ(conditional_mean_B(*d, w, 10, 30), before);
  EXPECT_EQ(nelson_derivative(*d, w, 10, 30), nel);
  EXPECT_EQ(bold_D_field(*d, w, 20, 25, 10), bold);
}

TEST(NelsonDerivative, ValuesAndErrors) {
  const auto d = small_disc();
  const auto w = simulate_brownian(d->grid(), 4, 2);
  EXPECT_EQ(nelson_derivative(*d, w, 0, 10), 0.0);
  EXPECT_THROW(nelson_derivative(*d, w, 10, 10), std::domain_error);
  EXPECT_EQ(nelson_eps(*d, w, 0, 10, 2), 0.0);
  EXPECT_THROW(nelson_eps(*d, w, 10, 10, 2), std::domain_error);
  EXPECT_THROW(nelson_eps(*d, w, 5, 10, 9), std::invalid_argument);
  EXPECT_THROW(nelson_eps(*d, w, 5, 35, 8), std::out_of_range);
  // eps-quotient of conditional means
  const double expect =
      (conditional_mean_B(*d, w, 6, 14) - conditional_mean_B(*d, w, 6, 10)) / (4 * d->grid().step());
  EXPECT_NEAR(nelson_eps(*d, w, 6, 10, 4), expect, 1e-12);
}

TEST(NelsonEps, GapShrinksAsEpsHalves) {
  const auto d = make_discretization(HurstConfig(0.75, 1.0), 256, 64);
  std::vector<double> gaps;
  for (std::size_t k : {64u, 32u, 16u, 8u}) {
    std::vector<double> g(2000);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto w = simulate_brownian(d->grid(), 8, i);
      g[i] = nelson_eps(*d, w, 128, 192, k) - nelson_derivative(*d, w, 128, 192);
    }
    gaps.push_back(square_moments(g).mean);
  }
  for (std::size_t k = 1; k < gaps.size(); ++k) EXPECT_LT(gaps[k], gaps[k - 1]);
}

TEST(BoldDField, ValuesAndErrors) {
  const auto d = small_disc();
  const auto w = simulate_brownian(d->grid(), 4, 2);
  EXPECT_EQ(bold_D_field(*d, w, 20, 25, 0), 0.0);
  EXPECT_NE(bold_D_field(*d, w, 20, 25, 15), bold_D_field(*d, w, 25, 20, 15));
  EXPECT_THROW(bold_D_field(*d, w, 20, 20, 5), std::domain_error);
  EXPECT_THROW(bold_D_field(*d, w, 20, 25, 20), std::invalid_argument);
  double acc = 0.0;
  for (std::size_t j = 0; j < 15; ++j) acc += nelson_derivative(*d, w, j, 20) * d->dkernel_avg(25 - j) * w.dW[j];
  EXPECT_NEAR(bold_D_field(*d, w, 20, 25, 15), acc, 1e-12);
}

TEST(PathFields, MatchDirectEvaluation) {
  const auto d = small_disc();
  const auto w = simulate_brownian(d->grid(), 6, 1);
  const PathFields f(*d, w);
  EXPECT_EQ(f.steps(), 32u);
  for (std::size_t t = 0; t <= 32; ++t) {
    for (std::size_t r = 0; r <= t; ++r) {
      EXPECT_NEAR(f.cond_mean(t, r), conditional_mean_B(*d, w, r, t), 1e-13);
      if (r < t) {
        EXPECT_NEAR(f.nelson(t, r), nelson_derivative(*d, w, r, t), 1e-11);
      }
    }
  }
  const auto s = make_path_state(d, 6, 1);
  EXPECT_FALSE(s.fields.empty());
  EXPECT_TRUE(make_path_state(d, 6, 1, false).fields.empty());
  EXPECT_EQ(s.path.B, build_rlfbm(d, w).B);
}

TEST(PathCsv, Layout) {
  const auto d = make_discretization(HurstConfig(0.75, 1.0), 4, 0);
  const auto p = build_rlfbm(d, simulate_brownian(d->grid(), 1, 0));
  std::ostringstream os;
  write_path_csv(os, p);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,W,B");
  std::getline(is, line);
  EXPECT_EQ(line, "0,0,0");
  std::size_t rows = 1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 5u);
}

}  // namespace
}  // namespace rlfbm

#pragma once

// Gaussian smoothing: the heat semigroup P_s g(t,x) = E g(t, x + sqrt(s) Z)
// and its first two spatial derivatives in score-function form, evaluated
// with Gauss-Hermite quadrature against the standard normal measure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rlfbm/hurst.hpp"

namespace rlfbm {

/// A function g(t, x) of time and state.
using StateFunction = std::function<double(double, double)>;

/// Gauss-Hermite rule normalized to the standard normal law: sum_k w_k f(z_k) ~ E f(Z).
class QuadratureRule {
 public:
  static constexpr std::size_t kDefaultOrder = 64;

  explicit QuadratureRule(std::size_t order = kDefaultOrder) : order_(order) {
    if (order == 0) throw std::invalid_argument("quadrature order must be positive");
    build();
  }

  std::size_t order() const noexcept { return order_; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  template <class F>
  double expectation(F&& f) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < order_; ++k) acc += weights_[k] * f(nodes_[k]);
    return acc;
  }

 private:
  // Golub-Welsch eigenvalues of the Jacobi matrix of the physicists' Hermite
  // polynomials as starting points, polished by Newton steps on the
  // orthonormal recurrence, which also yields the weights.
  void build() {
    const std::size_t n = order_;
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    std::vector<double> x(n), w(n);
    if (n == 1) {
      x[0] = 0.0;
      w[0] = std::sqrt(std::numbers::pi);
    } else {
      Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      Eigen::VectorXd sub(static_cast<Eigen::Index>(n - 1));
      for (std::size_t k = 1; k < n; ++k) sub[static_cast<Eigen::Index>(k - 1)] = std::sqrt(0.5 * static_cast<double>(k));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
      eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
      if (eig.info() != Eigen::Success) throw std::runtime_error("Gauss-Hermite eigenvalue solve failed");
      for (std::size_t i = 0; i < n; ++i) {
        double z = eig.eigenvalues()[static_cast<Eigen::Index>(i)];
        double pp = 0.0;
        for (int its = 0; its < 8; ++its) {
          double p1 = pim4;
          double p2 = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double p3 = p2;
            p2 = p1;
            const double jj = static_cast<double>(j + 1);
            p1 = z * std::sqrt(2.0 / jj) * p2 - std::sqrt((jj - 1.0) / jj) * p3;
          }
          pp = std::sqrt(2.0 * static_cast<double>(n)) * p2;
          const double dz = p1 / pp;
          if (!std::isfinite(dz)) break;
          z -= dz;
          if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        x[i] = z;
        w[i] = (pp != 0.0 && std::isfinite(pp)) ? 2.0 / (pp * pp) : 0.0;
      }
      // enforce symmetry
      for (std::size_t i = 0; i < n / 2; ++i) {
        const double z = 0.5 * (x[n - 1 - i] - x[i]);
        const double wi = 0.5 * (w[i] + w[n - 1 - i]);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = wi;
      }
      std::reverse(x.begin(), x.end());
      std::reverse(w.begin(), w.end());
    }
    nodes_.resize(n);
    weights_.resize(n);
    const double sqrt_pi = std::sqrt(std::numbers::pi);
    // ascending order
    for (std::size_t k = 0; k < n; ++k) {
      nodes_[k] = std::numbers::sqrt2 * x[n - 1 - k];
      weights_[k] = w[n - 1 - k] / sqrt_pi;
    }
    if (n % 2 == 1) nodes_[n / 2] = 0.0;
  }

  std::size_t order_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Below this smoothing variance the semigroup is the identity and its derivatives are rejected.
inline constexpr double kMinSmoothing = 1e-12;

/// The semigroup and both spatial derivatives from one sweep of g over the nodes.
struct HeatValues {
  double value;
  double dx;
  double d2x;
};

namespace detail {

inline void check_smoothing(double s) {
  if (!(s > 0.0)) throw std::invalid_argument("heat semigroup requires s > 0");
}

inline void check_derivative_smoothing(double s) {
  check_smoothing(s);
  if (s < kMinSmoothing) {
    throw std::domain_error("heat semigroup derivative is ill-conditioned for s < 1e-12");
  }
}

}  // namespace detail

inline double heat_apply(const StateFunction& g, double t, double x, double s,
                         const QuadratureRule& rule) {
  detail::check_smoothing(s);
  if (s < kMinSmoothing) return g(t, x);
  const double root = std::sqrt(s);
  return rule.expectation([&](double z) { return g(t, x + root * z); });
}

/// d/dx P_s g(t,x) = E[g(t, x + sqrt(s) Z) Z] / sqrt(s).
inline double heat_dx(const StateFunction& g, double t, double x, double s,
                      const QuadratureRule& rule) {
  detail::check_derivative_smoothing(s);
  const double root = std::sqrt(s);
  return rule.expectation([&](double z) { return g(t, x + root * z) * z; }) / root;
}

/// d^2/dx^2 P_s g(t,x) = E[g(t, x + sqrt(s) Z)(Z^2 - 1)] / s.
inline double heat_d2x(const StateFunction& g, double t, double x, double s,
                       const QuadratureRule& rule) {
  detail::check_derivative_smoothing(s);
  const double root = std::sqrt(s);
  return rule.expectation([&](double z) { return g(t, x + root * z) * (z * z - 1.0); }) / s;
}

inline HeatValues heat_all(const StateFunction& g, double t, double x, double s,
                           const QuadratureRule& rule) {
  detail::check_derivative_smoothing(s);
  const double root = std::sqrt(s);
  const auto& z = rule.nodes();
  const auto& w = rule.weights();
  double v0 = 0.0, v1 = 0.0, v2 = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double gw = w[k] * g(t, x + root * z[k]);
    v0 += gw;
    v1 += gw * z[k];
    v2 += gw * (z[k] * z[k] - 1.0);
  }
  return {v0, v1 / root, v2 / s};
}

/// Rules of doubling order; evaluation stops once two successive orders agree.
class AdaptiveHeat {
 public:
  explicit AdaptiveHeat(std::size_t start_order = QuadratureRule::kDefaultOrder,
                        std::size_t max_order = 1024, double rel_tol = 1e-8)
      : rel_tol_(rel_tol) {
    for (std::size_t n = start_order; n <= max_order; n *= 2) rules_.emplace_back(n);
    if (rules_.size() < 2) throw std::invalid_argument("AdaptiveHeat needs at least two orders");
  }

  /// Smallest rule in the ladder that agrees with its successor on `probe`.
  template <class F>
  const QuadratureRule& select(F&& probe) const {
    double prev = probe(rules_.front());
    for (std::size_t k = 1; k < rules_.size(); ++k) {
      const double next = probe(rules_[k]);
      if (std::abs(next - prev) <= rel_tol_ * std::max(1.0, std::abs(next))) return rules_[k - 1];
      prev = next;
    }
    return rules_.back();
  }

  double apply(const StateFunction& g, double t, double x, double s) const {
    return converged([&](const QuadratureRule& r) { return heat_apply(g, t, x, s, r); });
  }
  double dx(const StateFunction& g, double t, double x, double s) const {
    return converged([&](const QuadratureRule& r) { return heat_dx(g, t, x, s, r); });
  }
  double d2x(const StateFunction& g, double t, double x, double s) const {
    return converged([&](const QuadratureRule& r) { return heat_d2x(g, t, x, s, r); });
  }

  const std::vector<QuadratureRule>& rules() const noexcept { return rules_; }

 private:
  template <class F>
  double converged(F&& eval) const {
    double prev = eval(rules_.front());
    for (std::size_t k = 1; k < rules_.size(); ++k) {
      const double next = eval(rules_[k]);
      if (std::abs(next - prev) <= rel_tol_ * std::max(1.0, std::abs(next))) return next;
      prev = next;
    }
    return prev;
  }

  double rel_tol_;
  std::vector<QuadratureRule> rules_;
};

/// E[d/dx P_{theta(u,t)} g(t, E^u[B_t])] through the Gaussian regression identity:
/// (1/v) E[Y g(t,Y)] with Y ~ N(0, v), v = sigma^2(u,t) + theta(u,t) = t^{2H}.
inline double regression_mean_phi1(const StateFunction& g, double t, double u,
                                   const HurstConfig& cfg, const QuadratureRule& rule) {
  if (!(u > 0.0) || !(u < t)) throw std::invalid_argument("regression_mean_phi1 requires 0 < u < t");
  const double two_h = 2.0 * cfg.hurst();
  const double sigma2 = std::pow(t, two_h) - std::pow(t - u, two_h);
  const double theta = std::pow(t - u, two_h);
  const double v = sigma2 + theta;
  const double root = std::sqrt(v);
  return rule.expectation([&](double z) { return root * z * g(t, root * z); }) / v;
}

}  // namespace rlfbm

#pragma once

// Batch statistics. Sums are pairwise so a reduction depends only on the
// ordered inputs, never on how they were produced.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace rlfbm {

inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double acc = 0.0;
    for (double v : x) acc += v;
    return acc;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double stderr_mean = 0.0;
  /// Standard error of the sample variance, from the fourth central moment.
  double stderr_variance = 0.0;
};

inline Moments moments(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("moments of an empty batch");
  Moments m;
  m.n = x.size();
  const double n = static_cast<double>(m.n);
  m.mean = pairwise_sum(x) / n;
  std::vector<double> d2(x.size()), d4(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - m.mean;
    d2[i] = d * d;
    d4[i] = d2[i] * d2[i];
  }
  if (m.n < 2) return m;
  const double s2 = pairwise_sum(d2);
  m.variance = s2 / (n - 1.0);
  m.stderr_mean = std::sqrt(m.variance / n);
  const double mu2 = s2 / n;
  const double mu4 = pairwise_sum(d4) / n;
  m.stderr_variance = std::sqrt(std::max(0.0, mu4 - mu2 * mu2) / n);
  return m;
}

inline double mean_of(std::span<const double> x) { return moments(x).mean; }

/// Mean of squares and its standard error: E|X|^2 for a batch of gaps X.
inline Moments square_moments(std::span<const double> x) {
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = x[i] * x[i];
  return moments(sq);
}

struct ControlledMean {
  double mean = 0.0;
  double stderr_mean = 0.0;
  double plain_mean = 0.0;
  double plain_stderr = 0.0;
  std::vector<double> coefficients;
};

/// Control-variate estimate of E[y] given controls with known means: the
/// regression of y on the centered controls is subtracted per sample.
inline ControlledMean controlled_mean(std::span<const double> y,
                                      const std::vector<std::vector<double>>& controls,
                                      std::span<const double> control_means) {
  const std::size_t n = y.size();
  const std::size_t k = controls.size();
  if (control_means.size() != k) throw std::invalid_argument("one known mean per control");
  if (n < k + 2) throw std::invalid_argument("too few samples for the control-variate regression");
  for (const auto& c : controls) {
    if (c.size() != n) throw std::invalid_argument("controls must match the batch size");
  }
  const auto plain = moments(y);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  Eigen::VectorXd yc(static_cast<Eigen::Index>(n));
  std::vector<double> cmean(k);
  for (std::size_t j = 0; j < k; ++j) cmean[j] = mean_of(controls[j]);
  for (std::size_t i = 0; i < n; ++i) {
    yc[static_cast<Eigen::Index>(i)] = y[i] - plain.mean;
    for (std::size_t j = 0; j < k; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = controls[j][i] - cmean[j];
    }
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(yc);
  std::vector<double> adjusted(n);
  for (std::size_t i = 0; i < n; ++i) {
    double shift = 0.0;
    for (std::size_t j = 0; j < k; ++j) shift += beta[static_cast<Eigen::Index>(j)] * (controls[j][i] - control_means[j]);
    adjusted[i] = y[i] - shift;
  }
  const auto adj = moments(adjusted);
  ControlledMean out;
  out.mean = adj.mean;
  // one degree of freedom per fitted coefficient
  out.stderr_mean = std::sqrt(adj.variance * (static_cast<double>(n) - 1.0) /
                              (static_cast<double>(n) - 1.0 - static_cast<double>(k)) /
                              static_cast<double>(n));
  out.plain_mean = plain.mean;
  out.plain_stderr = plain.stderr_mean;
  out.coefficients.assign(beta.data(), beta.data() + beta.size());
  return out;
}

struct ControlledVariance {
  double variance = 0.0;
  double stderr_variance = 0.0;
  double plain_variance = 0.0;
  double plain_stderr = 0.0;
};

/// Var(y) = E[y^2] - E[y]^2 with both moments control-variate adjusted; the
/// standard error comes from the delta method on the adjusted samples.
inline ControlledVariance controlled_variance(std::span<const double> y,
                                              const std::vector<std::vector<double>>& controls,
                                              std::span<const double> control_means) {
  const std::size_t n = y.size();
  std::vector<double> y2(n);
  for (std::size_t i = 0; i < n; ++i) y2[i] = y[i] * y[i];
  const auto m1 = controlled_mean(y, controls, control_means);
  const auto m2 = controlled_mean(y2, controls, control_means);
  // Influence function of Var: (y - mu)^2 - sigma^2; adjust it the same way.
  std::vector<double> infl(n);
  for (std::size_t i = 0; i < n; ++i) infl[i] = (y[i] - m1.mean) * (y[i] - m1.mean);
  const auto mi = controlled_mean(infl, controls, control_means);
  const auto plain = moments(y);
  ControlledVariance out;
  out.variance = (m2.mean - m1.mean * m1.mean) * static_cast<double>(n) / static_cast<double>(n - 1);
  out.stderr_variance = mi.stderr_mean;
  out.plain_variance = plain.variance;
  out.plain_stderr = plain.stderr_variance;
  return out;
}

/// Least-squares slope of log(y) on log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs matching pairs");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::domain_error("log-log fit needs positive data");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace rlfbm

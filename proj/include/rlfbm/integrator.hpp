#pragma once

// The two sides of the forward-integral identity on a grid:
//
//   (1/eps) int_0^T Y_t (B_{t+eps} - B_t) dt
//     ->  int_0^T int_0^s E[phi1(s,u)] dK/ds(s,u) du ds + int_0^T KY(T,r) dW_r,
//
// with KY(T,r) = int_r^T { E^r[Y_t] dK/dt(t,r) + phi1(t,r) D_{r,t}B
//                          + int_r^t phi2(t,v;r) dK/dt(t,v) dv } dt.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rlfbm/integrands.hpp"
#include "rlfbm/paths.hpp"

namespace rlfbm {

struct ForwardEstimate {
  double eps = 0.0;
  std::size_t eps_steps = 0;
  double value = 0.0;
  std::size_t n = 0;
};

namespace detail {

inline void check_model_path(const IntegrandModel& y, const PathState& p) {
  if (&y.disc() != &p.disc() && !(y.disc().grid() == p.disc().grid())) {
    throw std::invalid_argument("integrand and path live on different grids");
  }
}

// Quadrature weight of node i in an outer t-integral over (r, T]: the
// trapezoid halves the weight at T.
inline double outer_weight(std::size_t i, std::size_t n, double step) {
  return i == n ? 0.5 * step : step;
}

inline double forward_sum(std::span<const double> y, const std::vector<double>& b, std::size_t k) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * (b[i + k] - b[i]);
  return acc / static_cast<double>(k);
}

}  // namespace detail

/// Y at nodes 0..n-1, the integrand samples of the left-point forward sum.
inline std::vector<double> integrand_samples(const IntegrandModel& y, const PathState& p) {
  const std::size_t n = p.steps();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = y.value(p, i);
  return out;
}

/// sum_{t_i < T} Y_{t_i} (B_{t_i + eps} - B_{t_i}) / eps * step.
inline ForwardEstimate forward_estimate(const IntegrandModel& y, const PathState& p,
                                        std::size_t eps_steps) {
  detail::check_model_path(y, p);
  const auto& grid = p.disc().grid();
  grid.check_eps_steps(eps_steps);
  const auto samples = integrand_samples(y, p);
  return {static_cast<double>(eps_steps) * grid.step(), eps_steps,
          detail::forward_sum(samples, p.path.B, eps_steps), grid.steps()};
}

/// Forward estimates over an eps ladder sharing one pass of integrand samples.
inline std::vector<ForwardEstimate> forward_ladder(const IntegrandModel& y, const PathState& p,
                                                   std::span<const std::size_t> ladder) {
  detail::check_model_path(y, p);
  const auto& grid = p.disc().grid();
  const auto samples = integrand_samples(y, p);
  std::vector<ForwardEstimate> out;
  out.reserve(ladder.size());
  for (std::size_t k : ladder) {
    grid.check_eps_steps(k);
    out.push_back({static_cast<double>(k) * grid.step(), k,
                   detail::forward_sum(samples, p.path.B, k), grid.steps()});
  }
  return out;
}

/// The remainder int_0^T Y_t (1/eps) int_t^{t+eps} K(t+eps,u) dW_u dt.
inline double i2_term(const IntegrandModel& y, const PathState& p, std::size_t eps_steps) {
  detail::check_model_path(y, p);
  const auto& disc = p.disc();
  disc.grid().check_eps_steps(eps_steps);
  const auto& dw = p.brownian().dW;
  const std::size_t n = p.steps();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t j = i; j < i + eps_steps; ++j) inner += disc.kernel_avg(i + eps_steps - j) * dw[j];
    acc += y.value(p, i) * inner;
  }
  return acc / static_cast<double>(eps_steps);
}

struct KcalTerms {
  double cond_term = 0.0;    // int_r^T E^r[Y_t] dK/dt(t,r) dt
  double nelson_term = 0.0;  // int_r^T phi1(t,r) D_{r,t}B dt
  double phi2_term = 0.0;    // int_r^T int_r^t phi2(t,v;r) dK/dt(t,v) dv dt
  double total() const { return cond_term + nelson_term + phi2_term; }
};

/// KY(T, t_r) for one r < n, term by term.
///
/// The first term integrates the singular weight dK/dt(., t_r) exactly over
/// each t-cell with E^r[Y_t] frozen at the cell's left node (starting at
/// t = t_r, where E^r[Y_r] = Y_r). The other two use node values at t > t_r.
inline KcalTerms kcal_terms(const IntegrandModel& y, const PathState& p, std::size_t r_idx) {
  detail::check_model_path(y, p);
  const std::size_t n = p.steps();
  if (r_idx >= n) throw std::invalid_argument("KY(T,r) requires r < T");
  if (p.fields.empty()) throw std::invalid_argument("KY(T,r) needs the path's Nelson fields");
  const auto& disc = p.disc();
  const double step = disc.grid().step();
  KcalTerms out;
  for (std::size_t t = r_idx; t < n; ++t) out.cond_term += y.cond(p, r_idx, t) * disc.t_moment(t - r_idx);
  for (std::size_t t = r_idx + 1; t <= n; ++t) {
    const double w = detail::outer_weight(t, n, step);
    out.nelson_term += w * y.phi1(p, t, r_idx) * p.fields.nelson(t, r_idx);
    out.phi2_term += w * y.phi2_kernel_integral(p, t, r_idx);
  }
  return out;
}

inline double kcal(const IntegrandModel& y, const PathState& p, std::size_t r_idx) {
  return kcal_terms(y, p, r_idx).total();
}

/// KY(T, t_r) for every r < n in one sweep over t-columns; matches kcal term
/// for term up to summation order.
inline std::vector<double> kcal_all(const IntegrandModel& y, const PathState& p) {
  detail::check_model_path(y, p);
  if (p.fields.empty()) throw std::invalid_argument("KY(T,r) needs the path's Nelson fields");
  const auto& disc = p.disc();
  const std::size_t n = p.steps();
  const double step = disc.grid().step();
  std::vector<double> k(n, 0.0);
  std::vector<ConditionalTerms> column(n + 1);
  for (std::size_t t = 0; t <= n; ++t) {
    y.column(p, t, std::span<ConditionalTerms>(column.data(), t + 1));
    const double w = detail::outer_weight(t, n, step);
    const double* nelson = p.fields.nelson_row(t);
    const std::size_t upto = std::min(t, n - 1);
    for (std::size_t r = 0; r <= upto; ++r) {
      double acc = 0.0;
      if (t < n) acc += column[r].cond * disc.t_moment(t - r);
      if (r < t) acc += w * (column[r].phi1 * nelson[r] + column[r].phi2_kernel);
      k[r] += acc;
    }
  }
  return k;
}

/// int_0^T int_0^s E[phi1(s,u)] dK/ds(s,u) du ds, with the u-integral by
/// product integration against the model's diagonal power.
inline double drift_term(const IntegrandModel& y) {
  if (y.deterministic()) return 0.0;
  const auto& disc = y.disc();
  const auto& pw = y.product_weights();
  const std::size_t n = disc.grid().steps();
  const double step = disc.grid().step();
  double acc = 0.0;
  for (std::size_t s = 1; s <= n; ++s) {
    double inner = 0.0;
    for (std::size_t u = 0; u < s; ++u) inner += y.mean_phi1(s, u) / pw.power(s - u) * pw.moment(s - u);
    acc += detail::outer_weight(s, n, step) * inner;
  }
  return acc;
}

struct RepresentationValue {
  double drift = 0.0;       // path-independent
  double stochastic = 0.0;  // sum_r KY(T,r) dW_r
  double total = 0.0;
  double kcal_energy = 0.0;  // sum_r KY(T,r)^2 step, the isometry by-product
};

/// Right-hand side of the identity, with the drift computed once per model.
class RepresentationEvaluator {
 public:
  explicit RepresentationEvaluator(const IntegrandModel& y) : y_(&y), drift_(drift_term(y)) {}

  double drift() const noexcept { return drift_; }

  RepresentationValue operator()(const PathState& p) const {
    const auto k = kcal_all(*y_, p);
    const auto& dw = p.brownian().dW;
    const double step = p.disc().grid().step();
    RepresentationValue out;
    out.drift = drift_;
    for (std::size_t r = 0; r < k.size(); ++r) {
      out.stochastic += k[r] * dw[r];
      out.kcal_energy += k[r] * k[r] * step;
    }
    out.total = out.drift + out.stochastic;
    return out;
  }

 private:
  const IntegrandModel* y_;
  double drift_;
};

inline RepresentationValue representation_rhs(const IntegrandModel& y, const PathState& p) {
  return RepresentationEvaluator(y)(p);
}

/// int_0^T (int_r^T g_t dK/dt(t,r) dt) dW_r with exact t-cell moments of the
/// singular weight; sums in the same order as the deterministic representation.
inline double wiener_integral(const std::function<double(double)>& g, const PathState& p) {
  const auto& disc = p.disc();
  const std::size_t n = p.steps();
  std::vector<double> k(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double gt = g(disc.grid().node(t));
    for (std::size_t r = 0; r <= t; ++r) k[r] += gt * disc.t_moment(t - r);
  }
  const auto& dw = p.brownian().dW;
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) acc += k[r] * dw[r];
  return acc;
}

}  // namespace rlfbm

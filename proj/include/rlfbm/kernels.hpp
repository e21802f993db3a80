#pragma once

// Deterministic kernel calculus of the Riemann-Liouville fBm: the Volterra
// kernel, its time derivative, exact cell moments, the covariance and its
// mixed second derivative, and the conditional variances used by the heat
// semigroup representation. Every function here is pure.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "rlfbm/hurst.hpp"

namespace rlfbm {

/// K(t,s) = sqrt(2H)(t-s)^{H-1/2} for s < t, zero otherwise.
inline double kernel_K(const HurstConfig& cfg, double t, double s) {
  if (!(s < t)) return 0.0;
  return cfg.c_k() * std::pow(t - s, cfg.alpha_k());
}

/// dK/dt(t,s) = sqrt(2H)(H-1/2)(t-s)^{H-3/2}; undefined on and above the diagonal.
inline double kernel_dKdt(const HurstConfig& cfg, double t, double s) {
  if (!(s < t)) {
    throw std::domain_error("dK/dt is singular for s >= t");
  }
  return cfg.c_dk() * std::pow(t - s, cfg.alpha_k() - 1.0);
}

namespace detail {

inline void check_cell(double t, double a, double b) {
  if (!(a <= b)) throw std::invalid_argument("cell integral requires a <= b");
  if (!(b <= t)) throw std::invalid_argument("cell integral requires b <= t");
}

}  // namespace detail

/// Exact integral of K(t,.) over [a,b], a <= b <= t.
inline double cell_integral_K(const HurstConfig& cfg, double t, double a, double b) {
  detail::check_cell(t, a, b);
  const double p = cfg.alpha_k() + 1.0;
  return cfg.c_k() / p * (std::pow(t - a, p) - std::pow(t - b, p));
}

/// Exact integral of dK/dt(t,.) over [a,b], a <= b <= t. Finite at b = t since H > 1/2.
inline double cell_integral_dKdt(const HurstConfig& cfg, double t, double a, double b) {
  detail::check_cell(t, a, b);
  const double p = cfg.alpha_k();
  return cfg.c_k() * (std::pow(t - a, p) - std::pow(t - b, p));
}

/// Unregularized incomplete beta function beta_x(a,b) = int_0^x u^{a-1}(1-u)^{b-1} du.
inline double incomplete_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete_beta: x must lie in [0,1]");
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete_beta: a and b must be positive");
  if (x == 0.0) return 0.0;
  return boost::math::beta(a, b, x);
}

/// Covariance R(s,t) = int_0^{s^t} K(t,u)K(s,u) du by quadrature.
///
/// With v = (s^t) - u and v = z^{1/(alpha_k+1)} the factor v^{alpha_k} dv
/// becomes dz/(alpha_k+1), leaving only the mild (w + z^p)^{alpha_k} term.
inline double covariance_R(const HurstConfig& cfg, double s, double t) {
  if (!(s >= 0.0) || !(t >= 0.0) || !std::isfinite(s) || !std::isfinite(t)) {
    throw std::invalid_argument("covariance_R requires nonnegative finite times");
  }
  const double lo = std::min(s, t);
  const double gap = std::max(s, t) - lo;
  if (lo == 0.0) return 0.0;
  const double a = cfg.alpha_k();
  const double p = 1.0 / (a + 1.0);
  auto integrand = [&](double z) { return std::pow(gap + std::pow(z, p), a); };
  boost::math::quadrature::tanh_sinh<double> rule;
  const double upper = std::pow(lo, a + 1.0);
  const double value = rule.integrate(integrand, 0.0, upper, 1e-13);
  return 2.0 * cfg.hurst() * p * value;
}

/// Mixed second derivative of R off the diagonal, via the incomplete beta closed form.
inline double covariance_density(const HurstConfig& cfg, double s, double t) {
  if (!(s > 0.0) || !(t > 0.0)) throw std::invalid_argument("covariance_density requires s, t > 0");
  if (s == t) throw std::domain_error("covariance_density is singular on the diagonal s = t");
  const double h = cfg.hurst();
  const double a = cfg.alpha_k();
  const double lo = std::min(s, t);
  const double hi = std::max(s, t);
  return 2.0 * h * a * a * std::pow(hi - lo, 2.0 * h - 2.0) *
         incomplete_beta(lo / hi, a, 2.0 - 2.0 * h);
}

/// theta(s,t) = Var(B_t - E^s[B_t]) = int_s^t K(t,u)^2 du = (t-s)^{2H}.
inline double theta_var(const HurstConfig& cfg, double s, double t) {
  if (!(s >= 0.0 && s <= t)) throw std::invalid_argument("theta_var requires 0 <= s <= t");
  return std::pow(t - s, 2.0 * cfg.hurst());
}

/// sigma^2(u,t) = Var(E^u[B_t]) = int_0^u K(t,v)^2 dv = t^{2H} - (t-u)^{2H}.
inline double sigma2_cond(const HurstConfig& cfg, double u, double t) {
  if (!(u >= 0.0 && u <= t)) throw std::invalid_argument("sigma2_cond requires 0 <= u <= t");
  const double two_h = 2.0 * cfg.hurst();
  return std::pow(t, two_h) - std::pow(t - u, two_h);
}

/// Var of the Nelson derivative D_{r,t}B = int_0^r (dK/dt(t,u))^2 du.
inline double nelson_variance(const HurstConfig& cfg, double r, double t) {
  if (!(r >= 0.0 && r < t)) throw std::invalid_argument("nelson_variance requires 0 <= r < t");
  const double h = cfg.hurst();
  const double a = cfg.alpha_k();
  return 2.0 * h * a * a * (std::pow(t - r, 2.0 * h - 2.0) - std::pow(t, 2.0 * h - 2.0)) /
         (2.0 - 2.0 * h);
}

namespace detail {

inline void check_bold_triple(double x1, double x2, double r) {
  if (!(r >= 0.0) || !(r < std::min(x1, x2))) {
    throw std::invalid_argument("bold D field requires 0 <= r < min(x1, x2)");
  }
  if (x1 == x2) throw std::domain_error("bold D field is undefined on the diagonal x1 = x2");
}

template <class F>
double adaptive_gk(F&& f, double a, double b) {
  if (a == b) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-12, &err);
}

}  // namespace detail

/// The majorant int_0^r (x1-s)^{2(H-1)} (x2-s)^{2(H-3/2)} ds of the second
/// moment of the bold D field (constants dropped).
inline double bold_D_bound(const HurstConfig& cfg, double x1, double x2, double r) {
  detail::check_bold_triple(x1, x2, r);
  const double h = cfg.hurst();
  return detail::adaptive_gk(
      [&](double s) { return std::pow(x1 - s, 2.0 * (h - 1.0)) * std::pow(x2 - s, 2.0 * h - 3.0); },
      0.0, r);
}

/// Exact second moment of the bold D field,
/// E|int_0^r D_{s,x1}B dK/dt(x2,s) dW_s|^2 = int_0^r Var(D_{s,x1}B) (dK/dt(x2,s))^2 ds.
inline double bold_D_second_moment(const HurstConfig& cfg, double x1, double x2, double r) {
  detail::check_bold_triple(x1, x2, r);
  const double h = cfg.hurst();
  const double a = cfg.alpha_k();
  const double c = 2.0 * h * a * a;
  const double tail = std::pow(x1, 2.0 * h - 2.0);
  return c * c / (2.0 - 2.0 * h) *
         detail::adaptive_gk(
             [&](double s) {
               return (std::pow(x1 - s, 2.0 * h - 2.0) - tail) * std::pow(x2 - s, 2.0 * h - 3.0);
             },
             0.0, r);
}

/// |H|-norm int int |g_t g_s| d^2R/dtds ds dt of a deterministic integrand.
///
/// Inner integral over the lag v = t - s; with v = w^{1/(2H-1)} the factor
/// v^{2H-2} dv becomes dw/(2H-1) and the integrand is bounded.
inline double hnorm_sq(const HurstConfig& cfg, const std::function<double(double)>& g) {
  const double T = cfg.horizon();
  const double h = cfg.hurst();
  const double a = cfg.alpha_k();
  const double c = 2.0 * h * a * a;
  const double q = 1.0 / (2.0 * h - 1.0);
  auto inner = [&](double t) {
    const double gt = std::abs(g(t));
    if (gt == 0.0 || t == 0.0) return 0.0;
    auto f = [&](double w) {
      const double v = std::pow(w, q);
      if (v >= t) return 0.0;
      return std::abs(g(t - v)) * c * incomplete_beta((t - v) / t, a, 2.0 - 2.0 * h);
    };
    return gt * q * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                        f, 0.0, std::pow(t, 2.0 * h - 1.0), 8, 1e-9);
  };
  const double value =
      2.0 * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(inner, 0.0, T, 8, 1e-9);
  if (!std::isfinite(value)) throw std::domain_error("hnorm_sq: quadrature produced a non-finite value");
  return value;
}

}  // namespace rlfbm

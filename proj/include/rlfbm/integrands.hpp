#pragma once

// Integrands Y together with their martingale structure: conditional
// expectations E^r[Y_t], first martingale derivative phi1(t,r) and second
// martingale derivative phi2(t,v;r), all evaluated on grid nodes of a path.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlfbm/gauss.hpp"
#include "rlfbm/grid.hpp"
#include "rlfbm/paths.hpp"

namespace rlfbm {

/// Product-integration moments of dK/dt against a power weight:
/// moment(m) = int_{(m-1)step}^{m step} x^beta dK/dt(x) dx, x the distance to the row node.
///
/// A factor f(t,v) ~ (t-v)^beta A(t,v) is integrated against dK/dt(t,v) over a
/// cell by freezing A at the cell's left node and using this exact moment.
/// Requires beta + H - 1/2 > 0, which is the integrability threshold of the
/// fractional martingale integrands.
class ProductWeights {
 public:
  ProductWeights(const Discretization& disc, double beta) : beta_(beta) {
    const auto& cfg = disc.config();
    const double gamma = beta + cfg.alpha_k();
    if (!(gamma > 0.0)) {
      throw std::invalid_argument("product weights need beta > 1/2 - H for integrability");
    }
    const double d = disc.grid().step();
    const std::size_t n = disc.grid().cells();
    moment_.assign(n + 1, 0.0);
    power_.assign(n + 1, 0.0);
    average_.assign(n + 1, 0.0);
    for (std::size_t m = 1; m <= n; ++m) {
      const double hi = static_cast<double>(m) * d;
      const double lo = static_cast<double>(m - 1) * d;
      moment_[m] = cfg.c_dk() / gamma * (std::pow(hi, gamma) - std::pow(lo, gamma));
      power_[m] = std::pow(hi, beta);
      average_[m] = (std::pow(hi, beta + 1.0) - std::pow(lo, beta + 1.0)) / ((beta + 1.0) * d);
    }
  }

  double beta() const noexcept { return beta_; }
  double moment(std::size_t lag) const { return moment_[lag]; }
  /// (lag * step)^beta, the weight divided out before freezing.
  double power(std::size_t lag) const { return power_[lag]; }
  /// Mean of x^beta over the lag cell.
  double average(std::size_t lag) const { return average_[lag]; }

 private:
  double beta_;
  std::vector<double> moment_;
  std::vector<double> power_;
  std::vector<double> average_;
};

/// Everything the representation needs at one (r, t) pair, r <= t.
struct ConditionalTerms {
  double cond = 0.0;         // E^r[Y_t]
  double phi1 = 0.0;         // phi1(t, r), r < t
  double phi2_kernel = 0.0;  // int_r^t phi2(t,v;r) dK/dt(t,v) dv, r < t
};

/// Abstract integrand with its martingale derivatives.
///
/// Node arguments are grid indices on [0,T]. phi1(t,r) needs r < t;
/// phi2(t,v;r) needs r <= v < t (the v = r endpoint is the continuous limit).
/// `diagonal_exponent` is the power beta with phi1(t,u) ~ (t-u)^beta near the
/// diagonal; the same power governs phi2(t,v;r) in v.
class IntegrandModel {
 public:
  IntegrandModel(std::shared_ptr<const Discretization> disc, double diagonal_exponent)
      : disc_(std::move(disc)), weights_(*disc_, diagonal_exponent) {}
  virtual ~IntegrandModel() = default;

  IntegrandModel(const IntegrandModel&) = delete;
  IntegrandModel& operator=(const IntegrandModel&) = delete;

  virtual std::string name() const = 0;
  virtual bool deterministic() const { return false; }

  virtual double value(const PathState& p, std::size_t t) const = 0;
  virtual double cond(const PathState& p, std::size_t r, std::size_t t) const = 0;
  virtual double phi1(const PathState& p, std::size_t t, std::size_t r) const = 0;
  virtual double phi2(const PathState& p, std::size_t t, std::size_t v, std::size_t r) const = 0;
  virtual double mean(std::size_t t) const = 0;
  virtual double mean_phi1(std::size_t t, std::size_t u) const = 0;

  /// int_r^t phi2(t,v;r) dK/dt(t,v) dv (or with |phi2| when `absolute`), by
  /// product integration over the v-cells [t_j, t_{j+1}], j = r..t-1.
  virtual double phi2_kernel_integral(const PathState& p, std::size_t t, std::size_t r,
                                      bool absolute = false) const {
    check_pair(r, t, true);
    double acc = 0.0;
    for (std::size_t j = r; j < t; ++j) {
      const double f = phi2(p, t, j, r);
      acc += (absolute ? std::abs(f) : f) / weights_.power(t - j) * weights_.moment(t - j);
    }
    return acc;
  }

  /// Weight turning phi1(t, t_j) into its mean over the s-cell [t_j, t_{j+1}]
  /// in the discrete Ito sum, lag = t - j.
  virtual double ito_cell_factor(std::size_t lag) const {
    return weights_.average(lag) / weights_.power(lag);
  }

  /// Fills out[r] for r = 0..t. Entry t carries cond = value(t) only.
  virtual void column(const PathState& p, std::size_t t, std::span<ConditionalTerms> out) const {
    for (std::size_t r = 0; r < t; ++r) {
      out[r] = {cond(p, r, t), phi1(p, t, r), phi2_kernel_integral(p, t, r)};
    }
    out[t] = {value(p, t), 0.0, 0.0};
  }

  const Discretization& disc() const noexcept { return *disc_; }
  const std::shared_ptr<const Discretization>& discretization() const noexcept { return disc_; }
  double diagonal_exponent() const noexcept { return weights_.beta(); }
  const ProductWeights& product_weights() const noexcept { return weights_; }

 protected:
  void check_node(std::size_t t) const {
    if (t > disc_->grid().steps()) throw std::out_of_range("integrand node beyond T");
  }
  void check_pair(std::size_t r, std::size_t t, bool strict) const {
    check_node(t);
    if (strict ? !(r < t) : !(r <= t)) {
      throw std::domain_error(strict ? "martingale derivative requires r < t"
                                     : "conditional expectation requires r <= t");
    }
  }
  void check_triple(std::size_t t, std::size_t v, std::size_t r) const {
    check_node(t);
    if (!(r <= v && v < t)) throw std::domain_error("second martingale derivative requires r <= v < t");
  }
  double time(std::size_t i) const { return disc_->grid().node(i); }

 private:
  std::shared_ptr<const Discretization> disc_;
  ProductWeights weights_;
};

/// Y_t = g(t): no martingale part.
class DeterministicIntegrand final : public IntegrandModel {
 public:
  DeterministicIntegrand(std::shared_ptr<const Discretization> disc, std::function<double(double)> g,
                         std::string label = "deterministic")
      : IntegrandModel(std::move(disc), 0.0), g_(std::move(g)), label_(std::move(label)) {}

  std::string name() const override { return label_; }
  bool deterministic() const override { return true; }

  double value(const PathState&, std::size_t t) const override { return at(t); }
  double cond(const PathState&, std::size_t r, std::size_t t) const override {
    check_pair(r, t, false);
    return at(t);
  }
  double phi1(const PathState&, std::size_t t, std::size_t r) const override {
    check_pair(r, t, true);
    return 0.0;
  }
  double phi2(const PathState&, std::size_t t, std::size_t v, std::size_t r) const override {
    check_triple(t, v, r);
    return 0.0;
  }
  double mean(std::size_t t) const override { return at(t); }
  double mean_phi1(std::size_t t, std::size_t u) const override {
    check_pair(u, t, true);
    return 0.0;
  }
  double phi2_kernel_integral(const PathState&, std::size_t t, std::size_t r, bool) const override {
    check_pair(r, t, true);
    return 0.0;
  }
  void column(const PathState&, std::size_t t, std::span<ConditionalTerms> out) const override {
    const double y = at(t);
    for (std::size_t r = 0; r <= t; ++r) out[r] = {y, 0.0, 0.0};
  }

  double operator()(double t) const { return g_(t); }

 private:
  double at(std::size_t t) const {
    check_node(t);
    return g_(time(t));
  }

  std::function<double(double)> g_;
  std::string label_;
};

/// Y_t = g(t, B_t) for Borel g of polynomial growth, through the heat semigroup:
/// E^r[Y_t] = P_theta g(t, E^r B_t), phi1 = dx P_theta g K(t,r),
/// phi2 = dxx P_theta g K(t,r) K(t,v), theta = theta(r,t) = (t-r)^{2H}.
class StateIntegrand final : public IntegrandModel {
 public:
  StateIntegrand(std::shared_ptr<const Discretization> disc, StateFunction g,
                 std::string label = "state")
      : IntegrandModel(disc, disc->config().alpha_k()),
        g_(std::move(g)),
        label_(std::move(label)),
        hurst_(disc->config().hurst()),
        rule_(select_order(*disc, g_)) {
    const std::size_t n = this->disc().grid().steps();
    // E[dx P_theta g(t, E^u B_t)] does not depend on u: sigma^2 + theta = t^{2H}.
    regression_.assign(n + 1, 0.0);
    for (std::size_t t = 1; t <= n; ++t) {
      regression_[t] = regression_mean_phi1(g_, time(t), 0.5 * time(t), this->disc().config(), rule_);
    }
  }

  std::string name() const override { return label_; }

  double value(const PathState& p, std::size_t t) const override {
    check_node(t);
    return g_(time(t), p.path.B[t]);
  }
  double cond(const PathState& p, std::size_t r, std::size_t t) const override {
    check_pair(r, t, false);
    if (r == t) return value(p, t);
    return heat_apply(g_, time(t), cond_mean(p, t, r), theta(t - r), rule_);
  }
  double phi1(const PathState& p, std::size_t t, std::size_t r) const override {
    check_pair(r, t, true);
    return heat_dx(g_, time(t), cond_mean(p, t, r), theta(t - r), rule_) * disc().kernel_node(t - r);
  }
  double phi2(const PathState& p, std::size_t t, std::size_t v, std::size_t r) const override {
    check_triple(t, v, r);
    return heat_d2x(g_, time(t), cond_mean(p, t, r), theta(t - r), rule_) *
           disc().kernel_node(t - r) * disc().kernel_node(t - v);
  }
  double mean(std::size_t t) const override {
    check_node(t);
    if (t == 0) return g_(0.0, 0.0);
    return heat_apply(g_, time(t), 0.0, std::pow(time(t), 2.0 * hurst_), rule_);
  }
  double mean_phi1(std::size_t t, std::size_t u) const override {
    check_pair(u, t, true);
    return regression_[t] * disc().kernel_node(t - u);
  }

  /// phi2 is separable in v; int_r^t K(t,v) dK/dt(t,v) dv = H (t-r)^{2H-1} exactly.
  double phi2_kernel_integral(const PathState& p, std::size_t t, std::size_t r,
                              bool absolute) const override {
    check_pair(r, t, true);
    const double d2 = heat_d2x(g_, time(t), cond_mean(p, t, r), theta(t - r), rule_);
    return (absolute ? std::abs(d2) : d2) * disc().kernel_node(t - r) * kernel_square_integral(t - r);
  }

  void column(const PathState& p, std::size_t t, std::span<ConditionalTerms> out) const override {
    check_node(t);
    const double tt = time(t);
    for (std::size_t r = 0; r < t; ++r) {
      const auto hv = heat_all(g_, tt, cond_mean(p, t, r), theta(t - r), rule_);
      const double k = disc().kernel_node(t - r);
      out[r] = {hv.value, hv.dx * k, hv.d2x * k * kernel_square_integral(t - r)};
    }
    out[t] = {value(p, t), 0.0, 0.0};
  }

  const QuadratureRule& rule() const noexcept { return rule_; }
  const StateFunction& function() const noexcept { return g_; }

 private:
  double theta(std::size_t lag) const {
    return std::pow(static_cast<double>(lag) * disc().grid().step(), 2.0 * hurst_);
  }
  double kernel_square_integral(std::size_t lag) const {
    return hurst_ * std::pow(static_cast<double>(lag) * disc().grid().step(), 2.0 * hurst_ - 1.0);
  }
  static double cond_mean(const PathState& p, std::size_t t, std::size_t r) {
    if (!p.fields.empty()) return p.fields.cond_mean(t, r);
    return conditional_mean_B(p.disc(), p.brownian(), r, t);
  }
  // Order 64 unless doubling it moves the semigroup or its derivatives at
  // representative (x, s) by more than 1e-8 relative.
  static std::size_t select_order(const Discretization& disc, const StateFunction& g) {
    const AdaptiveHeat ladder;
    const double T = disc.grid().horizon();
    const double scale = std::pow(T, disc.config().hurst());
    std::size_t order = QuadratureRule::kDefaultOrder;
    for (double s : {scale * scale, 0.25 * scale * scale, 1e-3 * scale * scale}) {
      for (double x : {0.0, scale, -2.0 * scale}) {
        const auto& chosen = ladder.select([&](const QuadratureRule& q) {
          const auto hv = heat_all(g, T, x, s, q);
          return hv.value + std::sqrt(s) * hv.dx + s * hv.d2x;
        });
        order = std::max(order, chosen.order());
      }
    }
    return order;
  }

  StateFunction g_;
  std::string label_;
  double hurst_;
  QuadratureRule rule_;
  std::vector<double> regression_;
};

enum class ZKind { kOne, kCosW };

/// Y_t = int_0^t (t-s)^alpha Z_s dW_s with Z = 1 or Z = cos(W), as a left-point Ito sum.
/// phi1(t,v) = (t-v)^alpha Z_v and phi2(t,v;r) = (t-v)^alpha phi1_Z(v,r), where
/// phi1_Z(v,r) = -sin(W_r) e^{-(v-r)/2} for Z = cos(W).
class FractionalMartingale final : public IntegrandModel {
 public:
  FractionalMartingale(std::shared_ptr<const Discretization> disc, double alpha, ZKind z)
      : IntegrandModel(disc, validated(*disc, alpha)), alpha_(alpha), z_(z) {
    const std::size_t n = this->disc().grid().steps();
    const double d = this->disc().grid().step();
    const auto& pw = product_weights();
    // tail_[m] = sum_{k<m} e^{-k step/2} moment(m-k): the v-integral with A frozen per cell.
    tail_.assign(n + 1, 0.0);
    if (z_ == ZKind::kCosW) {
      for (std::size_t m = 1; m <= n; ++m) {
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) acc += std::exp(-0.5 * d * static_cast<double>(k)) * pw.moment(m - k);
        tail_[m] = acc;
      }
    }
  }

  std::string name() const override { return z_ == ZKind::kOne ? "fracmart_one" : "fracmart_cos"; }
  double alpha() const noexcept { return alpha_; }
  ZKind z_kind() const noexcept { return z_; }

  double value(const PathState& p, std::size_t t) const override { return cond(p, t, t); }
  double cond(const PathState& p, std::size_t r, std::size_t t) const override {
    check_pair(r, t, false);
    const auto& dw = p.brownian().dW;
    const auto& w = p.path.W;
    double acc = 0.0;
    for (std::size_t j = 0; j < r; ++j) acc += power(t - j) * z_at(w, j) * dw[j];
    return acc;
  }
  double phi1(const PathState& p, std::size_t t, std::size_t r) const override {
    check_pair(r, t, true);
    return power(t - r) * z_at(p.path.W, r);
  }
  // Y itself is the left-point sum, so node values are already the cell weights
  double ito_cell_factor(std::size_t) const override { return 1.0; }
  double phi2(const PathState& p, std::size_t t, std::size_t v, std::size_t r) const override {
    check_triple(t, v, r);
    if (z_ == ZKind::kOne) return 0.0;
    const double d = disc().grid().step();
    return power(t - v) * -std::sin(p.path.W[r]) * std::exp(-0.5 * d * static_cast<double>(v - r));
  }
  double mean(std::size_t t) const override {
    check_node(t);
    return 0.0;
  }
  double mean_phi1(std::size_t t, std::size_t u) const override {
    check_pair(u, t, true);
    const double ez = z_ == ZKind::kOne ? 1.0 : std::exp(-0.5 * time(u));
    return power(t - u) * ez;
  }

  double phi2_kernel_integral(const PathState& p, std::size_t t, std::size_t r,
                              bool absolute) const override {
    check_pair(r, t, true);
    if (z_ == ZKind::kOne) return 0.0;
    const double s = -std::sin(p.path.W[r]);
    return (absolute ? std::abs(s) : s) * tail_[t - r];
  }

  void column(const PathState& p, std::size_t t, std::span<ConditionalTerms> out) const override {
    check_node(t);
    const auto& dw = p.brownian().dW;
    const auto& w = p.path.W;
    double acc = 0.0;
    for (std::size_t r = 0; r < t; ++r) {
      const double z = z_at(w, r);
      const double phi2k = z_ == ZKind::kOne ? 0.0 : -std::sin(w[r]) * tail_[t - r];
      out[r] = {acc, power(t - r) * z, phi2k};
      acc += power(t - r) * z * dw[r];
    }
    out[t] = {acc, 0.0, 0.0};
  }

 private:
  static double validated(const Discretization& disc, double alpha) {
    const double floor = 0.5 - disc.config().hurst();
    if (!(alpha > floor)) {
      throw std::invalid_argument("fractional martingale requires alpha > 1/2 - H = " +
                                  std::to_string(floor) + ", got " + std::to_string(alpha));
    }
    return alpha;
  }
  double power(std::size_t lag) const { return product_weights().power(lag); }
  double z_at(const std::vector<double>& w, std::size_t j) const {
    return z_ == ZKind::kOne ? 1.0 : std::cos(w[j]);
  }

  double alpha_;
  ZKind z_;
  std::vector<double> tail_;
};

inline std::unique_ptr<IntegrandModel> make_deterministic(std::shared_ptr<const Discretization> disc,
                                                          std::function<double(double)> g,
                                                          std::string label = "deterministic") {
  return std::make_unique<DeterministicIntegrand>(std::move(disc), std::move(g), std::move(label));
}

inline std::unique_ptr<IntegrandModel> make_state_dependent(std::shared_ptr<const Discretization> disc,
                                                            StateFunction g,
                                                            std::string label = "state") {
  return std::make_unique<StateIntegrand>(std::move(disc), std::move(g), std::move(label));
}

inline std::unique_ptr<IntegrandModel> make_fractional_martingale(
    std::shared_ptr<const Discretization> disc, double alpha, ZKind z) {
  return std::make_unique<FractionalMartingale>(std::move(disc), alpha, z);
}

/// A model picked by name, with the primitive G (G' = g) when Y = g(B) is
/// time-homogeneous, so that int_0^T g(B) d^-B = G(B_T) - G(0).
struct NamedModel {
  std::unique_ptr<IntegrandModel> model;
  std::function<double(double)> primitive;  // empty when no chain-rule oracle exists
};

using ModelParams = std::map<std::string, std::string>;

inline double param_or(const ModelParams& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != it->second.size() || !std::isfinite(v)) {
    throw std::invalid_argument("model parameter " + key + " is not a number: " + it->second);
  }
  return v;
}

/// Names: constant (c), power_t (p), linear, square, cube, cos, fracmart (alpha, z = one|cos).
inline NamedModel make_named_model(const std::string& name, const ModelParams& params,
                                   std::shared_ptr<const Discretization> disc) {
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : params) {
      bool ok = false;
      for (const char* key : keys) ok = ok || k == key;
      if (!ok) throw std::invalid_argument("model " + name + " has no parameter " + k);
    }
  };
  if (name == "constant") {
    allow({"c"});
    const double c = param_or(params, "c", 1.0);
    return {make_deterministic(std::move(disc), [c](double) { return c; }, name),
            [c](double x) { return c * x; }};
  }
  if (name == "power_t") {
    allow({"p"});
    const double p = param_or(params, "p", 1.0);
    if (!(p >= 0.0)) throw std::invalid_argument("power_t requires p >= 0");
    return {make_deterministic(std::move(disc), [p](double t) { return std::pow(t, p); }, name), {}};
  }
  if (name == "linear") {
    allow({});
    return {make_state_dependent(std::move(disc), [](double, double x) { return x; }, name),
            [](double x) { return 0.5 * x * x; }};
  }
  if (name == "square") {
    allow({});
    return {make_state_dependent(std::move(disc), [](double, double x) { return x * x; }, name),
            [](double x) { return x * x * x / 3.0; }};
  }
  if (name == "cube") {
    allow({});
    return {make_state_dependent(std::move(disc), [](double, double x) { return x * x * x; }, name),
            [](double x) { return 0.25 * x * x * x * x; }};
  }
  if (name == "cos") {
    allow({});
    return {make_state_dependent(std::move(disc), [](double, double x) { return std::cos(x); }, name),
            [](double x) { return std::sin(x); }};
  }
  if (name == "fracmart") {
    allow({"alpha", "z"});
    const double alpha = param_or(params, "alpha", 0.0);
    ZKind z = ZKind::kOne;
    if (const auto it = params.find("z"); it != params.end()) {
      if (it->second == "cos") {
        z = ZKind::kCosW;
      } else if (it->second != "one") {
        throw std::invalid_argument("fracmart z must be 'one' or 'cos', got " + it->second);
      }
    }
    return {make_fractional_martingale(std::move(disc), alpha, z), {}};
  }
  throw std::invalid_argument("unknown model: " + name +
                              " (expected constant, power_t, linear, square, cube, cos, fracmart)");
}

}  // namespace rlfbm

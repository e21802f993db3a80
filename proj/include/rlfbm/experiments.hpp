#pragma once

// Monte Carlo drivers. Every driver simulates paths by (seed, path_index),
// stores per-path results by index and reduces them in index order, so the
// numbers do not depend on the worker count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlfbm/integrands.hpp"
#include "rlfbm/integrator.hpp"
#include "rlfbm/kernels.hpp"
#include "rlfbm/parallel.hpp"
#include "rlfbm/paths.hpp"
#include "rlfbm/stats.hpp"

#ifndef RLFBM_VERSION
#define RLFBM_VERSION "0.1.0"
#endif

namespace rlfbm {

inline constexpr const char* kVersion = RLFBM_VERSION;

/// A configuration value out of range; maps to exit code 1 in the CLI.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  double hurst = 0.75;
  double horizon = 1.0;
  std::size_t steps = 512;
  std::size_t ext_steps = 0;  // 0: just enough for the largest eps
  std::size_t paths = 2000;
  std::uint64_t seed = 42;
  std::string model = "linear";
  ModelParams model_params;
  std::vector<std::size_t> eps_ladder{64, 32, 16, 8, 4};
  std::string out;
  std::size_t workers = 1;
  std::uint64_t path_index = 0;  // simulate only

  std::size_t max_eps() const {
    return eps_ladder.empty() ? 0 : *std::max_element(eps_ladder.begin(), eps_ladder.end());
  }
  std::size_t resolved_ext() const { return ext_steps == 0 ? std::max<std::size_t>(max_eps(), 1) : ext_steps; }

  void validate() const {
    try {
      HurstConfig check(hurst, horizon);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
    if (steps == 0) throw ValidationError("steps must be positive");
    if (paths == 0) throw ValidationError("paths must be at least 1");
    for (std::size_t k : eps_ladder) {
      if (k == 0) throw ValidationError("eps ladder entries must be positive multiples of the step");
    }
    if (resolved_ext() < max_eps()) {
      throw ValidationError("ext-steps (" + std::to_string(resolved_ext()) +
                            ") must cover the largest eps (" + std::to_string(max_eps()) + " steps)");
    }
  }

  HurstConfig hurst_config() const { return HurstConfig(hurst, horizon); }
  std::shared_ptr<const Discretization> discretization(std::size_t n) const {
    return make_discretization(hurst_config(), n, resolved_ext() * n / steps);
  }
  std::shared_ptr<const Discretization> discretization() const { return discretization(steps); }

  NamedModel named_model(std::shared_ptr<const Discretization> disc) const {
    try {
      return make_named_model(model, model_params, std::move(disc));
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  }
};

namespace detail {

inline double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline void require_finite(double v, const ExperimentConfig& cfg, std::size_t path_index,
                           const char* what) {
  if (!std::isfinite(v)) {
    throw std::runtime_error(std::string("non-finite ") + what + " at seed " +
                             std::to_string(cfg.seed) + ", path_index " + std::to_string(path_index));
  }
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Controls from the law of the simulated B_T alone: B_T^k, k = 1..4, whose
/// moments follow from Var(B_T) = sum_j w_{nj}^2 step.
struct TerminalControls {
  std::vector<std::vector<double>> samples;
  std::vector<double> means;
};

inline double discrete_variance_B(const Discretization& disc, std::size_t node) {
  double v = 0.0;
  for (std::size_t j = 0; j < node; ++j) v += disc.kernel_avg(node - j) * disc.kernel_avg(node - j);
  return v * disc.grid().step();
}

inline TerminalControls terminal_controls(const Discretization& disc, std::span<const double> b_t,
                                          std::size_t node) {
  const double s2 = discrete_variance_B(disc, node);
  TerminalControls c;
  c.samples.assign(4, std::vector<double>(b_t.size()));
  for (std::size_t i = 0; i < b_t.size(); ++i) {
    const double b = b_t[i];
    c.samples[0][i] = b;
    c.samples[1][i] = b * b;
    c.samples[2][i] = b * b * b;
    c.samples[3][i] = b * b * b * b;
  }
  c.means = {0.0, s2, 0.0, 3.0 * s2 * s2};
  return c;
}

/// Controls from the driving Brownian motion only: block increments X_b on
/// `blocks` equal blocks of [0,T] and all products X_b X_c (b <= c), whose
/// means are 0 and step*block_length*[b == c].
inline TerminalControls brownian_block_controls(const std::vector<std::vector<double>>& dw,
                                                std::size_t steps, double step, std::size_t blocks) {
  if (blocks == 0 || steps % blocks != 0) throw std::invalid_argument("blocks must divide the step count");
  const std::size_t len = steps / blocks;
  const std::size_t n = dw.size();
  std::vector<std::vector<double>> x(blocks, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < steps; ++j) x[j / len][i] += dw[i][j];
  }
  TerminalControls c;
  for (std::size_t b = 0; b < blocks; ++b) {
    c.samples.push_back(x[b]);
    c.means.push_back(0.0);
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t d = b; d < blocks; ++d) {
      std::vector<double> prod(n);
      for (std::size_t i = 0; i < n; ++i) prod[i] = x[b][i] * x[d][i];
      c.samples.push_back(std::move(prod));
      c.means.push_back(b == d ? static_cast<double>(len) * step : 0.0);
    }
  }
  return c;
}

// ---------------------------------------------------------------- identity

struct EpsSummary {
  double eps = 0.0;
  std::size_t eps_steps = 0;
  Moments lhs;
  Moments gap_sq;  // |lhs - rhs_total|^2
};

struct IdentityRow {
  std::uint64_t path_index = 0;
  std::vector<double> lhs;  // one per eps
  double rhs_total = 0.0;
  double rhs_drift = 0.0;
  double rhs_stochastic = 0.0;
  double kcal_energy = 0.0;
  double b_terminal = 0.0;
};

struct IdentityResult {
  std::string model;
  std::vector<EpsSummary> per_eps;
  Moments rhs_total;
  Moments rhs_stochastic;
  Moments kcal_energy;
  ControlledVariance rhs_variance_cv;
  double drift = 0.0;
  bool has_oracle = false;
  Moments oracle_gap_sq;  // |rhs_total - G(B_T)|^2
  std::vector<IdentityRow> rows;
  double runtime_seconds = 0.0;
};

inline IdentityResult run_identity_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto disc = cfg.discretization();
  const auto named = cfg.named_model(disc);
  const IntegrandModel& y = *named.model;
  const RepresentationEvaluator rhs(y);
  std::vector<IdentityRow> rows(cfg.paths);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t i) {
    const auto p = make_path_state(disc, cfg.seed, i);
    const auto v = rhs(p);
    auto& row = rows[i];
    row.path_index = i;
    for (const auto& f : forward_ladder(y, p, cfg.eps_ladder)) {
      detail::require_finite(f.value, cfg, i, "forward estimate");
      row.lhs.push_back(f.value);
    }
    detail::require_finite(v.total, cfg, i, "representation");
    row.rhs_total = v.total;
    row.rhs_drift = v.drift;
    row.rhs_stochastic = v.stochastic;
    row.kcal_energy = v.kcal_energy;
    row.b_terminal = p.path.B[p.steps()];
  });

  IdentityResult out;
  out.model = y.name();
  out.drift = rhs.drift();
  const std::size_t n = rows.size();
  std::vector<double> total(n), stoch(n), energy(n), bt(n);
  for (std::size_t i = 0; i < n; ++i) {
    total[i] = rows[i].rhs_total;
    stoch[i] = rows[i].rhs_stochastic;
    energy[i] = rows[i].kcal_energy;
    bt[i] = rows[i].b_terminal;
  }
  out.rhs_total = moments(total);
  out.rhs_stochastic = moments(stoch);
  out.kcal_energy = moments(energy);
  if (n >= 8) {
    const auto ctl = terminal_controls(*disc, bt, disc->grid().steps());
    out.rhs_variance_cv = controlled_variance(total, ctl.samples, ctl.means);
  } else {
    out.rhs_variance_cv = {out.rhs_total.variance, out.rhs_total.stderr_variance,
                           out.rhs_total.variance, out.rhs_total.stderr_variance};
  }
  for (std::size_t e = 0; e < cfg.eps_ladder.size(); ++e) {
    std::vector<double> lhs(n), gap(n);
    for (std::size_t i = 0; i < n; ++i) {
      lhs[i] = rows[i].lhs[e];
      gap[i] = rows[i].lhs[e] - rows[i].rhs_total;
    }
    out.per_eps.push_back({static_cast<double>(cfg.eps_ladder[e]) * disc->grid().step(),
                           cfg.eps_ladder[e], moments(lhs), square_moments(gap)});
  }
  if (named.primitive) {
    out.has_oracle = true;
    std::vector<double> gap(n);
    for (std::size_t i = 0; i < n; ++i) gap[i] = rows[i].rhs_total - (named.primitive(bt[i]) - named.primitive(0.0));
    out.oracle_gap_sq = square_moments(gap);
  }
  out.rows = std::move(rows);
  out.runtime_seconds = detail::elapsed_seconds(start);
  return out;
}

/// One row per (path, eps): path_index,eps,lhs,rhs_total,rhs_drift.
inline void write_identity_csv(std::ostream& os, const ExperimentConfig& cfg, const IdentityResult& r) {
  os << "path_index,eps,lhs,rhs_total,rhs_drift\r\n";
  const double step = cfg.horizon / static_cast<double>(cfg.steps);
  for (const auto& row : r.rows) {
    for (std::size_t e = 0; e < row.lhs.size(); ++e) {
      os << row.path_index << ',' << detail::fmt(static_cast<double>(cfg.eps_ladder[e]) * step) << ','
         << detail::fmt(row.lhs[e]) << ',' << detail::fmt(row.rhs_total) << ','
         << detail::fmt(row.rhs_drift) << "\r\n";
    }
  }
}

// -------------------------------------------------------------- covariance

struct CovarianceResult {
  std::vector<double> times;
  std::vector<std::vector<double>> empirical;
  std::vector<std::vector<double>> exact;
  std::vector<std::vector<double>> stderr_entry;
  double max_rel_error = 0.0;
  double max_abs_z = 0.0;
  // Var(B_T): plain and with Brownian block controls
  Moments terminal;
  ControlledVariance terminal_variance_cv;
  double runtime_seconds = 0.0;
};

inline CovarianceResult run_covariance_validation(const ExperimentConfig& cfg, std::size_t subset = 8) {
  cfg.validate();
  if (subset == 0 || cfg.steps % subset != 0) {
    throw ValidationError("covariance node subset must divide the step count");
  }
  const auto start = std::chrono::steady_clock::now();
  auto disc = cfg.discretization();
  const std::size_t stride = cfg.steps / subset;
  std::vector<std::vector<double>> b(cfg.paths, std::vector<double>(subset));
  std::vector<std::vector<double>> dw(cfg.paths);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t i) {
    auto path = build_rlfbm(disc, simulate_brownian(disc->grid(), cfg.seed, i));
    for (std::size_t k = 0; k < subset; ++k) b[i][k] = path.B[(k + 1) * stride];
    dw[i] = std::move(path.source.dW);
  });
  CovarianceResult out;
  const auto hc = cfg.hurst_config();
  for (std::size_t k = 0; k < subset; ++k) out.times.push_back(disc->grid().node((k + 1) * stride));
  out.empirical.assign(subset, std::vector<double>(subset));
  out.exact = out.stderr_entry = out.empirical;
  const std::size_t n = cfg.paths;
  std::vector<double> means(subset);
  for (std::size_t k = 0; k < subset; ++k) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = b[i][k];
    means[k] = mean_of(col);
  }
  for (std::size_t a = 0; a < subset; ++a) {
    for (std::size_t c = a; c < subset; ++c) {
      std::vector<double> prod(n);
      for (std::size_t i = 0; i < n; ++i) prod[i] = (b[i][a] - means[a]) * (b[i][c] - means[c]);
      const auto m = moments(prod);
      const double emp = m.mean * static_cast<double>(n) / std::max<double>(1.0, static_cast<double>(n) - 1.0);
      const double ex = covariance_R(hc, out.times[a], out.times[c]);
      out.empirical[a][c] = out.empirical[c][a] = emp;
      out.exact[a][c] = out.exact[c][a] = ex;
      out.stderr_entry[a][c] = out.stderr_entry[c][a] = m.stderr_mean;
      out.max_rel_error = std::max(out.max_rel_error, std::abs(emp - ex) / std::abs(ex));
      if (m.stderr_mean > 0.0) out.max_abs_z = std::max(out.max_abs_z, std::abs(emp - ex) / m.stderr_mean);
    }
  }
  std::vector<double> bt(n);
  for (std::size_t i = 0; i < n; ++i) bt[i] = b[i][subset - 1];
  out.terminal = moments(bt);
  std::size_t blocks = 8;
  while (blocks > 1 && (cfg.steps % blocks != 0 || n < 4 * blocks * blocks)) blocks /= 2;
  const auto ctl = brownian_block_controls(dw, cfg.steps, disc->grid().step(), blocks);
  out.terminal_variance_cv = controlled_variance(bt, ctl.samples, ctl.means);
  out.runtime_seconds = detail::elapsed_seconds(start);
  return out;
}

// ------------------------------------------------------------------ wiener

struct WienerResult {
  std::string model;
  Moments integral;  // wiener_integral over paths
  double hnorm = 0.0;  // |H|-norm of g, the exact variance
  std::vector<EpsSummary> per_eps;  // forward estimate vs wiener integral
  double runtime_seconds = 0.0;
};

inline WienerResult run_wiener(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto disc = cfg.discretization();
  const auto named = cfg.named_model(disc);
  const auto* g = dynamic_cast<const DeterministicIntegrand*>(named.model.get());
  if (g == nullptr) throw ValidationError("wiener needs a deterministic model (constant or power_t)");
  const std::function<double(double)> fn = [g](double t) { return (*g)(t); };
  std::vector<double> wi(cfg.paths);
  std::vector<std::vector<double>> lhs(cfg.paths);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t i) {
    const auto p = make_path_state(disc, cfg.seed, i, false);
    wi[i] = wiener_integral(fn, p);
    detail::require_finite(wi[i], cfg, i, "Wiener integral");
    for (const auto& f : forward_ladder(*g, p, cfg.eps_ladder)) lhs[i].push_back(f.value);
  });
  WienerResult out;
  out.model = g->name();
  out.integral = moments(wi);
  out.hnorm = hnorm_sq(cfg.hurst_config(), fn);
  for (std::size_t e = 0; e < cfg.eps_ladder.size(); ++e) {
    std::vector<double> l(cfg.paths), gap(cfg.paths);
    for (std::size_t i = 0; i < cfg.paths; ++i) {
      l[i] = lhs[i][e];
      gap[i] = lhs[i][e] - wi[i];
    }
    out.per_eps.push_back({static_cast<double>(cfg.eps_ladder[e]) * disc->grid().step(),
                           cfg.eps_ladder[e], moments(l), square_moments(gap)});
  }
  out.runtime_seconds = detail::elapsed_seconds(start);
  return out;
}

// ------------------------------------------------------------- I2 remainder

struct RemainderResult {
  std::vector<double> eps;
  std::vector<Moments> second_moment;  // E|I2(eps)|^2
  std::vector<Moments> abs_moment;     // E|I2(eps)|
  double slope = 0.0;                  // log-log slope of E|I2|^2 in eps
};

inline RemainderResult run_remainder(const ExperimentConfig& cfg) {
  cfg.validate();
  auto disc = cfg.discretization();
  const auto named = cfg.named_model(disc);
  const std::size_t m = cfg.eps_ladder.size();
  std::vector<std::vector<double>> v(m, std::vector<double>(cfg.paths));
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t i) {
    const auto p = make_path_state(disc, cfg.seed, i, false);
    for (std::size_t e = 0; e < m; ++e) v[e][i] = i2_term(*named.model, p, cfg.eps_ladder[e]);
  });
  RemainderResult out;
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> a(cfg.paths);
    for (std::size_t i = 0; i < cfg.paths; ++i) a[i] = std::abs(v[e][i]);
    out.eps.push_back(static_cast<double>(cfg.eps_ladder[e]) * disc->grid().step());
    out.second_moment.push_back(square_moments(v[e]));
    out.abs_moment.push_back(moments(a));
  }
  std::vector<double> y;
  for (const auto& s : out.second_moment) y.push_back(s.mean);
  if (m >= 2) out.slope = loglog_slope(out.eps, y);
  return out;
}

// ------------------------------------------------- martingale consistency

struct ConsistencyResult {
  double time = 0.0;
  double residual_l2 = 0.0;  // batch L2 norm of the representation residual
  double reference_l2 = 0.0;  // batch L2 norm of the represented quantity
  double relative() const {
    return reference_l2 > 0.0 ? residual_l2 / reference_l2 : (residual_l2 == 0.0 ? 0.0 : INFINITY);
  }
};

/// Y_t - E[Y_t] - sum_{j<t} phi1(t,t_j) dW_j over the batch, for each node t,
/// with phi1 taken as its mean over each s-cell.
inline std::vector<ConsistencyResult> first_level_consistency(const IntegrandModel& y, std::size_t paths,
                                                              std::uint64_t seed,
                                                              const std::vector<std::size_t>& nodes,
                                                              std::size_t workers = 1) {
  const auto& disc = y.discretization();
  std::vector<std::vector<double>> res(nodes.size(), std::vector<double>(paths));
  auto ref = res;
  parallel_for(paths, workers, [&](std::size_t i) {
    const auto p = make_path_state(disc, seed, i);
    const auto& dw = p.brownian().dW;
    std::vector<ConditionalTerms> col(p.steps() + 1);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const std::size_t t = nodes[k];
      y.column(p, t, std::span<ConditionalTerms>(col.data(), t + 1));
      double m = 0.0;
      if (!y.deterministic()) {
        for (std::size_t j = 0; j < t; ++j) m += col[j].phi1 * y.ito_cell_factor(t - j) * dw[j];
      }
      const double yt = y.value(p, t);
      res[k][i] = yt - y.mean(t) - m;
      ref[k][i] = yt;
    }
  });
  std::vector<ConsistencyResult> out;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    out.push_back({disc->grid().node(nodes[k]), std::sqrt(square_moments(res[k]).mean),
                   std::sqrt(square_moments(ref[k]).mean)});
  }
  return out;
}

/// phi1(t,s) - E[phi1(t,s)] - sum_{j<s} phi2(t,s;t_j) dW_j over the batch.
inline ConsistencyResult second_level_consistency(const IntegrandModel& y, std::size_t paths,
                                                  std::uint64_t seed, std::size_t t, std::size_t s,
                                                  std::size_t workers = 1) {
  const auto& disc = y.discretization();
  std::vector<double> res(paths), ref(paths);
  const double m = y.mean_phi1(t, s);
  parallel_for(paths, workers, [&](std::size_t i) {
    const auto p = make_path_state(disc, seed, i);
    const auto& dw = p.brownian().dW;
    double acc = 0.0;
    for (std::size_t j = 0; j < s; ++j) acc += y.phi2(p, t, s, j) * dw[j];
    const double f = y.phi1(p, t, s);
    res[i] = f - m - acc;
    ref[i] = f;
  });
  return {disc->grid().node(t), std::sqrt(square_moments(res).mean), std::sqrt(square_moments(ref).mean)};
}

struct NormIdentityResult {
  double phi1_variance = 0.0;  // batch Var phi1(t,s)
  double phi2_energy = 0.0;    // sum_{j<s} E|phi2(t,s;t_j)|^2 step
  double phi1_square = 0.0;    // batch E|phi1(t,s)|^2
  /// Both sides below 1e-20 E|phi1|^2 count as zero: a deterministic phi1
  /// computed by quadrature only varies in the last bits.
  double relative() const {
    const double scale = std::max(std::abs(phi1_variance), std::abs(phi2_energy));
    return scale > 1e-20 * phi1_square ? std::abs(phi1_variance - phi2_energy) / scale : 0.0;
  }
};

inline NormIdentityResult norm_identity(const IntegrandModel& y, std::size_t paths, std::uint64_t seed,
                                        std::size_t t, std::size_t s, std::size_t workers = 1) {
  const auto& disc = y.discretization();
  const double step = disc->grid().step();
  std::vector<double> f(paths), e(paths);
  parallel_for(paths, workers, [&](std::size_t i) {
    const auto p = make_path_state(disc, seed, i);
    f[i] = y.phi1(p, t, s);
    double acc = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      const double v = y.phi2(p, t, s, j);
      acc += v * v;
    }
    e[i] = acc * step;
  });
  return {moments(f).variance, mean_of(e), square_moments(f).mean};
}

// ----------------------------------------------------- assumption checks

struct DiagnosticEntry {
  std::string name;
  double value_n = 0.0;
  double value_2n = 0.0;
  bool stable = true;   // |v_2n - v_n| <= 20% of |v_n|
  bool warning = false;  // |v_2n| > 2 |v_n|: refinement suggests divergence
};

struct DiagnosticsResult {
  std::string model;
  std::size_t steps = 0;
  std::vector<DiagnosticEntry> entries;
  double runtime_seconds = 0.0;
};

namespace detail {

/// int_0^r (x1-s)^{2H-2} (x2-s)^{2H-3} ds by 8-point Gauss-Legendre per cell,
/// accumulated over cells; table[x1][x2][r] for r < min(x1, x2).
class BoldBoundTable {
 public:
  BoldBoundTable(const Discretization& disc) : n_(disc.grid().steps()) {
    static constexpr double kx[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                     0.9602898564975363};
    static constexpr double kw[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                     0.1012285362903763};
    const double h = disc.config().hurst();
    const double d = disc.grid().step();
    const std::size_t w = n_ + 1;
    table_.assign(w * w * w, 0.0);
    for (std::size_t x1 = 1; x1 <= n_; ++x1) {
      for (std::size_t x2 = 1; x2 <= n_; ++x2) {
        const std::size_t lim = std::min(x1, x2);
        double acc = 0.0;
        for (std::size_t r = 0; r < lim; ++r) {
          table_[(x1 * w + x2) * w + r] = acc;
          const double mid = (static_cast<double>(r) + 0.5) * d;
          double cell = 0.0;
          for (int q = 0; q < 4; ++q) {
            for (int sgn = -1; sgn <= 1; sgn += 2) {
              const double s = mid + sgn * kx[q] * 0.5 * d;
              cell += kw[q] * std::pow(x1 * d - s, 2 * h - 2) * std::pow(x2 * d - s, 2 * h - 3);
            }
          }
          acc += 0.5 * d * cell;
        }
      }
    }
  }
  double operator()(std::size_t x1, std::size_t x2, std::size_t r) const {
    const std::size_t w = n_ + 1;
    return table_[(x1 * w + x2) * w + r];
  }

 private:
  std::size_t n_;
  std::vector<double> table_;
};

struct RawDiagnostics {
  double i1 = 0.0, i3 = 0.0, i4 = 0.0, i5 = 0.0, i6 = 0.0;
};

inline RawDiagnostics diagnostics_at(const ExperimentConfig& cfg, std::size_t n, std::size_t paths) {
  auto disc = cfg.discretization(n);
  const auto named = cfg.named_model(disc);
  const IntegrandModel& y = *named.model;
  const double step = disc->grid().step();
  const std::size_t w = n + 1;
  RawDiagnostics out;

  // I5 is deterministic.
  {
    const auto& pw = y.product_weights();
    for (std::size_t s = 1; s <= n; ++s) {
      double inner = 0.0;
      for (std::size_t u = 0; u < s; ++u) inner += std::abs(y.mean_phi1(s, u)) / pw.power(s - u) * pw.moment(s - u);
      out.i5 += outer_weight(s, n, step) * inner;
    }
  }
  if (y.deterministic()) {
    for (std::size_t t = 0; t < n; ++t) out.i1 += y.mean(t) * y.mean(t) * step;
    return out;
  }

  // Paths run in index order and accumulate into shared tables: the tables
  // are cubic in n, so per-path copies are not affordable.
  const double np = static_cast<double>(paths);
  std::vector<double> phi_sq(w * w * w, 0.0);   // E[phi1(x1,r)^2 phi1(x2,r)^2], x1 <= x2
  std::vector<double> phi2_sq(w * w * w, 0.0);  // E[phi2(x,v;j)^2]
  std::vector<double> phi(w * w, 0.0);
  for (std::size_t i = 0; i < paths; ++i) {
    const auto p = make_path_state(disc, cfg.seed, i);
    double i1 = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = y.value(p, t);
      i1 += v * v * step;
    }
    out.i1 += i1 / np;
    for (std::size_t x = 1; x <= n; ++x) {
      for (std::size_t r = 0; r < x; ++r) phi[x * w + r] = y.phi1(p, x, r);
    }
    for (std::size_t x1 = 1; x1 <= n; ++x1) {
      for (std::size_t x2 = x1; x2 <= n; ++x2) {
        for (std::size_t r = 0; r < x1; ++r) {
          const double a = phi[x1 * w + r] * phi[x2 * w + r];
          phi_sq[(x1 * w + x2) * w + r] += a * a / np;
        }
      }
    }
    double i4 = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double inner = 0.0;
      for (std::size_t t = r + 1; t <= n; ++t) inner += outer_weight(t, n, step) * y.phi2_kernel_integral(p, t, r, true);
      i4 += inner * inner * step;
    }
    out.i4 += i4 / np;
    for (std::size_t x = 1; x <= n; ++x) {
      for (std::size_t v = 0; v < x; ++v) {
        for (std::size_t j = 0; j <= v; ++j) {
          const double f = y.phi2(p, x, v, j);
          phi2_sq[(x * w + v) * w + j] += f * f / np;
        }
      }
    }
  }

  // I3 with p = q = 2 and the bold-D majorant.
  const BoldBoundTable bound(*disc);
  for (std::size_t x1 = 1; x1 <= n; ++x1) {
    for (std::size_t x2 = 1; x2 <= n; ++x2) {
      const std::size_t lo = std::min(x1, x2), hi = std::max(x1, x2);
      double inner = 0.0;
      for (std::size_t r = 0; r < lo; ++r) {
        inner += std::sqrt(phi_sq[(lo * w + hi) * w + r]) * std::sqrt(bound(x1, x2, r)) * step;
      }
      out.i3 += outer_weight(x1, n, step) * outer_weight(x2, n, step) * inner;
    }
  }

  // I6: ||E^{m}[phi1bar(x,v)]||^2 = sum_{j<m} E|phi2(x,v;j)|^2 step, m = min(v1,v2).
  std::vector<double> cum(w * w * w, 0.0);  // cum(x,v,m) = sum_{j<m}
  for (std::size_t x = 1; x <= n; ++x) {
    for (std::size_t v = 0; v < x; ++v) {
      double acc = 0.0;
      for (std::size_t m = 0; m <= v; ++m) {
        cum[(x * w + v) * w + m] = acc;
        acc += phi2_sq[(x * w + v) * w + m] * step;
      }
    }
  }
  for (std::size_t x1 = 1; x1 <= n; ++x1) {
    for (std::size_t x2 = 1; x2 <= n; ++x2) {
      double acc = 0.0;
      for (std::size_t v1 = 0; v1 < x1; ++v1) {
        for (std::size_t v2 = 0; v2 < x2; ++v2) {
          const std::size_t m = std::min(v1, v2);
          acc += std::sqrt(cum[(x1 * w + v1) * w + m] * cum[(x2 * w + v2) * w + m]) *
                 disc->dkernel_avg(x1 - v1) * disc->dkernel_avg(x2 - v2);
        }
      }
      out.i6 += outer_weight(x1, n, step) * outer_weight(x2, n, step) * acc * step * step;
    }
  }
  return out;
}

}  // namespace detail

/// Discrete counterparts of the integrability assumptions at n and 2n steps.
/// Cost is O(n^4) per batch and O(n^3) memory; steps is capped at 64.
inline DiagnosticsResult run_assumption_diagnostics(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.steps > 64) throw ValidationError("diagnostics are quartic in the step count; use steps <= 64");
  const auto start = std::chrono::steady_clock::now();
  const auto a = detail::diagnostics_at(cfg, cfg.steps, cfg.paths);
  const auto b = detail::diagnostics_at(cfg, 2 * cfg.steps, cfg.paths);
  DiagnosticsResult out;
  out.model = cfg.model;
  out.steps = cfg.steps;
  auto add = [&](const char* name, double vn, double v2n) {
    DiagnosticEntry e{name, vn, v2n, true, false};
    const double scale = std::abs(vn);
    e.stable = scale == 0.0 ? v2n == 0.0 : std::abs(v2n - vn) <= 0.2 * scale;
    e.warning = std::abs(v2n) > 2.0 * scale && v2n != 0.0;
    if (!std::isfinite(vn) || !std::isfinite(v2n)) {
      e.stable = false;
      e.warning = true;
    }
    out.entries.push_back(e);
  };
  add("I1", a.i1, b.i1);
  add("I3", a.i3, b.i3);
  add("I4", a.i4, b.i4);
  add("I5", a.i5, b.i5);
  add("I6", a.i6, b.i6);
  out.runtime_seconds = detail::elapsed_seconds(start);
  return out;
}

// ------------------------------------------------------- isometry expansion

struct IsometryResult {
  Moments lhs;         // sum_r step |sum_{t>r} w_t phi1(t,r) D_{r,t}B|^2
  Moments rhs;         // the three-term expansion, per path
  Moments difference;  // lhs - rhs, paired per path
  Moments rhs_kernel_term;
  Moments rhs_bold_terms;
  double runtime_seconds = 0.0;
};

inline IsometryResult run_isometry_expansion(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.steps > 128) throw ValidationError("isometry expansion is cubic per path; use steps <= 128");
  const auto start = std::chrono::steady_clock::now();
  auto disc = cfg.discretization();
  const auto named = cfg.named_model(disc);
  const IntegrandModel& y = *named.model;
  const std::size_t n = cfg.steps;
  const std::size_t w = n + 1;
  const double step = disc->grid().step();
  std::vector<double> lhs(cfg.paths), kern(cfg.paths), bold(cfg.paths);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t i) {
    const auto p = make_path_state(disc, cfg.seed, i);
    const auto& dw = p.brownian().dW;
    std::vector<double> c(w * w, 0.0);  // w_x phi1(x, r)
    for (std::size_t x = 1; x <= n; ++x) {
      const double wx = detail::outer_weight(x, n, step);
      for (std::size_t r = 0; r < x; ++r) c[x * w + r] = wx * y.phi1(p, x, r);
    }
    // R2(x1,x2) = sum_{j<r} a1 a2 step and BD(x1,x2) = sum_{j<r} D_{j,x1} a2 dW_j, advanced in r.
    std::vector<double> r2(w * w, 0.0), bd(w * w, 0.0);
    double l = 0.0, k = 0.0, b = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double inner = 0.0;
      for (std::size_t x = r + 1; x <= n; ++x) inner += c[x * w + r] * p.fields.nelson(x, r);
      l += inner * inner * step;
      for (std::size_t x1 = r + 1; x1 <= n; ++x1) {
        const double c1 = c[x1 * w + r];
        if (c1 == 0.0) continue;
        for (std::size_t x2 = r + 1; x2 <= n; ++x2) {
          const double cc = c1 * c[x2 * w + r] * step;
          k += cc * r2[x1 * w + x2];
          b += cc * (bd[x1 * w + x2] + bd[x2 * w + x1]);
        }
      }
      for (std::size_t x1 = r + 1; x1 <= n; ++x1) {
        const double a1 = disc->dkernel_avg(x1 - r);
        const double d1 = p.fields.nelson(x1, r);
        for (std::size_t x2 = r + 1; x2 <= n; ++x2) {
          const double a2 = disc->dkernel_avg(x2 - r);
          r2[x1 * w + x2] += a1 * a2 * step;
          bd[x1 * w + x2] += d1 * a2 * dw[r];
        }
      }
    }
    lhs[i] = l;
    kern[i] = k;
    bold[i] = b;
  });
  IsometryResult out;
  std::vector<double> rhs(cfg.paths), diff(cfg.paths);
  for (std::size_t i = 0; i < cfg.paths; ++i) {
    rhs[i] = kern[i] + bold[i];
    diff[i] = lhs[i] - rhs[i];
  }
  out.lhs = moments(lhs);
  out.rhs = moments(rhs);
  out.difference = moments(diff);
  out.rhs_kernel_term = moments(kern);
  out.rhs_bold_terms = moments(bold);
  out.runtime_seconds = detail::elapsed_seconds(start);
  return out;
}

// -------------------------------------------------------------------- sweep

struct SweepLevel {
  std::size_t steps = 0;
  Moments oracle_gap_sq;    // |rhs_total - G(B_T)|^2
  Moments forward_gap_sq;   // |forward(eps_min) - rhs_total|^2
  std::size_t eps_steps = 0;
};

struct SweepResult {
  std::string model;
  std::vector<SweepLevel> levels;  // coarse to fine
  double runtime_seconds = 0.0;
};

/// The identity at n/4, n/2 and n on the same Brownian motion, against the
/// chain-rule primitive G(B_T) - G(0).
inline SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t levels = 3) {
  cfg.validate();
  const std::size_t top = std::size_t{1} << (levels - 1);
  if (cfg.steps % top != 0 || cfg.resolved_ext() % top != 0) {
    throw ValidationError("steps and ext-steps must be divisible by " + std::to_string(top) + " for the sweep");
  }
  const auto start = std::chrono::steady_clock::now();
  struct Level {
    std::shared_ptr<const Discretization> disc;
    NamedModel model;
    std::unique_ptr<RepresentationEvaluator> rhs;
    std::size_t factor = 1;
    std::size_t eps = 1;
  };
  std::vector<Level> lv;
  for (std::size_t k = 0; k < levels; ++k) {
    const std::size_t factor = top >> k;
    Level l;
    l.factor = factor;
    l.disc = cfg.discretization(cfg.steps / factor);
    l.model = cfg.named_model(l.disc);
    if (!l.model.primitive) throw ValidationError("sweep needs a model with a chain-rule primitive");
    l.rhs = std::make_unique<RepresentationEvaluator>(*l.model.model);
    const std::size_t emin = cfg.eps_ladder.empty() ? 1 : *std::min_element(cfg.eps_ladder.begin(), cfg.eps_ladder.end());
    l.eps = std::clamp<std::size_t>(emin, 1, l.disc->grid().ext_steps());
    lv.push_back(std::move(l));
  }
  std::vector<std::vector<double>> oracle(levels, std::vector<double>(cfg.paths));
  auto fwd = oracle;
  const auto fine = lv.back().disc;
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t i) {
    const auto base = simulate_brownian(fine->grid(), cfg.seed, i);
    for (std::size_t k = 0; k < levels; ++k) {
      const auto& l = lv[k];
      const auto p = make_path_state(l.disc, l.factor == 1 ? base : base.coarsened(l.factor));
      const auto v = (*l.rhs)(p);
      detail::require_finite(v.total, cfg, i, "representation");
      const double bt = p.path.B[p.steps()];
      oracle[k][i] = v.total - (l.model.primitive(bt) - l.model.primitive(0.0));
      fwd[k][i] = forward_estimate(*l.model.model, p, l.eps).value - v.total;
    }
  });
  SweepResult out;
  out.model = cfg.model;
  for (std::size_t k = 0; k < levels; ++k) {
    out.levels.push_back({cfg.steps / lv[k].factor, square_moments(oracle[k]), square_moments(fwd[k]), lv[k].eps});
  }
  out.runtime_seconds = detail::elapsed_seconds(start);
  return out;
}

}  // namespace rlfbm

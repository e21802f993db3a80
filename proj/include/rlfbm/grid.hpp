#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlfbm/hurst.hpp"
#include "rlfbm/kernels.hpp"

namespace rlfbm {

/// Uniform grid on [0, T + ext*step] with step = T/n. Node i sits at i*step.
class SimulationGrid {
 public:
  SimulationGrid(double horizon, std::size_t steps, std::size_t ext_steps)
      : horizon_(horizon), steps_(steps), ext_steps_(ext_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw std::invalid_argument("grid horizon must be positive");
    }
    if (steps == 0) throw std::invalid_argument("grid needs at least one step on [0,T]");
    step_ = horizon / static_cast<double>(steps);
  }

  double horizon() const noexcept { return horizon_; }
  /// Steps on [0,T]; node steps() is T.
  std::size_t steps() const noexcept { return steps_; }
  std::size_t ext_steps() const noexcept { return ext_steps_; }
  std::size_t cells() const noexcept { return steps_ + ext_steps_; }
  std::size_t nodes() const noexcept { return steps_ + ext_steps_ + 1; }
  double step() const noexcept { return step_; }
  double node(std::size_t i) const noexcept { return static_cast<double>(i) * step_; }

  /// Converts eps to a whole number of steps; rejects non-multiples and eps beyond the extension.
  std::size_t eps_steps(double eps) const {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be positive");
    const double ratio = eps / step_;
    const double k = std::round(ratio);
    if (k < 1.0 || std::abs(ratio - k) > 1e-9 * std::max(1.0, ratio)) {
      throw std::invalid_argument("eps must be a positive integer multiple of the grid step, got " +
                                  std::to_string(ratio) + " steps");
    }
    return check_eps_steps(static_cast<std::size_t>(k));
  }

  std::size_t check_eps_steps(std::size_t k) const {
    if (k == 0) throw std::invalid_argument("eps must be at least one grid step");
    if (k > ext_steps_) {
      throw std::invalid_argument("eps of " + std::to_string(k) +
                                  " steps exceeds the grid extension of " +
                                  std::to_string(ext_steps_) + " steps");
    }
    return k;
  }

  bool operator==(const SimulationGrid&) const = default;

 private:
  double horizon_;
  std::size_t steps_;
  std::size_t ext_steps_;
  double step_ = 0.0;
};

/// Kernel moments on a uniform grid, tabulated by lag m = (row node) - (column cell).
///
/// Since K(t,u) depends on t - u only, every Volterra weight is a function of
/// the lag; the tables hold the exact cell moments used by the simulation and
/// by the product-integration rules.
class Discretization {
 public:
  Discretization(HurstConfig cfg, SimulationGrid grid) : cfg_(cfg), grid_(grid) {
    if (std::abs(cfg.horizon() - grid.horizon()) > 1e-12 * cfg.horizon()) {
      throw std::invalid_argument("grid horizon does not match the Hurst configuration");
    }
    const std::size_t n = grid_.cells();
    const double d = grid_.step();
    kernel_avg_.assign(n + 1, 0.0);
    dkernel_avg_.assign(n + 1, 0.0);
    kernel_node_.assign(n + 2, 0.0);
    t_moment_.assign(n + 1, 0.0);
    for (std::size_t m = 1; m <= n; ++m) {
      const double t = static_cast<double>(m) * d;
      kernel_avg_[m] = cell_integral_K(cfg_, t, 0.0, d) / d;
      dkernel_avg_[m] = cell_integral_dKdt(cfg_, t, 0.0, d) / d;
    }
    for (std::size_t m = 0; m <= n + 1; ++m) {
      kernel_node_[m] = kernel_K(cfg_, static_cast<double>(m) * d, 0.0);
    }
    for (std::size_t m = 0; m <= n; ++m) t_moment_[m] = kernel_node_[m + 1] - kernel_node_[m];
  }

  const HurstConfig& config() const noexcept { return cfg_; }
  const SimulationGrid& grid() const noexcept { return grid_; }

  /// (1/step) int over the cell [t_j, t_{j+1}] of K(t_i, .), lag m = i - j >= 1.
  double kernel_avg(std::size_t lag) const { return kernel_avg_[lag]; }
  /// (1/step) int over the cell [t_j, t_{j+1}] of dK/dt(t_i, .), lag m = i - j >= 1.
  double dkernel_avg(std::size_t lag) const { return dkernel_avg_[lag]; }
  /// K(t_i, t_j) with lag m = i - j.
  double kernel_node(std::size_t lag) const { return kernel_node_[lag]; }
  /// int_{t_{r+m}}^{t_{r+m+1}} dK/dt(t, t_r) dt = K(t_{r+m+1}, t_r) - K(t_{r+m}, t_r).
  double t_moment(std::size_t lag) const { return t_moment_[lag]; }

 private:
  HurstConfig cfg_;
  SimulationGrid grid_;
  std::vector<double> kernel_avg_;
  std::vector<double> dkernel_avg_;
  std::vector<double> kernel_node_;
  std::vector<double> t_moment_;
};

inline std::shared_ptr<const Discretization> make_discretization(const HurstConfig& cfg,
                                                                 std::size_t steps,
                                                                 std::size_t ext_steps) {
  return std::make_shared<const Discretization>(cfg,
                                                SimulationGrid(cfg.horizon(), steps, ext_steps));
}

}  // namespace rlfbm

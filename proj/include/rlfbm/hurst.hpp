#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace rlfbm {

/// Hurst index and horizon of a Riemann-Liouville fractional Brownian motion.
///
/// The kernel is K(t,s) = c_K (t-s)^{alpha_k} for s < t with c_K = sqrt(2H)
/// and alpha_k = H - 1/2. Only the long-memory regime 1/2 < H < 1 is
/// supported; every kernel identity used downstream relies on alpha_k > 0.
class HurstConfig {
 public:
  HurstConfig(double hurst, double horizon) : hurst_(hurst), horizon_(horizon) {
    if (!(hurst > 0.5 && hurst < 1.0)) {
      throw std::invalid_argument("Hurst index must lie in the open interval (1/2, 1), got " +
                                  std::to_string(hurst));
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw std::invalid_argument("time horizon must be positive and finite, got " +
                                  std::to_string(horizon));
    }
    alpha_k_ = hurst_ - 0.5;
    c_k_ = std::sqrt(2.0 * hurst_);
  }

  double hurst() const noexcept { return hurst_; }
  double horizon() const noexcept { return horizon_; }
  /// Kernel exponent H - 1/2.
  double alpha_k() const noexcept { return alpha_k_; }
  /// Kernel prefactor sqrt(2H).
  double c_k() const noexcept { return c_k_; }
  /// Prefactor of dK/dt, sqrt(2H)(H - 1/2).
  double c_dk() const noexcept { return c_k_ * alpha_k_; }

 private:
  double hurst_;
  double horizon_;
  double alpha_k_;
  double c_k_;
};

}  // namespace rlfbm

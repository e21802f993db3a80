#pragma once

// Brownian increments, the Volterra construction of B, and the adapted
// fields read off the same increments: conditional means E^r[B_t], Nelson
// derivatives D_{r,t}B and their eps-regularizations, and the bold D field.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlfbm/grid.hpp"
#include "rlfbm/rng.hpp"

namespace rlfbm {

struct BrownianPath {
  SimulationGrid grid;
  std::vector<double> dW;  // one increment per cell, length grid.cells()
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  /// W at every node, W_0 = 0.
  std::vector<double> levels() const {
    std::vector<double> w(dW.size() + 1, 0.0);
    for (std::size_t j = 0; j < dW.size(); ++j) w[j + 1] = w[j] + dW[j];
    return w;
  }

  /// The same Brownian motion sampled on a grid `factor` times coarser.
  BrownianPath coarsened(std::size_t factor) const {
    if (factor == 0 || grid.steps() % factor != 0 || grid.ext_steps() % factor != 0) {
      throw std::invalid_argument("coarsening factor must divide both the step and extension counts");
    }
    BrownianPath out{SimulationGrid(grid.horizon(), grid.steps() / factor, grid.ext_steps() / factor),
                     {}, seed, path_index};
    out.dW.assign(out.grid.cells(), 0.0);
    for (std::size_t j = 0; j < dW.size(); ++j) out.dW[j / factor] += dW[j];
    return out;
  }
};

/// Increments i.i.d. N(0, step), a pure function of (seed, path_index).
inline BrownianPath simulate_brownian(const SimulationGrid& grid, std::uint64_t seed,
                                      std::uint64_t path_index) {
  BrownianPath path{grid, std::vector<double>(grid.cells()), seed, path_index};
  NormalStream normals(seed, path_index);
  const double scale = std::sqrt(grid.step());
  for (double& dw : path.dW) dw = scale * normals.next();
  return path;
}

struct RlfbmPath {
  std::shared_ptr<const Discretization> disc;
  BrownianPath source;
  std::vector<double> W;  // Brownian levels at nodes
  std::vector<double> B;  // RLFBM at nodes, B[0] = 0

  const SimulationGrid& grid() const { return disc->grid(); }
};

namespace detail {

inline void check_compatible(const Discretization& disc, const BrownianPath& w) {
  if (!(disc.grid() == w.grid) || w.dW.size() != w.grid.cells()) {
    throw std::invalid_argument("Brownian path does not live on the discretization grid");
  }
}

}  // namespace detail

/// B_{t_i} = sum_{j<i} w_{ij} dW_j with cell-averaged Volterra weights.
inline RlfbmPath build_rlfbm(std::shared_ptr<const Discretization> disc, BrownianPath w) {
  detail::check_compatible(*disc, w);
  const std::size_t nodes = w.grid.nodes();
  std::vector<double> b(nodes, 0.0);
  for (std::size_t i = 1; i < nodes; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < i; ++j) acc += disc->kernel_avg(i - j) * w.dW[j];
    b[i] = acc;
  }
  auto levels = w.levels();
  return RlfbmPath{std::move(disc), std::move(w), std::move(levels), std::move(b)};
}

/// E^r[B_t] = sum_{j<r} w_{tj} dW_j.
inline double conditional_mean_B(const Discretization& disc, const BrownianPath& w,
                                 std::size_t r_idx, std::size_t t_idx) {
  detail::check_compatible(disc, w);
  if (r_idx > t_idx) throw std::invalid_argument("conditional mean requires r <= t");
  if (t_idx >= w.grid.nodes()) throw std::out_of_range("node index beyond the grid");
  double acc = 0.0;
  for (std::size_t j = 0; j < r_idx; ++j) acc += disc.kernel_avg(t_idx - j) * w.dW[j];
  return acc;
}

/// D_{r,t}B = sum_{j<r} (cell moment of dK/dt(t,.))/step dW_j, strictly off the diagonal.
inline double nelson_derivative(const Discretization& disc, const BrownianPath& w,
                                std::size_t r_idx, std::size_t t_idx) {
  detail::check_compatible(disc, w);
  if (r_idx >= t_idx) throw std::domain_error("Nelson derivative does not exist for r >= t");
  if (t_idx >= w.grid.nodes()) throw std::out_of_range("node index beyond the grid");
  double acc = 0.0;
  for (std::size_t j = 0; j < r_idx; ++j) acc += disc.dkernel_avg(t_idx - j) * w.dW[j];
  return acc;
}

/// D^eps_{r,t}B = (1/eps) E^r[B_{t+eps} - B_t] with eps = eps_steps * step.
inline double nelson_eps(const Discretization& disc, const BrownianPath& w, std::size_t r_idx,
                         std::size_t t_idx, std::size_t eps_steps) {
  detail::check_compatible(disc, w);
  if (r_idx >= t_idx) throw std::domain_error("regularized Nelson derivative requires r < t");
  disc.grid().check_eps_steps(eps_steps);
  if (t_idx + eps_steps >= w.grid.nodes()) {
    throw std::out_of_range("t + eps lies beyond the extended grid");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < r_idx; ++j) {
    acc += (disc.kernel_avg(t_idx + eps_steps - j) - disc.kernel_avg(t_idx - j)) * w.dW[j];
  }
  return acc / (static_cast<double>(eps_steps) * disc.grid().step());
}

/// Left-point Ito sum for int_0^r D_{s,x1}B dK/dx2(x2,s) dW_s.
inline double bold_D_field(const Discretization& disc, const BrownianPath& w, std::size_t x1_idx,
                           std::size_t x2_idx, std::size_t r_idx) {
  detail::check_compatible(disc, w);
  if (x1_idx == x2_idx) throw std::domain_error("bold D field is undefined for x1 = x2");
  if (r_idx >= std::min(x1_idx, x2_idx)) {
    throw std::invalid_argument("bold D field requires r < min(x1, x2)");
  }
  if (std::max(x1_idx, x2_idx) >= w.grid.nodes()) throw std::out_of_range("node index beyond the grid");
  double nelson = 0.0;  // D_{j,x1}B, built up alongside the outer sum
  double acc = 0.0;
  for (std::size_t j = 0; j < r_idx; ++j) {
    acc += nelson * disc.dkernel_avg(x2_idx - j) * w.dW[j];
    nelson += disc.dkernel_avg(x1_idx - j) * w.dW[j];
  }
  return acc;
}

/// All conditional means E^r[B_t] (0 <= r <= t <= n) and Nelson derivatives
/// D_{r,t}B (0 <= r < t <= n) of one path, by running sums per row t.
class PathFields {
 public:
  PathFields() = default;

  PathFields(const Discretization& disc, const BrownianPath& w) : n_(disc.grid().steps()) {
    detail::check_compatible(disc, w);
    const std::size_t width = n_ + 1;
    cond_.assign(width * width, 0.0);
    nelson_.assign(width * width, 0.0);
    for (std::size_t t = 0; t <= n_; ++t) {
      double m = 0.0;
      double d = 0.0;
      double* crow = cond_.data() + t * width;
      double* drow = nelson_.data() + t * width;
      for (std::size_t r = 0; r < t; ++r) {
        crow[r] = m;
        drow[r] = d;
        m += disc.kernel_avg(t - r) * w.dW[r];
        d += disc.dkernel_avg(t - r) * w.dW[r];
      }
      crow[t] = m;
    }
  }

  bool empty() const noexcept { return cond_.empty(); }
  std::size_t steps() const noexcept { return n_; }
  /// E^r[B_t].
  double cond_mean(std::size_t t, std::size_t r) const { return cond_[t * (n_ + 1) + r]; }
  /// D_{r,t}B, r < t.
  double nelson(std::size_t t, std::size_t r) const { return nelson_[t * (n_ + 1) + r]; }
  const double* cond_row(std::size_t t) const { return cond_.data() + t * (n_ + 1); }
  const double* nelson_row(std::size_t t) const { return nelson_.data() + t * (n_ + 1); }

 private:
  std::size_t n_ = 0;
  std::vector<double> cond_;
  std::vector<double> nelson_;
};

/// A simulated path together with its adapted fields; the unit of per-path work.
struct PathState {
  RlfbmPath path;
  PathFields fields;

  const Discretization& disc() const { return *path.disc; }
  const BrownianPath& brownian() const { return path.source; }
  std::size_t steps() const { return path.disc->grid().steps(); }
};

inline PathState make_path_state(std::shared_ptr<const Discretization> disc, BrownianPath w,
                                 bool with_fields = true) {
  PathState state{build_rlfbm(disc, std::move(w)), {}};
  if (with_fields) state.fields = PathFields(*state.path.disc, state.path.source);
  return state;
}

inline PathState make_path_state(std::shared_ptr<const Discretization> disc, std::uint64_t seed,
                                 std::uint64_t path_index, bool with_fields = true) {
  auto w = simulate_brownian(disc->grid(), seed, path_index);
  return make_path_state(std::move(disc), std::move(w), with_fields);
}

/// One row per node: t, W, B.
inline void write_path_csv(std::ostream& os, const RlfbmPath& path) {
  os << "t,W,B\n";
  char buf[96];
  for (std::size_t i = 0; i < path.B.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", path.grid().node(i), path.W[i], path.B[i]);
    os << buf;
  }
}

}  // namespace rlfbm

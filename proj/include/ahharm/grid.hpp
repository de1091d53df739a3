#pragma once

// Tensor-product slab grid: periodic boundary lattice x radial geometric ladder.

#include "ahharm/core.hpp"

#include <string>
#include <vector>

namespace ahharm {

/// 3-point Lagrange stencil at one radial level (first and second derivative weights).
struct RadialStencil {
  std::array<int, 3> level{};
  std::array<double, 3> d1{};
  std::array<double, 3> d2{};
};

/// Exact Taylor weights for d/dt and d^2/dt^2 at t from values at three distinct nodes.
inline RadialStencil three_point_stencil(double t, std::array<int, 3> levels, std::array<double, 3> nodes) {
  RadialStencil s;
  s.level = levels;
  for (int i = 0; i < 3; ++i) {
    const double a = nodes[(i + 1) % 3], b = nodes[(i + 2) % 3];
    const double den = (nodes[i] - a) * (nodes[i] - b);
    s.d1[i] = (2.0 * t - a - b) / den;
    s.d2[i] = 2.0 / den;
  }
  return s;
}

class SlabGrid {
 public:
  SlabGrid() = default;

  /// Ladder r_k = r_max q^k, k = 0..levels-1, with q chosen so r_{levels-1} = r_min.
  static SlabGrid geometric(std::vector<double> lattice, std::vector<int> nodes, double r_max, double r_min,
                            int levels) {
    if (levels < 3) throw ConfigError("slab grid needs at least 3 radial levels");
    if (!(r_min > 0.0) || !(r_max > r_min)) throw ConfigError("slab grid needs 0 < r_min < r_max");
    const double q = std::pow(r_min / r_max, 1.0 / (levels - 1));
    std::vector<double> radii(levels);
    for (int k = 0; k < levels; ++k) radii[k] = r_max * std::pow(q, k);
    radii.back() = r_min;
    return SlabGrid(std::move(lattice), std::move(nodes), std::move(radii));
  }

  SlabGrid(std::vector<double> lattice, std::vector<int> nodes, std::vector<double> radii)
      : lattice_(std::move(lattice)), nodes_(std::move(nodes)), radii_(std::move(radii)) {
    validate();
    boundary_size_ = 1;
    for (int n : nodes_) boundary_size_ *= static_cast<std::size_t>(n);
    neighbors_.resize(boundary_size_ * dim() * 2);
    for (std::size_t j = 0; j < boundary_size_; ++j)
      for (int a = 0; a < dim(); ++a) {
        neighbors_[(j * dim() + a) * 2] = compute_neighbor(j, a, -1);
        neighbors_[(j * dim() + a) * 2 + 1] = compute_neighbor(j, a, 1);
      }
    stencils_.resize(radii_.size());
    const int last = levels() - 1;
    for (int k = 0; k <= last; ++k) {
      const int c = std::clamp(k, 1, last - 1);
      const std::array<int, 3> lv{c - 1, c, c + 1};
      stencils_[k] = three_point_stencil(radii_[k], lv, {radii_[lv[0]], radii_[lv[1]], radii_[lv[2]]});
    }
  }

  int dim() const { return static_cast<int>(lattice_.size()); }
  int levels() const { return static_cast<int>(radii_.size()); }
  const std::vector<double>& lattice() const { return lattice_; }
  const std::vector<int>& nodes() const { return nodes_; }
  const std::vector<double>& radii() const { return radii_; }
  double radius(int k) const { return radii_[k]; }
  double r_max() const { return radii_.front(); }
  double r_min() const { return radii_.back(); }
  double ratio() const { return radii_[1] / radii_[0]; }
  double spacing(int axis) const { return lattice_[axis] / nodes_[axis]; }
  std::size_t boundary_size() const { return boundary_size_; }
  std::size_t size() const { return boundary_size_ * radii_.size(); }
  std::size_t index(int level, std::size_t j) const { return static_cast<std::size_t>(level) * boundary_size_ + j; }
  const RadialStencil& stencil(int level) const { return stencils_[level]; }
  bool is_wall(int level) const { return level == 0 || level == levels() - 1; }

  std::array<int, kMaxBoundaryDim> multi_index(std::size_t j) const {
    std::array<int, kMaxBoundaryDim> idx{};
    for (int a = dim() - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(j % nodes_[a]);
      j /= nodes_[a];
    }
    return idx;
  }

  std::size_t flat_index(const std::array<int, kMaxBoundaryDim>& idx) const {
    std::size_t j = 0;
    for (int a = 0; a < dim(); ++a) j = j * nodes_[a] + idx[a];
    return j;
  }

  Vec boundary_point(std::size_t j) const {
    const auto idx = multi_index(j);
    Vec x(dim());
    for (int a = 0; a < dim(); ++a) x[a] = idx[a] * spacing(a);
    return x;
  }

  Vec chart_point(int level, std::size_t j) const {
    Vec p(dim() + 1);
    p.head(dim()) = boundary_point(j);
    p[dim()] = radii_[level];
    return p;
  }

  /// Periodic neighbour along an axis; `wrap` is the number of periods crossed (-1, 0, +1).
  struct Neighbor {
    std::size_t j;
    int wrap;
  };
  Neighbor neighbor(std::size_t j, int axis, int step) const {
    if (step == 1 || step == -1) return neighbors_[(j * dim() + axis) * 2 + (step > 0)];
    return compute_neighbor(j, axis, step);
  }

 private:
  Neighbor compute_neighbor(std::size_t j, int axis, int step) const {
    auto idx = multi_index(j);
    int v = idx[axis] + step;
    int wrap = 0;
    while (v < 0) v += nodes_[axis], --wrap;
    while (v >= nodes_[axis]) v -= nodes_[axis], ++wrap;
    idx[axis] = v;
    return {flat_index(idx), wrap};
  }

 public:

  /// Level whose radius equals r to relative tolerance, or -1.
  int level_of(double r, double rel_tol = 1e-9) const {
    for (int k = 0; k < levels(); ++k)
      if (std::abs(radii_[k] - r) <= rel_tol * r) return k;
    return -1;
  }

  /// Level with radius closest to r in log scale.
  int nearest_level(double r) const {
    int best = 0;
    for (int k = 1; k < levels(); ++k)
      if (std::abs(std::log(radii_[k] / r)) < std::abs(std::log(radii_[best] / r))) best = k;
    return best;
  }

  /// Grid restricted to levels 0..last (the slab {r >= r_last}).
  SlabGrid truncated(int last) const {
    if (last < 2 || last >= levels()) throw ConfigError("truncated slab needs at least 3 levels");
    return SlabGrid(lattice_, nodes_, std::vector<double>(radii_.begin(), radii_.begin() + last + 1));
  }

 private:
  void validate() const {
    if (lattice_.empty() || static_cast<int>(lattice_.size()) > kMaxBoundaryDim)
      throw ConfigError("slab grid dimension out of range");
    if (nodes_.size() != lattice_.size()) throw ConfigError("slab grid needs a node count per lattice axis");
    for (int n : nodes_)
      if (n < 4) throw ConfigError("slab grid needs at least 4 nodes per axis");
    if (radii_.size() < 3) throw ConfigError("slab grid needs at least 3 radial levels");
    if (!(radii_.back() > 0.0)) throw ConfigError("slab grid needs r_min > 0");
    const double q = radii_[1] / radii_[0];
    if (!(q > 0.5 && q < 1.0)) throw ConfigError("slab grid ratio q must lie in (0.5, 1), got " + std::to_string(q));
    for (std::size_t k = 1; k < radii_.size(); ++k) {
      if (!(radii_[k] < radii_[k - 1])) throw ConfigError("slab grid radii must be strictly decreasing");
      if (std::abs(radii_[k] / radii_[k - 1] - q) > 1e-9) throw ConfigError("slab grid ladder must be geometric");
    }
  }

  std::vector<double> lattice_;
  std::vector<int> nodes_;
  std::vector<double> radii_;
  std::size_t boundary_size_ = 0;
  std::vector<RadialStencil> stencils_;
  std::vector<Neighbor> neighbors_;
};

}  // namespace ahharm

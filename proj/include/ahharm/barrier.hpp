#pragma once

// Superharmonic barrier phi = e^{eps psi}, psi = log r + v, with -Delta_g v = m + Delta_g log r
// on the slab (v = 0 on both walls).

#include "ahharm/core.hpp"
#include "ahharm/geometry.hpp"
#include "ahharm/grid.hpp"
#include "ahharm/tension.hpp"

#include <limits>
#include <optional>

namespace ahharm {

/// Linear stencil of Delta_g on the interior nodes of a slab grid, in CSR form.
class LaplacianStencil {
 public:
  LaplacianStencil(const MetricSpec& spec, const SlabGrid& grid) : grid_(grid), cache_(spec, grid_) {
    const SlabGrid& g = grid_;
    const int m = g.dim(), rr = m;
    row_.assign(g.size() + 1, 0);
    diag_.assign(g.size(), 0.0);
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(g.size());
    parallel_for(g.boundary_size(), [&](std::size_t j) {
      for (int k = 1; k + 1 < g.levels(); ++k) {
        const Mat& gi = cache_.g_inv(k, j);
        const Vec& cg = cache_.contracted(k, j);
        const double r = g.radius(k), ds = std::log(g.radius(k - 1) / r);
        auto& row = rows[g.index(k, j)];
        auto add = [&](int level, std::size_t jj, double w) { row.emplace_back(g.index(level, jj), w); };
        for (int a = 0; a < m; ++a) {
          const double ha = g.spacing(a);
          const std::size_t jp = g.neighbor(j, a, 1).j, jm = g.neighbor(j, a, -1).j;
          add(k, jp, gi(a, a) / (ha * ha) - cg[a] / (2 * ha));
          add(k, jm, gi(a, a) / (ha * ha) + cg[a] / (2 * ha));
          add(k, j, -2 * gi(a, a) / (ha * ha));
          for (int b = a + 1; b < m; ++b) {
            const double w = 2 * gi(a, b) / (4 * ha * g.spacing(b));
            if (w == 0.0) continue;
            add(k, g.neighbor(jp, b, 1).j, w);
            add(k, g.neighbor(jp, b, -1).j, -w);
            add(k, g.neighbor(jm, b, 1).j, -w);
            add(k, g.neighbor(jm, b, -1).j, w);
          }
          const double war = 2 * gi(a, rr) / (2 * ha) / (2 * ds * r);
          if (war != 0.0) {
            add(k - 1, jp, war);
            add(k - 1, jm, -war);
            add(k + 1, jp, -war);
            add(k + 1, jm, war);
          }
        }
        // central differences in s = log r: d_r = d_s / r, d_r^2 = (d_s^2 - d_s) / r^2
        const double w1 = 1.0 / (2 * ds * r), w2 = 1.0 / (ds * ds * r * r);
        add(k - 1, j, gi(rr, rr) * (w2 - w1 / r) - cg[rr] * w1);
        add(k + 1, j, gi(rr, rr) * (w2 + w1 / r) + cg[rr] * w1);
        add(k, j, -2 * gi(rr, rr) * w2);
        std::sort(row.begin(), row.end());
        std::vector<std::pair<std::size_t, double>> merged;
        for (const auto& e : row) {
          if (!merged.empty() && merged.back().first == e.first)
            merged.back().second += e.second;
          else
            merged.push_back(e);
        }
        row = std::move(merged);
      }
    });
    for (std::size_t i = 0; i < g.size(); ++i) {
      // rows annihilate constants; keep only the off-diagonal weights
      for (const auto& [c, w] : rows[i]) {
        if (c == i) continue;
        col_.push_back(c);
        val_.push_back(w);
        diag_[i] -= w;
      }
      row_[i + 1] = col_.size();
    }
  }

  LaplacianStencil(const LaplacianStencil&) = delete;
  LaplacianStencil& operator=(const LaplacianStencil&) = delete;

  const SlabGrid& grid() const { return grid_; }
  const SourceCache& cache() const { return cache_; }
  double diagonal(std::size_t i) const { return diag_[i]; }

  /// (Delta_g f)_i = sum_c w_c (f_c - f_i).
  double row_dot(std::size_t i, const std::vector<double>& f) const {
    double s = 0.0;
    for (std::size_t p = row_[i]; p < row_[i + 1]; ++p) s += val_[p] * (f[col_[p]] - f[i]);
    return s;
  }

  double off_diagonal_dot(std::size_t i, const std::vector<double>& f) const {
    double s = 0.0;
    for (std::size_t p = row_[i]; p < row_[i + 1]; ++p) s += val_[p] * f[col_[p]];
    return s;
  }

  std::vector<double> apply(const std::vector<double>& f) const {
    if (f.size() != grid_.size()) throw ConfigError("laplacian_g: field size does not match the grid");
    std::vector<double> out(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = row_dot(i, f);
    return out;
  }

 private:
  SlabGrid grid_;
  SourceCache cache_;
  std::vector<std::size_t> row_, col_;
  std::vector<double> val_, diag_;
};

/// Delta_g f = g^{ij}(d_i d_j f - Gamma^k_ij d_k f) by central differences; zero on the walls.
inline std::vector<double> laplacian_g(const MetricSpec& spec, const std::vector<double>& field, const SlabGrid& grid) {
  return LaplacianStencil(spec, grid).apply(field);
}

/// |d f|_g^2 by central differences, with an analytic radial part added to d_r f.
inline std::vector<double> gradient_norm_sq_g(const LaplacianStencil& L, const std::vector<double>& f,
                                              const std::function<double(double)>& extra_dr = {}) {
  const SlabGrid& g = L.grid();
  const int m = g.dim();
  std::vector<double> out(g.size(), 0.0);
  for (int k = 1; k + 1 < g.levels(); ++k) {
    const double r = g.radius(k), ds = std::log(g.radius(k - 1) / r);
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      Vec d(m + 1);
      for (int a = 0; a < m; ++a)
        d[a] = (f[g.index(k, g.neighbor(j, a, 1).j)] - f[g.index(k, g.neighbor(j, a, -1).j)]) / (2 * g.spacing(a));
      d[m] = (f[g.index(k - 1, j)] - f[g.index(k + 1, j)]) / (2 * ds * r);
      if (extra_dr) d[m] += extra_dr(r);
      out[g.index(k, j)] = d.dot(L.cache().g_inv(k, j) * d);
    }
  }
  return out;
}

struct BarrierOptions {
  std::optional<double> epsilon;  // fixed eps; default min(m / (2 sup|grad psi|^2), 0.9 m)
  bool use_correction = true;     // false: pure r^eps
  double tol = 1e-8;
  long max_sweeps = 2000000;
  bool throw_on_failure = true;
};

struct BarrierFunction {
  SlabGrid grid;
  std::vector<double> v_corr, phi, grad_psi_sq, lap_phi;
  double epsilon = 0;
  double residual = 0;  // sup over interior |Delta_g (log r + v) + m|
  long sweeps = 0;
  double sup_v = 0;
  double decay_constant = 0;  // max |v| / r over the two smallest interior levels
  double max_lap_phi = 0;     // over interior nodes
  double min_phi = 0;
  std::size_t worst_node = 0;
  bool certified = false;
};

/// g^{ij}(d_i d_j log r - Gamma^k_ij d_k log r) with exact derivatives of log r.
inline double laplacian_log_r(const SourceCache& cache, int level, std::size_t j, double r) {
  const Mat& gi = cache.g_inv(level, j);
  const int rr = static_cast<int>(gi.rows()) - 1;
  return -gi(rr, rr) / (r * r) - cache.contracted(level, j)[rr] / r;
}

inline BarrierFunction solve_barrier(const MetricSpec& spec, const SlabGrid& grid, const BarrierOptions& opt = {}) {
  spec.validate("source");
  const LaplacianStencil L(spec, grid);
  const SlabGrid& g = L.grid();
  const int m = spec.dim;
  BarrierFunction bf;
  bf.grid = g;
  bf.v_corr.assign(g.size(), 0.0);
  std::vector<double> rhs(g.size(), 0.0);  // Delta_g v = rhs
  for (int k = 1; k + 1 < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j)
      rhs[g.index(k, j)] = -(m + laplacian_log_r(L.cache(), k, j, g.radius(k)));

  auto residual = [&](const std::vector<double>& v) {
    double res = 0.0;
    for (int k = 1; k + 1 < g.levels(); ++k)
      for (std::size_t j = 0; j < g.boundary_size(); ++j) {
        const std::size_t i = g.index(k, j);
        res = std::max(res, std::abs(L.row_dot(i, v) - rhs[i]));
      }
    return res;
  };

  if (opt.use_correction) {
    std::vector<std::size_t> colour[2];
    for (int k = 1; k + 1 < g.levels(); ++k)
      for (std::size_t j = 0; j < g.boundary_size(); ++j) {
        const auto idx = g.multi_index(j);
        int parity = k;
        for (int a = 0; a < g.dim(); ++a) parity += idx[a];
        colour[parity & 1].push_back(g.index(k, j));
      }
    std::vector<double>& v = bf.v_corr;
    std::vector<double> next(g.size());
    double res = residual(v), checkpoint = res;
    while (res > opt.tol) {
      for (const auto& nodes : colour) {
        parallel_for(nodes.size(), [&](std::size_t p) {
          const std::size_t i = nodes[p];
          next[i] = (rhs[i] - L.off_diagonal_dot(i, v)) / L.diagonal(i);
        });
        for (std::size_t i : nodes) v[i] = next[i];
      }
      ++bf.sweeps;
      if (bf.sweeps % 100 == 0) {
        res = residual(v);
        if (res > opt.tol && res > 0.999 * checkpoint)
          throw SolverError("barrier relaxation stagnated at residual " + std::to_string(res) + " after " +
                            std::to_string(bf.sweeps) + " sweeps");
        checkpoint = res;
      }
      if (bf.sweeps >= opt.max_sweeps) throw SolverError("barrier relaxation exceeded the sweep limit");
    }
  }
  bf.residual = residual(bf.v_corr);

  bf.grad_psi_sq = gradient_norm_sq_g(L, bf.v_corr, [](double r) { return 1.0 / r; });
  double sup_grad = 0.0;
  for (int k = 1; k + 1 < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j) sup_grad = std::max(sup_grad, bf.grad_psi_sq[g.index(k, j)]);
  if (opt.epsilon) {
    if (!(*opt.epsilon > 0.0)) throw ConfigError("barrier epsilon must be positive");
    bf.epsilon = *opt.epsilon;
  } else {
    bf.epsilon = std::min(m / (2.0 * sup_grad), 0.9 * m);
  }

  bf.phi.resize(g.size());
  bf.min_phi = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      const std::size_t i = g.index(k, j);
      bf.phi[i] = std::pow(g.radius(k), bf.epsilon) * std::exp(bf.epsilon * bf.v_corr[i]);
      bf.sup_v = std::max(bf.sup_v, std::abs(bf.v_corr[i]));
    }
  for (int k = g.levels() - 3; k < g.levels() - 1; ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j)
      bf.decay_constant = std::max(bf.decay_constant, std::abs(bf.v_corr[g.index(k, j)]) / g.radius(k));

  bf.lap_phi = L.apply(bf.phi);
  bf.max_lap_phi = -std::numeric_limits<double>::infinity();
  for (int k = 1; k + 1 < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      const std::size_t i = g.index(k, j);
      bf.min_phi = std::min(bf.min_phi, bf.phi[i]);
      if (bf.lap_phi[i] > bf.max_lap_phi) {
        bf.max_lap_phi = bf.lap_phi[i];
        bf.worst_node = i;
      }
    }
  bf.certified = bf.max_lap_phi < 0.0;
  if (!bf.certified && opt.throw_on_failure) {
    const int k = static_cast<int>(bf.worst_node / g.boundary_size());
    const std::size_t j = bf.worst_node % g.boundary_size();
    throw CertificationError("barrier is not superharmonic at level " + std::to_string(k) + ", boundary node " +
                             std::to_string(j) + " (Delta_g phi = " + std::to_string(bf.max_lap_phi) + ")");
  }
  return bf;
}

}  // namespace ahharm

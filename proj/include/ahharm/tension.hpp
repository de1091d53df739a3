#pragma once

// Tension field, energy density, rescaled boundary-adapted tension and Neumann data
// of a discretized map u = (u^alpha, rho) between normal-form AH metrics.

#include "ahharm/approx.hpp"
#include "ahharm/core.hpp"
#include "ahharm/geometry.hpp"
#include "ahharm/grid.hpp"

#include <vector>

namespace ahharm {

/// Static source data per (x^1 index, level): g^{ij} and g^{ij} Gamma^k_ij.
class SourceCache {
 public:
  SourceCache() = default;
  SourceCache(const MetricSpec& source, const SlabGrid& grid) : grid_(&grid), n0_(grid.nodes()[0]) {
    if (grid.dim() != source.dim) throw ConfigError("grid dimension does not match the source metric");
    if (grid.r_max() > source.r_star * (1.0 + 1e-12)) throw DomainError("grid leaves the source chart (r > r_star)");
    const int n = source.chart_dim();
    g_inv_.resize(static_cast<std::size_t>(n0_) * grid.levels());
    contracted_.resize(g_inv_.size());
    for (int k = 0; k < grid.levels(); ++k)
      for (int i0 = 0; i0 < n0_; ++i0) {
        Vec p = Vec::Zero(n);
        p[0] = i0 * grid.spacing(0);
        p[n - 1] = grid.radius(k);
        const MetricJet jet = eval_metric_jet(source, p);
        const Mat gi = p[n - 1] * p[n - 1] * jet.gbar_inv;
        Vec c = Vec::Zero(n);
        for (int l = 0; l < n; ++l)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) c[l] += gi(i, j) * jet.christoffel_g(l, i, j);
        g_inv_[slot(k, i0)] = gi;
        contracted_[slot(k, i0)] = c;
      }
  }

  const Mat& g_inv(int level, std::size_t j) const { return g_inv_[slot(level, first_index(j))]; }
  const Vec& contracted(int level, std::size_t j) const { return contracted_[slot(level, first_index(j))]; }

 private:
  std::size_t slot(int level, int i0) const { return static_cast<std::size_t>(level) * n0_ + i0; }
  int first_index(std::size_t j) const { return grid_->multi_index(j)[0]; }

  const SlabGrid* grid_ = nullptr;
  int n0_ = 0;
  std::vector<Mat> g_inv_;
  std::vector<Vec> contracted_;
};

/// Target metric h and Christoffels Gamma^gamma_{alpha beta} at a chart point (y, rho).
struct TargetPointGeometry {
  Mat h;
  Christoffel gamma;
};

inline TargetPointGeometry target_geometry(const MetricSpec& target, const Vec& y) {
  const int n = target.chart_dim();
  const double rho = y[n - 1];
  TargetPointGeometry tg;
  if (target.is_exact_model()) {
    tg.h = Mat::Identity(n, n) / (rho * rho);
    tg.gamma = Christoffel(n);
    const int inf = n - 1;
    tg.gamma(inf, inf, inf) = -1.0 / rho;
    for (int a = 0; a < inf; ++a) {
      tg.gamma(a, a, inf) = tg.gamma(a, inf, a) = -1.0 / rho;
      tg.gamma(inf, a, a) = 1.0 / rho;
    }
    return tg;
  }
  const MetricJet jet = eval_metric_jet(target, y);
  tg.h = jet.gbar / (rho * rho);
  tg.gamma = jet.christoffel_g;
  return tg;
}

/// First and second chart derivatives of every component at one node.
struct NodeDerivatives {
  Mat jac;                              // jac(c, i) = d_i u^c
  std::array<Mat, kMaxBoundaryDim + 1> hess;  // hess[c](i, j)
};

namespace detail {

inline double lifted_value(const MapField& u, int c, int level, std::size_t j, int axis, int wrap) {
  double v = u.at(c, level, j);
  if (c < u.n() && wrap != 0) v += wrap * u.seam_jump(c, axis);
  return v;
}

/// Value of component c at the node reached by steps (sa along axis a, sb along axis b).
inline double shifted_value(const MapField& u, int c, int level, std::size_t j, int a, int sa, int b, int sb) {
  const SlabGrid& g = u.grid;
  const auto n1 = g.neighbor(j, a, sa);
  double v = lifted_value(u, c, level, n1.j, a, n1.wrap);
  if (sb != 0) {
    const auto n2 = g.neighbor(n1.j, b, sb);
    v = lifted_value(u, c, level, n2.j, a, n1.wrap);
    if (c < u.n() && n2.wrap != 0) v += n2.wrap * u.seam_jump(c, b);
  }
  return v;
}

}  // namespace detail

inline NodeDerivatives node_derivatives(const MapField& u, int level, std::size_t j) {
  const SlabGrid& g = u.grid;
  const int m = g.dim(), nc = u.n() + 1, rr = m;
  NodeDerivatives nd;
  nd.jac = Mat::Zero(nc, m + 1);
  const RadialStencil& st = g.stencil(level);
  for (int c = 0; c < nc; ++c) {
    Mat h = Mat::Zero(m + 1, m + 1);
    const double u0 = u.at(c, level, j);
    for (int a = 0; a < m; ++a) {
      const double ha = g.spacing(a);
      const double up = detail::shifted_value(u, c, level, j, a, 1, a, 0);
      const double um = detail::shifted_value(u, c, level, j, a, -1, a, 0);
      nd.jac(c, a) = (up - um) / (2 * ha);
      h(a, a) = (up - 2 * u0 + um) / (ha * ha);
      for (int b = a + 1; b < m; ++b) {
        const double hb = g.spacing(b);
        const double pp = detail::shifted_value(u, c, level, j, a, 1, b, 1);
        const double pm = detail::shifted_value(u, c, level, j, a, 1, b, -1);
        const double mp = detail::shifted_value(u, c, level, j, a, -1, b, 1);
        const double mm = detail::shifted_value(u, c, level, j, a, -1, b, -1);
        h(a, b) = h(b, a) = (pp - pm - mp + mm) / (4 * ha * hb);
      }
      double mixed = 0.0;
      for (int i = 0; i < 3; ++i) {
        const int l = st.level[i];
        const double vp = detail::shifted_value(u, c, l, j, a, 1, a, 0);
        const double vm = detail::shifted_value(u, c, l, j, a, -1, a, 0);
        mixed += st.d1[i] * (vp - vm) / (2 * ha);
      }
      h(a, rr) = h(rr, a) = mixed;
    }
    double d1 = 0.0, d2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double v = u.at(c, st.level[i], j);
      d1 += st.d1[i] * v;
      d2 += st.d2[i] * v;
    }
    nd.jac(c, rr) = d1;
    h(rr, rr) = d2;
    nd.hess[c] = h;
  }
  return nd;
}

inline void check_in_chart(const MetricSpec& target, double rho, int level, std::size_t j) {
  if (!(rho > 0.0) || !(rho < target.r_star))
    throw ChartOverflowError("map leaves the target chart (rho=" + std::to_string(rho) + ") at level " +
                             std::to_string(level) + ", boundary node " + std::to_string(j));
}

struct NodeTension {
  Vec tau;         // tau^gamma, gamma = 1..n, infinity
  double norm_h = 0;
  double energy = 0;
};

inline NodeTension node_tension(const MapField& u, const SourceCache& src, const MetricSpec& target, int level,
                                std::size_t j) {
  const int nc = u.n() + 1;
  const Vec y = u.point(level, j);
  check_in_chart(target, y[nc - 1], level, j);
  const NodeDerivatives nd = node_derivatives(u, level, j);
  const Mat& gi = src.g_inv(level, j);
  const Vec& cg = src.contracted(level, j);
  const TargetPointGeometry tg = target_geometry(target, y);
  const Mat p = nd.jac * gi * nd.jac.transpose();
  NodeTension nt;
  nt.tau.resize(nc);
  for (int c = 0; c < nc; ++c) {
    double t = (gi.cwiseProduct(nd.hess[c])).sum() - cg.dot(nd.jac.row(c).transpose());
    t += (tg.gamma.upper[c].cwiseProduct(p)).sum();
    nt.tau[c] = t;
  }
  nt.norm_h = std::sqrt(std::max(0.0, nt.tau.dot(tg.h * nt.tau)));
  nt.energy = (tg.h.cwiseProduct(p)).sum();
  return nt;
}

struct TensionField {
  SlabGrid grid;
  std::vector<std::vector<double>> tau;       // per component, zero on wall rows
  std::vector<std::vector<double>> rescaled;  // r^{-1} tau
  std::vector<double> norm_h;
  std::vector<double> energy;
};

inline TensionField tension(const MapField& u, const MetricSpec& source, const MetricSpec& target,
                            const SourceCache* cache = nullptr) {
  if (u.n() != target.dim) throw ConfigError("map and target dimensions differ");
  SourceCache local;
  if (!cache) {
    local = SourceCache(source, u.grid);
    cache = &local;
  }
  const SlabGrid& g = u.grid;
  const int nc = u.n() + 1;
  TensionField tf{g, std::vector<std::vector<double>>(nc, std::vector<double>(g.size(), 0.0)),
                  std::vector<std::vector<double>>(nc, std::vector<double>(g.size(), 0.0)),
                  std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
  for (std::size_t j = 0; j < g.boundary_size(); ++j) {
    check_in_chart(target, u.rho(0, j), 0, j);
    check_in_chart(target, u.rho(g.levels() - 1, j), g.levels() - 1, j);
  }
  parallel_for(g.boundary_size(), [&](std::size_t j) {
    for (int k = 1; k + 1 < g.levels(); ++k) {
      const NodeTension nt = node_tension(u, *cache, target, k, j);
      const std::size_t i = g.index(k, j);
      for (int c = 0; c < nc; ++c) {
        tf.tau[c][i] = nt.tau[c];
        tf.rescaled[c][i] = nt.tau[c] / g.radius(k);
      }
      tf.norm_h[i] = nt.norm_h;
      tf.energy[i] = nt.energy;
    }
  });
  return tf;
}

/// r^{-1} tau reconstructed from the compactified tension plus the explicit conformal terms:
/// r tau_{gbar,hbar} - (m-1) gbar^{k inf} d_k u - (r/rho)(2<du, drho> - hbar^{gamma inf} hbar_{ab}<du^a, du^b>).
inline Vec rescaled_tension_decomposed(const MapField& u, const MetricSpec& source, const MetricSpec& target,
                                       int level, std::size_t j) {
  const SlabGrid& g = u.grid;
  const int m = g.dim(), nc = u.n() + 1, inf_s = m, inf_t = nc - 1;
  const double r = g.radius(level);
  const Vec y = u.point(level, j);
  const double rho = y[inf_t];
  const MetricJet sj = eval_metric_jet(source, g.chart_point(level, j));
  const MetricJet tj = eval_metric_jet(target, y);
  const NodeDerivatives nd = node_derivatives(u, level, j);
  const Mat p = nd.jac * sj.gbar_inv * nd.jac.transpose();  // <du^a, du^b>_gbar
  Vec out(nc);
  for (int c = 0; c < nc; ++c) {
    double tbar = 0.0;
    for (int i = 0; i <= m; ++i)
      for (int k = 0; k <= m; ++k) {
        double h = nd.hess[c](i, k);
        for (int l = 0; l <= m; ++l) h -= sj.christoffel_gbar(l, i, k) * nd.jac(c, l);
        tbar += sj.gbar_inv(i, k) * h;
      }
    tbar += (tj.christoffel_gbar.upper[c].cwiseProduct(p)).sum();
    double radial = 0.0;
    for (int k = 0; k <= m; ++k) radial += sj.gbar_inv(k, inf_s) * nd.jac(c, k);
    const double cross = 2.0 * p(c, inf_t) - tj.gbar_inv(c, inf_t) * (tj.gbar.cwiseProduct(p)).sum();
    out[c] = r * tbar - (m - 1) * radial - (r / rho) * cross;
  }
  return out;
}

struct TensionLevelReport {
  double r = 0;
  double sup_tension_h = 0;
  double sup_rescaled_tan = 0;
  double sup_rescaled_nor = 0;
  double sup_energy_minus_m1 = 0;
};

/// Per interior level sup norms (wall rows excluded).
inline std::vector<TensionLevelReport> rescaled_tension_report(const TensionField& tf, int source_dim) {
  const SlabGrid& g = tf.grid;
  const int nc = static_cast<int>(tf.tau.size());
  std::vector<TensionLevelReport> rep;
  for (int k = 1; k + 1 < g.levels(); ++k) {
    TensionLevelReport lr;
    lr.r = g.radius(k);
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      const std::size_t i = g.index(k, j);
      lr.sup_tension_h = std::max(lr.sup_tension_h, tf.norm_h[i]);
      for (int c = 0; c + 1 < nc; ++c) lr.sup_rescaled_tan = std::max(lr.sup_rescaled_tan, std::abs(tf.rescaled[c][i]));
      lr.sup_rescaled_nor = std::max(lr.sup_rescaled_nor, std::abs(tf.rescaled[nc - 1][i]));
      lr.sup_energy_minus_m1 = std::max(lr.sup_energy_minus_m1, std::abs(tf.energy[i] - (source_dim + 1)));
    }
    rep.push_back(lr);
  }
  return rep;
}

inline std::vector<TensionLevelReport> rescaled_tension_report(const MapField& u, const MetricSpec& source,
                                                               const MetricSpec& target) {
  return rescaled_tension_report(tension(u, source, target), source.dim);
}

/// Report row nearest to radius r.
inline const TensionLevelReport& report_at(const std::vector<TensionLevelReport>& rep, double r) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rep.size(); ++i)
    if (std::abs(std::log(rep[i].r / r)) < std::abs(std::log(rep[best].r / r))) best = i;
  return rep[best];
}

struct EnergyDensity {
  std::vector<double> e_g_h;   // w.r.t. (g, h)
  std::vector<double> e_bar;   // w.r.t. (gbar, hbar)
};

/// Energy densities on interior nodes (wall rows left at zero).
inline EnergyDensity energy_density(const MapField& u, const MetricSpec& source, const MetricSpec& target) {
  const SlabGrid& g = u.grid;
  EnergyDensity ed{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
  const SourceCache cache(source, g);
  parallel_for(g.boundary_size(), [&](std::size_t j) {
    for (int k = 1; k + 1 < g.levels(); ++k) {
      const Vec y = u.point(k, j);
      check_in_chart(target, y[u.n()], k, j);
      const NodeDerivatives nd = node_derivatives(u, k, j);
      const TargetPointGeometry tg = target_geometry(target, y);
      const Mat p = nd.jac * cache.g_inv(k, j) * nd.jac.transpose();
      const std::size_t i = g.index(k, j);
      ed.e_g_h[i] = (tg.h.cwiseProduct(p)).sum();
      const double r = g.radius(k), rho = y[u.n()];
      ed.e_bar[i] = ed.e_g_h[i] * rho * rho / (r * r);
    }
  });
  return ed;
}

struct NeumannData {
  std::vector<std::vector<double>> du_dr;  // per tangential component, per boundary node
  std::vector<double> drho_dr;
};

/// Radial derivatives at the two smallest levels, extrapolated linearly to r = 0.
inline NeumannData neumann_extract(const MapField& u) {
  const SlabGrid& g = u.grid;
  int below = 0;
  for (double r : g.radii())
    if (r <= 0.1 * (1 + 1e-9)) ++below;
  if (below < 3) throw ResolutionError("neumann_extract needs at least 3 radial levels at or below r = 0.1");
  const int k2 = g.levels() - 1, k1 = k2 - 1;
  const double r1 = g.radius(k1), r2 = g.radius(k2);
  auto dr = [&](int c, int k, std::size_t j) {
    const RadialStencil& st = g.stencil(k);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += st.d1[i] * u.at(c, st.level[i], j);
    return s;
  };
  NeumannData nd{std::vector<std::vector<double>>(u.n(), std::vector<double>(g.boundary_size())),
                 std::vector<double>(g.boundary_size())};
  for (std::size_t j = 0; j < g.boundary_size(); ++j) {
    for (int c = 0; c <= u.n(); ++c) {
      const double v = richardson_to_zero(r1, dr(c, k1, j), r2, dr(c, k2, j));
      if (c < u.n())
        nd.du_dr[c][j] = v;
      else
        nd.drho_dr[j] = v;
    }
  }
  return nd;
}

}  // namespace ahharm

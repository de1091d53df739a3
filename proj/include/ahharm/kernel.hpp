#pragma once

// Approximate Poisson kernel K(x, r; x') = c_m r / (D(x, x') + r^2)^{(m+1)/2} on a
// torus boundary, with D the squared boundary distance blended smoothly onto a
// plateau >= delta^2 before the cut locus.

#include "ahharm/core.hpp"
#include "ahharm/geometry.hpp"
#include "ahharm/grid.hpp"

#include <functional>
#include <random>
#include <vector>

namespace ahharm {

namespace detail {

/// Second-order jet (value, first, second derivative) in one variable.
struct Jet2 {
  double v = 0, d = 0, dd = 0;
};
inline Jet2 operator+(Jet2 a, Jet2 b) { return {a.v + b.v, a.d + b.d, a.dd + b.dd}; }
inline Jet2 operator-(Jet2 a, Jet2 b) { return {a.v - b.v, a.d - b.d, a.dd - b.dd}; }
inline Jet2 operator*(Jet2 a, Jet2 b) { return {a.v * b.v, a.d * b.v + a.v * b.d, a.dd * b.v + 2 * a.d * b.d + a.v * b.dd}; }
inline Jet2 operator*(double s, Jet2 a) { return {s * a.v, s * a.d, s * a.dd}; }
inline Jet2 reciprocal(Jet2 a) {
  const double i = 1.0 / a.v;
  return {i, -a.d * i * i, (2 * a.d * a.d * i - a.dd) * i * i};
}
inline Jet2 operator/(Jet2 a, Jet2 b) { return a * reciprocal(b); }
inline Jet2 sqrt(Jet2 a) {
  const double s = std::sqrt(a.v);
  return {s, 0.5 * a.d / s, 0.5 * a.dd / s - 0.25 * a.d * a.d / (s * a.v)};
}
/// e^{-1/u} for u > 0, zero (with all derivatives) otherwise.
inline Jet2 flat_bump(Jet2 u) {
  if (u.v <= 0.0) return {};
  const double e = std::exp(-1.0 / u.v);
  const double f1 = e / (u.v * u.v);
  const double f2 = e * (1.0 / std::pow(u.v, 4) - 2.0 / std::pow(u.v, 3));
  return {e, f1 * u.d, f2 * u.d * u.d + f1 * u.dd};
}
/// C-infinity monotone step: 0 for u <= 0, 1 for u >= 1.
inline Jet2 smooth_step(Jet2 u) {
  const Jet2 a = flat_bump(u);
  const Jet2 b = flat_bump(Jet2{1.0 - u.v, -u.d, -u.dd});
  return a / (a + b);
}

inline double wrap_periodic(double d, double period) {
  d = std::fmod(d, period);
  if (d >= 0.5 * period) d -= period;
  if (d < -0.5 * period) d += period;
  return d;
}

}  // namespace detail

/// D as a function of the squared (conformally weighted) lattice distance q = d^2.
struct ModifiedDistance {
  double injectivity_radius = 0.0;
  double blend_width = 0.0;

  double blend_start() const { return injectivity_radius - blend_width; }

  /// D(q), dD/dq, d^2D/dq^2.
  detail::Jet2 profile(double q) const {
    const double t0 = blend_start();
    const double delta2 = injectivity_radius * injectivity_radius;
    if (q < t0 * t0) return {q, 1.0, 0.0};
    if (q >= delta2) return {delta2, 0.0, 0.0};
    const detail::Jet2 qj{q, 1.0, 0.0};
    const detail::Jet2 t = detail::sqrt(qj);
    const detail::Jet2 u = (1.0 / blend_width) * (t - detail::Jet2{t0, 0, 0});
    const detail::Jet2 s = detail::smooth_step(u);
    return qj + s * (detail::Jet2{delta2, 0, 0} - qj);
  }
};

/// Geometry of one boundary pair (x, x').
struct PairGeometry {
  Vec delta;      // minimal image of x - x' per axis
  Vec lift_disp;  // minimal image of x' - x, with exact half-period ties averaged to 0
  double q = 0;   // conformally weighted squared distance d^2
  double d = 0, dd_dq = 0, d2d_dq2 = 0;  // D and its q-derivatives
  Vec grad_q;     // d q / d x^a
  Mat hess_q;     // d^2 q / dx^a dx^b
};

class KernelContext {
 public:
  /// `quadrature_nodes` per axis must satisfy N_a >= resolution_factor * L_a / r_min.
  KernelContext(MetricSpec boundary, std::vector<int> quadrature_nodes, double r_min, double resolution_factor = 2.0,
                double blend_fraction = 0.25)
      : spec_(std::move(boundary)), nodes_(std::move(quadrature_nodes)), r_min_(r_min) {
    const int m = spec_.dim;
    if (static_cast<int>(nodes_.size()) != m) throw ConfigError("quadrature needs a node count per boundary axis");
    if (!(r_min > 0.0)) throw ConfigError("kernel context needs r_min > 0");
    for (int a = 0; a < m; ++a) {
      const double need = resolution_factor * spec_.lattice[a] / r_min;
      if (nodes_[a] < need)
        throw ResolutionError("quadrature under-resolved on axis " + std::to_string(a) + ": N=" +
                              std::to_string(nodes_[a]) + " < " + std::to_string(need) + " (r_min=" +
                              std::to_string(r_min) + ")");
    }
    resolution_factor_ = resolution_factor;
    blend_fraction_ = blend_fraction;
    c_m_ = normalization(m);
    distance_.injectivity_radius = 0.5 * spec_.min_period() * spec_.min_conformal_factor();
    distance_.blend_width = blend_fraction * distance_.injectivity_radius;
    build_quadrature();
  }

  /// c_m = 2 / |S^m|.
  static double normalization(int m) {
    const double sigma = 2.0 * std::pow(std::numbers::pi, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
    return 2.0 / sigma;
  }

  const MetricSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim; }
  double c_m() const { return c_m_; }
  double r_min() const { return r_min_; }
  const ModifiedDistance& distance() const { return distance_; }
  const std::vector<int>& quadrature_nodes() const { return nodes_; }
  std::size_t quadrature_size() const { return points_.size(); }
  const Vec& node(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// Same boundary and distance with N_a doubled on every axis.
  KernelContext refined() const {
    std::vector<int> n2 = nodes_;
    for (int& n : n2) n *= 2;
    return KernelContext(spec_, n2, r_min_, resolution_factor_, blend_fraction_);
  }

  /// Quadrature of a boundary function given at the quadrature nodes.
  double integrate(const std::vector<double>& values) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += weights_[i] * values[i];
    return s;
  }

  std::vector<double> sample(const std::function<double(const Vec&)>& phi) const {
    std::vector<double> v(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) v[i] = phi(points_[i]);
    return v;
  }

  PairGeometry pair(const Vec& x, std::size_t node_index) const { return pair_impl(x, points_[node_index], exp_lambda_[node_index]); }
  PairGeometry pair(const Vec& x, const Vec& xp) const { return pair_impl(x, xp, std::exp(spec_.lambda(xp)[0])); }

  /// Boundary distance used inside D (exact for flat tori, factor-weighted otherwise).
  double boundary_distance(const Vec& x, const Vec& xp) const { return std::sqrt(pair(x, xp).q); }
  double modified_distance(const Vec& x, const Vec& xp) const { return pair(x, xp).d; }

  /// K, dK/dr, d^2K/dr^2 for a given value of D.
  std::array<double, 3> radial(double d, double r) const {
    const double beta = 0.5 * (dim() + 1);
    const double q = d + r * r;
    const double qb = inv_pow_beta(q);  // Q^{-beta}
    const double qb1 = qb / q, qb2 = qb1 / q;
    const double k = c_m_ * r * qb;
    const double kr = c_m_ * (qb - 2.0 * beta * r * r * qb1);
    const double krr = c_m_ * (-6.0 * beta * r * qb1 + 4.0 * beta * (beta + 1.0) * r * r * r * qb2);
    return {k, kr, krr};
  }

 private:
  double inv_pow_beta(double q) const {
    switch (dim()) {
      case 1: return 1.0 / q;
      case 2: return 1.0 / (q * std::sqrt(q));
      case 3: return 1.0 / (q * q);
      default: return std::pow(q, -0.5 * (dim() + 1));
    }
  }

  PairGeometry pair_impl(const Vec& x, const Vec& xp, double exp_lambda_p) const {
    const int m = dim();
    PairGeometry pg;
    pg.delta.resize(m);
    pg.lift_disp.resize(m);
    double p2 = 0.0;
    for (int a = 0; a < m; ++a) {
      const double L = spec_.lattice[a];
      const double dl = detail::wrap_periodic(x[a] - xp[a], L);
      pg.delta[a] = dl;
      pg.lift_disp[a] = std::abs(std::abs(dl) - 0.5 * L) <= 1e-12 * L ? 0.0 : -dl;
      p2 += dl * dl;
    }
    const auto lam = spec_.lambda(x);
    const double e = std::exp(lam[0]) * exp_lambda_p;
    pg.q = e * p2;
    pg.grad_q = 2.0 * e * pg.delta;
    pg.hess_q = 2.0 * e * Mat::Identity(m, m);
    if (lam[1] != 0.0 || lam[2] != 0.0) {
      pg.grad_q[0] += e * lam[1] * p2;
      for (int b = 0; b < m; ++b) {
        pg.hess_q(0, b) += 2.0 * e * lam[1] * pg.delta[b];
        pg.hess_q(b, 0) += 2.0 * e * lam[1] * pg.delta[b];
      }
      pg.hess_q(0, 0) += e * (lam[1] * lam[1] + lam[2]) * p2;
    }
    const detail::Jet2 dj = distance_.profile(pg.q);
    pg.d = dj.v;
    pg.dd_dq = dj.d;
    pg.d2d_dq2 = dj.dd;
    return pg;
  }

  void build_quadrature() {
    const int m = dim();
    points_ = boundary_samples_nonuniform();
    double cell = 1.0;
    for (int a = 0; a < m; ++a) cell *= spec_.lattice[a] / nodes_[a];
    weights_.resize(points_.size());
    exp_lambda_.resize(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double l = spec_.lambda(points_[i])[0];
      exp_lambda_[i] = std::exp(l);
      weights_[i] = cell * std::exp(m * l);  // sqrt(det ghat)
    }
  }

  std::vector<Vec> boundary_samples_nonuniform() const {
    const int m = dim();
    std::size_t total = 1;
    for (int n : nodes_) total *= static_cast<std::size_t>(n);
    std::vector<Vec> pts(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
      Vec x(m);
      std::size_t rem = idx;
      for (int a = m - 1; a >= 0; --a) {
        x[a] = static_cast<double>(rem % nodes_[a]) * spec_.lattice[a] / nodes_[a];
        rem /= nodes_[a];
      }
      pts[idx] = x;
    }
    return pts;
  }

  MetricSpec spec_;
  std::vector<int> nodes_;
  double r_min_ = 0.0;
  double resolution_factor_ = 2.0;
  double blend_fraction_ = 0.25;
  double c_m_ = 0.0;
  ModifiedDistance distance_;
  std::vector<Vec> points_;
  std::vector<double> weights_;
  std::vector<double> exp_lambda_;
};

/// Kernel value and its chart derivatives at (x, r) with respect to (x, r), x' fixed.
struct KernelDerivatives {
  double value = 0;
  Vec grad;  // dK/dx^a, dK/dr
  Mat hess;
};

inline KernelDerivatives kernel_derivatives(const KernelContext& ctx, const PairGeometry& pg, double r) {
  const int m = ctx.dim();
  const double beta = 0.5 * (m + 1);
  const double c = ctx.c_m();
  const auto rad = ctx.radial(pg.d, r);
  const double qq = pg.d + r * r;
  const double qb1 = rad[0] / (c * r) / qq;  // Q^{-beta-1}
  const double qb2 = qb1 / qq;
  const Vec grad_d = pg.dd_dq * pg.grad_q;
  const Mat hess_d = pg.d2d_dq2 * pg.grad_q * pg.grad_q.transpose() + pg.dd_dq * pg.hess_q;

  KernelDerivatives kd;
  kd.value = rad[0];
  kd.grad.resize(m + 1);
  kd.hess.resize(m + 1, m + 1);
  kd.grad.head(m) = -beta * c * r * qb1 * grad_d;
  kd.grad[m] = rad[1];
  kd.hess.topLeftCorner(m, m) = c * r * (beta * (beta + 1.0) * qb2 * grad_d * grad_d.transpose() - beta * qb1 * hess_d);
  const Vec mixed = -beta * c * (qb1 - 2.0 * (beta + 1.0) * r * r * qb2) * grad_d;
  kd.hess.block(0, m, m, 1) = mixed;
  kd.hess.block(m, 0, 1, m) = mixed.transpose();
  kd.hess(m, m) = rad[2];
  return kd;
}

/// Laplacian of gbar applied to a function with chart gradient `grad` and Hessian `hess`.
inline double gbar_laplacian(const MetricJet& jet, const Vec& grad, const Mat& hess) {
  const int n = static_cast<int>(grad.size());
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double h = hess(i, j);
      for (int k = 0; k < n; ++k) h -= jet.christoffel_gbar(k, i, j) * grad[k];
      s += jet.gbar_inv(i, j) * h;
    }
  return s;
}

inline double gbar_norm_of_gradient(const MetricJet& jet, const Vec& grad) {
  return std::sqrt(std::max(0.0, grad.dot(jet.gbar_inv * grad)));
}

inline double eval_kernel(const KernelContext& ctx, const Vec& x, double r, const Vec& xp) {
  if (!(r > 0.0)) throw DomainError("eval_kernel: r must be positive");
  return ctx.radial(ctx.pair(x, xp).d, r)[0];
}

inline Vec chart_point_of(const Vec& x, double r) {
  Vec p(x.size() + 1);
  p.head(x.size()) = x;
  p[x.size()] = r;
  return p;
}

struct KernelMoments {
  double i0 = 0, i1 = 0, i2 = 0;
};

namespace detail {
inline KernelMoments raw_moments(const KernelContext& ctx, const Vec& x, double r) {
  const int m = ctx.dim();
  const MetricJet jet = eval_metric_jet(ctx.spec(), chart_point_of(x, r));
  double i0 = 0.0, lap = 0.0;
  Vec g = Vec::Zero(m + 1);
  for (std::size_t i = 0; i < ctx.quadrature_size(); ++i) {
    const KernelDerivatives kd = kernel_derivatives(ctx, ctx.pair(x, i), r);
    const double w = ctx.weight(i);
    i0 += w * kd.value;
    g += w * kd.grad;
    lap += w * gbar_laplacian(jet, kd.grad, kd.hess);
  }
  return {i0, r * gbar_norm_of_gradient(jet, g), r * lap};
}
}  // namespace detail

/// I0 = int K, I1 = r |int grad K|_gbar, I2 = r int Lap_gbar K over the boundary.
inline KernelMoments kernel_moments(const KernelContext& ctx, const Vec& x, double r, bool check_resolution = true) {
  if (!(r > 0.0) || r > ctx.spec().r_star) throw DomainError("kernel_moments: r outside (0, r_star]");
  const KernelMoments mo = detail::raw_moments(ctx, x, r);
  if (check_resolution) {
    const KernelMoments fine = detail::raw_moments(ctx.refined(), x, r);
    if (std::abs(fine.i0 - mo.i0) > 1e-3)
      throw ResolutionError("kernel_moments: doubling the quadrature changes I0 by " +
                            std::to_string(std::abs(fine.i0 - mo.i0)) + " at r=" + std::to_string(r));
  }
  return mo;
}

struct KernelSample {
  Vec x;
  double r;
  Vec xp;
};

inline std::vector<KernelSample> random_kernel_samples(const KernelContext& ctx, std::size_t count, std::uint64_t seed,
                                                       double r_lo, double r_hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<KernelSample> out;
  out.reserve(count);
  const int m = ctx.dim();
  for (std::size_t s = 0; s < count; ++s) {
    KernelSample ks{Vec(m), 0.0, Vec(m)};
    for (int a = 0; a < m; ++a) {
      ks.x[a] = unit(rng) * ctx.spec().lattice[a];
      ks.xp[a] = unit(rng) * ctx.spec().lattice[a];
    }
    ks.r = r_lo * std::pow(r_hi / r_lo, unit(rng));
    out.push_back(ks);
  }
  return out;
}

struct KernelBounds {
  double c_grad = 0, c_lap = 0;
};

/// Empirical sup of r |grad_gbar K|_gbar / K and |Lap_gbar K| / K.
inline KernelBounds kernel_bounds_check(const KernelContext& ctx, const std::vector<KernelSample>& samples) {
  KernelBounds b;
  for (const KernelSample& s : samples) {
    const MetricJet jet = eval_metric_jet(ctx.spec(), chart_point_of(s.x, s.r));
    const KernelDerivatives kd = kernel_derivatives(ctx, ctx.pair(s.x, s.xp), s.r);
    b.c_grad = std::max(b.c_grad, s.r * gbar_norm_of_gradient(jet, kd.grad) / kd.value);
    b.c_lap = std::max(b.c_lap, std::abs(gbar_laplacian(jet, kd.grad, kd.hess)) / kd.value);
  }
  return b;
}

/// w = int K phi and its chart derivatives at one point.
struct ExtensionJet {
  double value = 0;
  Vec grad;
  Mat hess;
  double laplacian_gbar = 0;
  double grad_norm_gbar = 0;
};

inline ExtensionJet extension_jet(const KernelContext& ctx, const std::vector<double>& phi_at_nodes, const Vec& x,
                                  double r) {
  const int m = ctx.dim();
  ExtensionJet ej;
  ej.grad = Vec::Zero(m + 1);
  ej.hess = Mat::Zero(m + 1, m + 1);
  for (std::size_t i = 0; i < ctx.quadrature_size(); ++i) {
    const KernelDerivatives kd = kernel_derivatives(ctx, ctx.pair(x, i), r);
    const double w = ctx.weight(i) * phi_at_nodes[i];
    ej.value += w * kd.value;
    ej.grad += w * kd.grad;
    ej.hess += w * kd.hess;
  }
  const MetricJet jet = eval_metric_jet(ctx.spec(), chart_point_of(x, r));
  ej.laplacian_gbar = gbar_laplacian(jet, ej.grad, ej.hess);
  ej.grad_norm_gbar = gbar_norm_of_gradient(jet, ej.grad);
  return ej;
}

/// Scalar field w = int K phi on a slab grid with its r-derivative and boundary limits.
struct ExtensionField {
  SlabGrid grid;
  std::vector<double> w;
  std::vector<double> dw_dr;
  std::vector<double> boundary_value;  // Richardson limit of w at r = 0
  std::vector<double> boundary_dr;     // Richardson limit of dw/dr at r = 0
};

/// Two-point Richardson extrapolation to r = 0 assuming an error linear in r.
inline double richardson_to_zero(double r1, double v1, double r2, double v2) { return (r1 * v2 - r2 * v1) / (r1 - r2); }

inline ExtensionField extend(const KernelContext& ctx, const std::function<double(const Vec&)>& phi,
                             const SlabGrid& grid) {
  if (grid.dim() != ctx.dim()) throw ConfigError("extend: grid and kernel dimensions differ");
  if (grid.r_min() < ctx.r_min() * (1.0 - 1e-12))
    throw ResolutionError("extend: grid reaches below the kernel's resolved r_min");
  if (grid.r_max() > ctx.spec().r_star * (1.0 + 1e-12)) throw DomainError("extend: grid leaves the chart (r > r_star)");
  const std::vector<double> vals = ctx.sample(phi);
  ExtensionField ef{grid, std::vector<double>(grid.size()), std::vector<double>(grid.size()), {}, {}};
  const std::size_t nb = grid.boundary_size();
  parallel_for(nb, [&](std::size_t j) {
    const Vec x = grid.boundary_point(j);
    std::vector<double> dvals(ctx.quadrature_size());
    for (std::size_t i = 0; i < ctx.quadrature_size(); ++i) dvals[i] = ctx.pair(x, i).d;
    for (int k = 0; k < grid.levels(); ++k) {
      const double r = grid.radius(k);
      double w = 0.0, wr = 0.0;
      for (std::size_t i = 0; i < ctx.quadrature_size(); ++i) {
        const auto rad = ctx.radial(dvals[i], r);
        const double c = ctx.weight(i) * vals[i];
        w += c * rad[0];
        wr += c * rad[1];
      }
      ef.w[grid.index(k, j)] = w;
      ef.dw_dr[grid.index(k, j)] = wr;
    }
  });
  const int k1 = grid.levels() - 2, k2 = grid.levels() - 1;
  ef.boundary_value.resize(nb);
  ef.boundary_dr.resize(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    ef.boundary_value[j] = richardson_to_zero(grid.radius(k1), ef.w[grid.index(k1, j)], grid.radius(k2),
                                              ef.w[grid.index(k2, j)]);
    ef.boundary_dr[j] = richardson_to_zero(grid.radius(k1), ef.dw_dr[grid.index(k1, j)], grid.radius(k2),
                                           ef.dw_dr[grid.index(k2, j)]);
  }
  return ef;
}

}  // namespace ahharm

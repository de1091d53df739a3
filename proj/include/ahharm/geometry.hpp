#pragma once

// Conformally compact metrics in normal boundary coordinates on T^m x (0, r*].
//
// Chart points are vectors (x^1 .. x^m, r); index m is the defining-function
// direction. The compactified metric is
//
//   gbar = dr^2 + ghat(x) + r^p k(x),   g = r^{-2} gbar,
//
// with ghat = e^{2 lambda(x)} delta, lambda(x) = A sin(2 pi x^1 / L_1) and
// k_ab(x) = c cos(2 pi x^1 / L_1) delta_ab (tangential block only).

#include "ahharm/core.hpp"

#include <string>
#include <vector>

namespace ahharm {

enum class BoundaryMetricKind { flat, conformal };
enum class CorrectionKind { none, quadratic, linear };

struct MetricSpec {
  int dim = 1;
  std::vector<double> lattice{2.0 * std::numbers::pi};
  BoundaryMetricKind boundary_kind = BoundaryMetricKind::flat;
  double conformal_amplitude = 0.0;
  CorrectionKind correction = CorrectionKind::none;
  double correction_amplitude = 0.0;
  double r_star = 4.0;

  static MetricSpec hyperbolic(int dim, double period = 2.0 * std::numbers::pi, double r_star = 4.0) {
    MetricSpec s;
    s.dim = dim;
    s.lattice.assign(dim, period);
    s.r_star = r_star;
    return s;
  }

  int chart_dim() const { return dim + 1; }

  int exponent() const { return correction == CorrectionKind::linear ? 1 : 2; }

  bool is_exact_model() const {
    return boundary_kind == BoundaryMetricKind::flat &&
           (correction == CorrectionKind::none || correction_amplitude == 0.0);
  }

  double min_period() const { return *std::min_element(lattice.begin(), lattice.end()); }

  double wave(double x1) const { return 2.0 * std::numbers::pi / lattice[0] * x1; }

  /// Conformal exponent lambda(x) of ghat and its first two x^1 derivatives.
  std::array<double, 3> lambda(const Vec& x) const {
    if (boundary_kind != BoundaryMetricKind::conformal) return {0.0, 0.0, 0.0};
    const double k = 2.0 * std::numbers::pi / lattice[0];
    const double a = conformal_amplitude;
    return {a * std::sin(k * x[0]), a * k * std::cos(k * x[0]), -a * k * k * std::sin(k * x[0])};
  }

  /// Correction profile c cos(2 pi x^1/L_1) and its x^1 derivative.
  std::array<double, 2> correction_profile(const Vec& x) const {
    if (correction == CorrectionKind::none) return {0.0, 0.0};
    const double k = 2.0 * std::numbers::pi / lattice[0];
    const double c = correction_amplitude;
    return {c * std::cos(k * x[0]), -c * k * std::sin(k * x[0])};
  }

  /// Conformal factor e^{lambda} bounds over the torus.
  double min_conformal_factor() const {
    return boundary_kind == BoundaryMetricKind::conformal ? std::exp(-std::abs(conformal_amplitude)) : 1.0;
  }

  void validate(const std::string& label = "metric") const;
};

/// Pointwise metric data at one chart point.
struct MetricJet {
  Vec point;
  Mat gbar;
  Mat gbar_inv;
  Christoffel christoffel_gbar;
  Christoffel christoffel_g;
};

/// ghat_ab(x): the boundary metric.
inline Mat boundary_metric(const MetricSpec& spec, const Vec& x) {
  const double e2l = std::exp(2.0 * spec.lambda(x)[0]);
  return Mat::Identity(spec.dim, spec.dim) * e2l;
}

/// gbar_ij at (x, r).
inline Mat compactified_metric(const MetricSpec& spec, const Vec& point) {
  const int m = spec.dim;
  const double r = point[m];
  Mat g = Mat::Zero(m + 1, m + 1);
  const double e2l = std::exp(2.0 * spec.lambda(point)[0]);
  const double rp = spec.exponent() == 1 ? r : r * r;
  const double kc = spec.correction_profile(point)[0];
  for (int a = 0; a < m; ++a) g(a, a) = e2l + rp * kc;
  g(m, m) = 1.0;
  return g;
}

/// Closed-form partial derivatives d_l gbar_ij, one matrix per l.
inline std::array<Mat, kMaxChartDim> compactified_metric_derivatives(const MetricSpec& spec,
                                                                     const Vec& point) {
  const int m = spec.dim;
  const double r = point[m];
  std::array<Mat, kMaxChartDim> d{};
  for (int l = 0; l <= m; ++l) d[l] = Mat::Zero(m + 1, m + 1);
  const auto lam = spec.lambda(point);
  const double e2l = std::exp(2.0 * lam[0]);
  const auto kc = spec.correction_profile(point);
  const int p = spec.exponent();
  const double rp = p == 1 ? r : r * r;
  const double drp = p == 1 ? 1.0 : 2.0 * r;
  for (int a = 0; a < m; ++a) {
    d[0](a, a) = 2.0 * lam[1] * e2l + rp * kc[1];
    d[m](a, a) = drp * kc[0];
  }
  return d;
}

/// Levi-Civita symbols from a metric, its inverse and its partial derivatives.
inline Christoffel levi_civita(const Mat& g_inv, const std::array<Mat, kMaxChartDim>& dg) {
  const int n = static_cast<int>(g_inv.rows());
  Christoffel gamma(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += g_inv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
        gamma(k, i, j) = gamma(k, j, i) = 0.5 * s;
      }
  return gamma;
}

/// X^k_ij = -(1/r)(d_i^k d_j^inf + d_j^k d_i^inf - gbar_ij gbar^{k inf}).
inline Christoffel conformal_shift(const Mat& gbar, const Mat& gbar_inv, double r) {
  const int n = static_cast<int>(gbar.rows());
  const int inf = n - 1;
  Christoffel x(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = -gbar(i, j) * gbar_inv(k, inf);
        if (i == k && j == inf) v += 1.0;
        if (j == k && i == inf) v += 1.0;
        x(k, i, j) = -v / r;
      }
  return x;
}

inline MetricJet eval_metric_jet(const MetricSpec& spec, const Vec& point) {
  const int m = spec.dim;
  const double r = point[m];
  if (!(r > 0.0) || r > spec.r_star * (1.0 + 1e-12))
    throw DomainError("eval_metric_jet: r outside (0, r_star] at " + format_point(point));
  MetricJet jet;
  jet.point = point;
  jet.gbar = compactified_metric(spec, point);
  Eigen::LLT<Mat> llt(jet.gbar);
  if (llt.info() != Eigen::Success)
    throw DegenerateMetricError("compactified metric not positive definite at " + format_point(point));
  jet.gbar_inv = llt.solve(Mat::Identity(m + 1, m + 1));
  jet.christoffel_gbar = levi_civita(jet.gbar_inv, compactified_metric_derivatives(spec, point));
  const Christoffel x = conformal_shift(jet.gbar, jet.gbar_inv, r);
  jet.christoffel_g = Christoffel(m + 1);
  for (int k = 0; k <= m; ++k) jet.christoffel_g.upper[k] = jet.christoffel_gbar.upper[k] + x.upper[k];
  return jet;
}

/// Physical metric g = r^{-2} gbar.
inline Mat physical_metric(const MetricSpec& spec, const Vec& point) {
  const double r = point[spec.dim];
  return compactified_metric(spec, point) / (r * r);
}

/// Boundary sampling lattice with n points per axis.
inline std::vector<Vec> boundary_samples(const std::vector<double>& lattice, int n) {
  const int m = static_cast<int>(lattice.size());
  std::size_t total = 1;
  for (int a = 0; a < m; ++a) total *= static_cast<std::size_t>(n);
  std::vector<Vec> pts;
  pts.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vec x(m);
    std::size_t rem = idx;
    for (int a = m - 1; a >= 0; --a) {
      x[a] = static_cast<double>(rem % n) * lattice[a] / n;
      rem /= n;
    }
    pts.push_back(x);
  }
  return pts;
}

inline void MetricSpec::validate(const std::string& label) const {
  if (dim < 1 || dim > kMaxBoundaryDim)
    throw ConfigError(label + ": dim must be in [1, " + std::to_string(kMaxBoundaryDim) + "]");
  if (static_cast<int>(lattice.size()) != dim) throw ConfigError(label + ": lattice needs one period per axis");
  for (double l : lattice)
    if (!(l > 0.0)) throw ConfigError(label + ": lattice periods must be positive");
  if (!(r_star > 0.0)) throw ConfigError(label + ": r_star must be positive");
  // ghat is pd by construction; gbar must stay pd up to r_star.
  const auto pts = boundary_samples(lattice, 16);
  for (const Vec& x : pts) {
    for (int s = 1; s <= 16; ++s) {
      Vec p(dim + 1);
      p.head(dim) = x;
      p[dim] = r_star * s / 16.0;
      Eigen::SelfAdjointEigenSolver<Mat> es(compactified_metric(*this, p));
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw DegenerateMetricError(label + ": compactified metric degenerate at " + format_point(p));
    }
  }
}

namespace detail {

/// 4th-order central difference step along coordinate l at a chart point.
inline double fd_step(const MetricSpec& spec, const Vec& point, int l) {
  return l == spec.dim ? 1e-2 * point[spec.dim] : 1e-3 * spec.lattice[l];
}

/// d_l Gamma^k_ij by 4th-order central differences of the closed-form symbols.
inline std::array<Christoffel, kMaxChartDim> christoffel_derivatives(const MetricSpec& spec, const Vec& point) {
  const int n = spec.chart_dim();
  std::array<Christoffel, kMaxChartDim> d{};
  for (int l = 0; l < n; ++l) {
    const double h = fd_step(spec, point, l);
    auto at = [&](double s) {
      Vec p = point;
      p[l] += s * h;
      return eval_metric_jet(spec, p).christoffel_g;
    };
    const Christoffel m2 = at(-2), m1 = at(-1), p1 = at(1), p2 = at(2);
    d[l] = Christoffel(n);
    for (int k = 0; k < n; ++k)
      d[l].upper[k] = (m2.upper[k] - 8.0 * m1.upper[k] + 8.0 * p1.upper[k] - p2.upper[k]) / (12.0 * h);
  }
  return d;
}

}  // namespace detail

/// Riemann tensor R^l_ijk of g (R(d_i, d_j) d_k = R^l_ijk d_l), indexed [l][i][j][k] flat.
struct RiemannTensor {
  int dim = 0;
  std::vector<double> data;
  double operator()(int l, int i, int j, int k) const { return data[((l * dim + i) * dim + j) * dim + k]; }
  double& operator()(int l, int i, int j, int k) { return data[((l * dim + i) * dim + j) * dim + k]; }
};

inline RiemannTensor riemann_tensor(const MetricSpec& spec, const Vec& point) {
  const int n = spec.chart_dim();
  const Christoffel gam = eval_metric_jet(spec, point).christoffel_g;
  const auto dgam = detail::christoffel_derivatives(spec, point);
  RiemannTensor rt{n, std::vector<double>(static_cast<std::size_t>(n * n * n * n), 0.0)};
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double v = dgam[i](l, j, k) - dgam[j](l, i, k);
          for (int p = 0; p < n; ++p) v += gam(l, i, p) * gam(p, j, k) - gam(l, j, p) * gam(p, i, k);
          rt(l, i, j, k) = v;
        }
  return rt;
}

/// Sectional curvature of g on the plane spanned by u and w at a chart point.
inline double sectional_curvature_probe(const MetricSpec& spec, const Vec& point, const Vec& u, const Vec& w) {
  const int n = spec.chart_dim();
  const double r = point[spec.dim];
  if (!(r > 0.0) || r > spec.r_star * (1.0 + 1e-12)) throw DomainError("sectional_curvature_probe: r outside (0, r_star]");
  const Mat g = physical_metric(spec, point);
  const double uu = u.dot(g * u), ww = w.dot(g * w), uw = u.dot(g * w);
  const double gram = uu * ww - uw * uw;
  if (gram < 1e-10 * std::max(1.0, uu * ww))
    throw DomainError("sectional_curvature_probe: degenerate plane (Gram determinant " + std::to_string(gram) + ")");
  const RiemannTensor rt = riemann_tensor(spec, point);
  double num = 0.0;
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double c = u[i] * w[j] * w[k];
          if (c == 0.0) continue;
          double gl = 0.0;
          for (int q = 0; q < n; ++q) gl += g(q, l) * u[q];
          num += c * gl * rt(l, i, j, k);
        }
  return num / gram;
}

/// Ric_jk = R^i_ijk.
inline Mat ricci_tensor(const MetricSpec& spec, const Vec& point) {
  const int n = spec.chart_dim();
  const RiemannTensor rt = riemann_tensor(spec, point);
  Mat ric = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i) ric(j, k) += rt(i, i, j, k);
  return 0.5 * (ric + ric.transpose());
}

/// sup over the boundary sampling lattice of |Ric(g) + m g|_g at radius r.
inline double asymptotic_einstein_residual(const MetricSpec& spec, double r, int samples_per_axis = 16) {
  if (!(r > 0.0) || r > spec.r_star) throw DomainError("asymptotic_einstein_residual: r outside (0, r_star]");
  const int m = spec.dim;
  double sup = 0.0;
  for (const Vec& x : boundary_samples(spec.lattice, samples_per_axis)) {
    Vec p(m + 1);
    p.head(m) = x;
    p[m] = r;
    const Mat g = physical_metric(spec, p);
    const Mat gi = g.inverse();
    const Mat t = ricci_tensor(spec, p) + static_cast<double>(m) * g;
    const double norm2 = (gi * t * gi * t.transpose()).trace();
    sup = std::max(sup, std::sqrt(std::max(0.0, norm2)));
  }
  return sup;
}

}  // namespace ahharm

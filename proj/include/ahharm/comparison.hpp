#pragma once

// Target distances (quotient d and lifted d~), the comparison ODE s'' + mu s = 0 with its
// Riccati form, Jacobi-field comparison certificates and the distance-Laplacian constants.

#include "ahharm/approx.hpp"
#include "ahharm/core.hpp"
#include "ahharm/geometry.hpp"

#include <limits>
#include <random>

namespace ahharm {

struct GeodesicError : SolverError {
  explicit GeodesicError(const std::string& w) : SolverError(w) {}
};

enum class DistanceMode { exact, numeric };

struct TargetDistance {
  DistanceMode mode = DistanceMode::exact;
  MetricSpec target;
  int rk_steps = 50;

  static TargetDistance make(const MetricSpec& t) {
    return {t.is_exact_model() ? DistanceMode::exact : DistanceMode::numeric, t, 50};
  }
};

/// arcosh(1 + (|dy|^2 + drho^2) / (2 rho rho')) in the flat upper half-space model.
inline double hyperbolic_distance(const Vec& p, const Vec& q) {
  const int n = static_cast<int>(p.size()) - 1;
  const double num = (p - q).squaredNorm();
  const double w = num / (2.0 * p[n] * q[n]);
  // arcosh(1 + w) = log(1 + w + sqrt(w (w + 2)))
  return std::log1p(w + std::sqrt(w * (w + 2.0)));
}

namespace detail {

/// Geodesic equation x'' = -Gamma(x)(x', x') as a first-order system.
inline void geodesic_rhs(const MetricSpec& t, const Vec& x, const Vec& v, Vec& dx, Vec& dv) {
  const double rho = x[x.size() - 1];
  if (!(rho > 0.0) || !(rho <= t.r_star)) throw GeodesicError("geodesic shooting left the target chart");
  const MetricJet jet = eval_metric_jet(t, x);
  const int n = static_cast<int>(x.size());
  dx = v;
  dv = Vec::Zero(n);
  for (int k = 0; k < n; ++k) dv[k] = -v.dot(jet.christoffel_g.upper[k] * v);
}

struct Shot {
  Vec end;
  double length = 0;
};

inline Shot shoot(const MetricSpec& t, const Vec& p, const Vec& v0, int steps) {
  if (!(p[p.size() - 1] <= t.r_star)) throw GeodesicError("geodesic endpoint outside the target chart");
  Vec x = p, v = v0;
  const double h = 1.0 / steps;
  double len = 0.0;
  auto speed = [&](const Vec& xx, const Vec& vv) {
    const double rho = xx[xx.size() - 1];
    if (!(rho > 0.0) || !(rho <= t.r_star)) throw GeodesicError("geodesic shooting left the target chart");
    return std::sqrt(std::max(0.0, vv.dot(physical_metric(t, xx) * vv)));
  };
  double s_prev = speed(x, v);
  for (int i = 0; i < steps; ++i) {
    Vec k1x, k1v, k2x, k2v, k3x, k3v, k4x, k4v;
    geodesic_rhs(t, x, v, k1x, k1v);
    geodesic_rhs(t, x + 0.5 * h * k1x, v + 0.5 * h * k1v, k2x, k2v);
    geodesic_rhs(t, x + 0.5 * h * k2x, v + 0.5 * h * k2v, k3x, k3v);
    geodesic_rhs(t, x + h * k3x, v + h * k3v, k4x, k4v);
    x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    const double s = speed(x, v);
    len += 0.5 * h * (s_prev + s);
    s_prev = s;
  }
  return {x, len};
}

/// Damped Newton on the initial velocity so that the geodesic from p reaches q at t = 1.
inline double numeric_geodesic_distance(const TargetDistance& td, const Vec& p, const Vec& q) {
  const int n = static_cast<int>(p.size());
  if ((p - q).norm() == 0.0) return 0.0;
  // continuation in the endpoint keeps Newton in its basin for far-apart points
  const int stages = 4;
  Vec v = (q - p) / stages;
  for (int s = 1; s <= stages; ++s) {
    if (s > 1) v *= static_cast<double>(s) / (s - 1);
    const Vec target = p + (static_cast<double>(s) / stages) * (q - p);
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      const Shot base = shoot(td.target, p, v, td.rk_steps);
      const Vec res = base.end - target;
      if (res.norm() <= 1e-11 * (1.0 + target.norm())) {
        ok = true;
        break;
      }
      Mat jac(n, n);
      for (int c = 0; c < n; ++c) {
        const double h = 1e-7 * std::max(1.0, std::abs(v[c]));
        Vec vp = v;
        vp[c] += h;
        jac.col(c) = (shoot(td.target, p, vp, td.rk_steps).end - base.end) / h;
      }
      const Vec step = jac.fullPivLu().solve(res);
      double damp = 1.0;
      for (int ls = 0; ls < 30; ++ls, damp *= 0.5) {
        try {
          const Vec vn = v - damp * step;
          if ((shoot(td.target, p, vn, td.rk_steps).end - target).norm() < res.norm()) {
            v = vn;
            break;
          }
        } catch (const GeodesicError&) {
        }
      }
    }
    if (!ok) throw GeodesicError("geodesic shooting did not converge between " + format_point(p) + " and " + format_point(q));
  }
  return shoot(td.target, p, v, td.rk_steps).length;
}

}  // namespace detail

/// d~ (unwrapped = true: raw lifted differences) or the quotient distance d (minimum over
/// lattice translates of q).
inline double distance(const TargetDistance& td, const Vec& p, const Vec& q, bool unwrapped) {
  const int n = td.target.dim;
  if (p.size() != n + 1 || q.size() != n + 1) throw ConfigError("distance: points must have n+1 coordinates");
  if (!(p[n] > 0.0) || !(q[n] > 0.0)) throw DomainError("distance: radial components must be positive");
  auto raw = [&](const Vec& qq) {
    return td.mode == DistanceMode::exact ? hyperbolic_distance(p, qq) : detail::numeric_geodesic_distance(td, p, qq);
  };
  if (unwrapped) return raw(q);
  Vec qm = q;
  for (int a = 0; a < n; ++a) {
    const double L = td.target.lattice[a];
    qm[a] = p[a] + detail::wrap_periodic(q[a] - p[a], L);
  }
  if (td.mode == DistanceMode::exact) return raw(qm);
  // the conformal factor can move the minimizer to a neighbouring translate
  double best = std::numeric_limits<double>::infinity();
  int total = 1;
  for (int a = 0; a < n; ++a) total *= 3;
  for (int code = 0; code < total; ++code) {
    Vec qt = qm;
    int c = code;
    for (int a = 0; a < n; ++a, c /= 3) qt[a] += (c % 3 - 1) * td.target.lattice[a];
    // translates whose geodesic leaves the chart are not minimizers within it
    try {
      best = std::min(best, raw(qt));
    } catch (const GeodesicError&) {
      if (qt == qm) throw;
    }
  }
  return best;
}

struct MapDistanceLevel {
  double r = 0;
  double sup_d = 0;
  double sup_d_tilde = 0;
};

struct MapDistanceReport {
  double sup_d = 0;
  double sup_d_tilde = 0;
  std::vector<MapDistanceLevel> levels;
  std::vector<double> d_tilde;  // per node of u's grid
};

/// Pointwise d and d~ between u and v on the grid of u (v's grid must contain u's levels).
inline MapDistanceReport map_distance(const TargetDistance& td, const MapField& u, const MapField& v) {
  if (u.homotopy != v.homotopy) throw HomotopyError("map_distance: maps lie in different homotopy classes");
  const SlabGrid& g = u.grid;
  MapDistanceReport rep;
  rep.d_tilde.assign(g.size(), 0.0);
  std::vector<double> dq(g.size(), 0.0);
  parallel_for(g.boundary_size(), [&](std::size_t j) {
    for (int k = 0; k < g.levels(); ++k) {
      const int kv = v.grid.level_of(g.radius(k));
      if (kv < 0) throw ConfigError("map_distance: grids do not share radial levels");
      const Vec pu = u.point(k, j), pv = v.point(kv, j);
      rep.d_tilde[g.index(k, j)] = distance(td, pu, pv, true);
      dq[g.index(k, j)] = distance(td, pu, pv, false);
    }
  });
  for (int k = 0; k < g.levels(); ++k) {
    MapDistanceLevel lv{g.radius(k), 0, 0};
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      lv.sup_d = std::max(lv.sup_d, dq[g.index(k, j)]);
      lv.sup_d_tilde = std::max(lv.sup_d_tilde, rep.d_tilde[g.index(k, j)]);
    }
    rep.sup_d = std::max(rep.sup_d, lv.sup_d);
    rep.sup_d_tilde = std::max(rep.sup_d_tilde, lv.sup_d_tilde);
    rep.levels.push_back(lv);
  }
  const double half = 0.5 * *std::min_element(td.target.lattice.begin(), td.target.lattice.end());
  if (!(rep.sup_d_tilde < half))
    throw HomotopyError("lifted distance " + std::to_string(rep.sup_d_tilde) +
                        " reaches half the shortest target period; the lift is ambiguous");
  return rep;
}

/// Comparison solution s'' + mu s = 0, s(0) = 0, s'(0) = 1 and the Riccati cross-check
/// q' = -mu - q^2 for q = s'/s.
struct ComparisonODE {
  double length = 0;
  std::vector<double> t, mu, s, sp, q_riccati;

  double q(std::size_t i) const { return sp[i] / s[i]; }
};

inline ComparisonODE solve_comparison_ode(const std::function<double(double)>& mu, double length, int steps) {
  if (!(length > 0.0) || steps < 2) throw ConfigError("comparison ODE needs L > 0 and at least 2 steps");
  const double h = length / steps;
  auto m = [&](double t) {
    const double v = mu(t);
    if (v > 0.0) throw DomainError("comparison ODE requires mu <= 0; mu(" + std::to_string(t) + ") = " + std::to_string(v));
    return v;
  };
  ComparisonODE ode;
  ode.length = length;
  ode.t.resize(steps + 1);
  ode.mu.resize(steps + 1);
  ode.s.resize(steps + 1);
  ode.sp.resize(steps + 1);
  ode.q_riccati.assign(steps + 1, std::numeric_limits<double>::infinity());
  double s = 0.0, sp = 1.0;
  for (int i = 0; i <= steps; ++i) {
    const double t = i * h;
    ode.t[i] = t;
    ode.mu[i] = m(t);
    ode.s[i] = s;
    ode.sp[i] = sp;
    if (i == steps) break;
    const double k1s = sp, k1p = -m(t) * s;
    const double k2s = sp + 0.5 * h * k1p, k2p = -m(t + 0.5 * h) * (s + 0.5 * h * k1s);
    const double k3s = sp + 0.5 * h * k2p, k3p = -m(t + 0.5 * h) * (s + 0.5 * h * k2s);
    const double k4s = sp + h * k3p, k4p = -m(t + h) * (s + h * k3s);
    s += h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s);
    sp += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
  }
  for (int i = 1; i <= steps; ++i)
    if (!(ode.s[i] > 0.0) || !(ode.sp[i] > 0.0))
      throw DomainError("comparison solution lost positivity at t = " + std::to_string(ode.t[i]));
  // Riccati form started from the linear solution away from the 1/t singularity at t = 0
  const int i0 = std::max(1, steps / 16);
  const int sub = 8;
  const double hs = h / sub;
  double q = ode.sp[i0] / ode.s[i0];
  ode.q_riccati[i0] = q;
  auto f = [&](double tt, double qq) { return -m(tt) - qq * qq; };
  for (int i = i0; i < steps; ++i)
    for (int k = 0; k < sub; ++k) {
      const double t = ode.t[i] + k * hs;
      const double k1 = f(t, q), k2 = f(t + 0.5 * hs, q + 0.5 * hs * k1), k3 = f(t + 0.5 * hs, q + 0.5 * hs * k2),
                   k4 = f(t + hs, q + hs * k3);
      q += hs / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      if (k + 1 == sub) ode.q_riccati[i + 1] = q;
    }
  return ode;
}

/// Samples of a normal Jacobi field with Y(0) = 0: |Y|(t), <Y, Y'>(t) and |Y|'(0).
struct JacobiSamples {
  std::vector<double> norm;
  std::vector<double> inner;
  double initial_rate = 0;
};

/// Normal Jacobi field amplitude * sn_K(t) E in the constant-curvature-K model on the ODE's nodes.
inline JacobiSamples constant_curvature_jacobi(const ComparisonODE& ode, double curvature, double amplitude) {
  JacobiSamples js;
  js.initial_rate = std::abs(amplitude);
  for (double t : ode.t) {
    double sn, cs;
    if (curvature < 0) {
      const double k = std::sqrt(-curvature);
      sn = std::sinh(k * t) / k;
      cs = std::cosh(k * t);
    } else if (curvature > 0) {
      const double k = std::sqrt(curvature);
      sn = std::sin(k * t) / k;
      cs = std::cos(k * t);
    } else {
      sn = t;
      cs = 1.0;
    }
    js.norm.push_back(std::abs(amplitude) * sn);
    js.inner.push_back(amplitude * amplitude * sn * cs);
  }
  return js;
}

struct ComparisonCertificate {
  bool holds = true;
  double worst_margin_rate = std::numeric_limits<double>::infinity();   // |Y(t)|/s(t) - |Y|'(0)
  double worst_margin_inner = std::numeric_limits<double>::infinity();  // <Y,Y'> - (s'/s)|Y|^2
  double worst_t = 0;
  std::size_t violations = 0;
};

/// Checks |Y|'(0) <= |Y(t)|/s(t) and <Y, Y'>(t) >= (s'/s)|Y|^2 on all nodes t > 0.
inline ComparisonCertificate comparison_bounds(const ComparisonODE& ode, const JacobiSamples& y, double rel_tol = 1e-8,
                                               bool throw_on_violation = false) {
  ComparisonCertificate c;
  for (std::size_t i = 1; i < ode.t.size(); ++i) {
    const double m1 = y.norm[i] / ode.s[i] - y.initial_rate;
    const double m2 = y.inner[i] - ode.q(i) * y.norm[i] * y.norm[i];
    const double tol1 = rel_tol * std::max(1.0, y.initial_rate);
    const double tol2 = rel_tol * std::max(1.0, std::abs(y.inner[i]));
    if (m1 < c.worst_margin_rate) c.worst_margin_rate = m1;
    if (m2 < c.worst_margin_inner) c.worst_margin_inner = m2;
    if (m1 < -tol1 || m2 < -tol2) {
      ++c.violations;
      if (c.holds) c.worst_t = ode.t[i];
      c.holds = false;
    }
  }
  if (!c.holds && throw_on_violation)
    throw CertificationError("comparison inequality violated at t = " + std::to_string(c.worst_t));
  return c;
}

struct HessianConstants {
  double c = 0.25;
  std::function<double(double)> l = [](double diam) { return diam + 4.0; };
};

inline HessianConstants hessian_lower_bound_constants() { return {}; }

/// Coordinate gradient and covariant Hessian of the exact-model distance on N x N,
/// coordinates (y1, rho1, y2, rho2).
struct DistanceHessian {
  double d = 0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

inline DistanceHessian hyperbolic_distance_hessian(const Vec& p1, const Vec& p2) {
  const int n1 = static_cast<int>(p1.size()), dim = 2 * n1, ir1 = n1 - 1, ir2 = 2 * n1 - 1;
  const double r1 = p1[ir1], r2 = p2[n1 - 1];
  const double nsq = (p1 - p2).squaredNorm();
  const double pp = 1.0 / (2.0 * r1 * r2);
  const double qv = nsq * pp;
  Eigen::VectorXd dn = Eigen::VectorXd::Zero(dim), dp = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd ddn = Eigen::MatrixXd::Zero(dim, dim), ddp = Eigen::MatrixXd::Zero(dim, dim);
  for (int a = 0; a < n1; ++a) {
    const double dl = p1[a] - p2[a];
    dn[a] = 2 * dl;
    dn[n1 + a] = -2 * dl;
    ddn(a, a) = ddn(n1 + a, n1 + a) = 2;
    ddn(a, n1 + a) = ddn(n1 + a, a) = -2;
  }
  dp[ir1] = -pp / r1;
  dp[ir2] = -pp / r2;
  ddp(ir1, ir1) = 2 * pp / (r1 * r1);
  ddp(ir2, ir2) = 2 * pp / (r2 * r2);
  ddp(ir1, ir2) = ddp(ir2, ir1) = pp / (r1 * r2);
  const Eigen::VectorXd dq = dn * pp + nsq * dp;
  const Eigen::MatrixXd ddq = ddn * pp + dn * dp.transpose() + dp * dn.transpose() + nsq * ddp;
  const double w = 1.0 + qv;
  const double s = std::sqrt(qv * (qv + 2.0));
  const double d1 = 1.0 / s, d2 = -w / (s * s * s);
  DistanceHessian dh;
  dh.d = std::log1p(qv + s);
  dh.grad = d1 * dq;
  dh.hess = d2 * dq * dq.transpose() + d1 * ddq;
  // product Levi-Civita connection of rho^{-2}(drho^2 + dy^2) on each factor
  for (int f = 0; f < 2; ++f) {
    const int o = f * n1, ir = o + n1 - 1;
    const double rho = f == 0 ? r1 : r2;
    for (int a = 0; a < n1 - 1; ++a) {
      dh.hess(o + a, ir) += dh.grad[o + a] / rho;  // Gamma^a_{a rho} = -1/rho
      dh.hess(ir, o + a) += dh.grad[o + a] / rho;
      dh.hess(o + a, o + a) -= dh.grad[ir] / rho;  // Gamma^rho_{aa} = 1/rho
    }
    dh.hess(ir, ir) += dh.grad[ir] / rho;  // Gamma^rho_{rho rho} = -1/rho
  }
  return dh;
}

struct HessianDiagnostic {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double min_ratio = std::numeric_limits<double>::infinity();  // tr psi* Hess d~ / e(v)
};

/// Samples configurations in the exact model with d~(u(p), v(p)) >= l: du arbitrary, dv a
/// conformal map (scaled isometry) of T_pM onto T_{v(p)}N, m = n. Checks tr_g psi* Hess d~ >= c e(v).
inline HessianDiagnostic hessian_trace_diagnostic(int dim, std::size_t count, std::uint64_t seed, double l = 4.0,
                                                  double c = 0.25) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n1 = dim + 1;
  HessianDiagnostic hd;
  while (hd.samples < count) {
    Vec p1(n1), p2(n1);
    for (int a = 0; a < n1 - 1; ++a) {
      p1[a] = 20 * (unit(rng) - 0.5);
      p2[a] = 20 * (unit(rng) - 0.5);
    }
    p1[n1 - 1] = std::exp(4 * (unit(rng) - 0.5));
    p2[n1 - 1] = std::exp(4 * (unit(rng) - 0.5));
    const DistanceHessian dh = hyperbolic_distance_hessian(p1, p2);
    if (dh.d < l) continue;
    Eigen::MatrixXd a(n1, n1);
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n1; ++j) a(i, j) = gauss(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::MatrixXd orth = qr.householderQ();
    const double lam = std::exp(gauss(rng));
    Eigen::MatrixXd du(n1, n1);
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n1; ++j) du(i, j) = gauss(rng) * p1[n1 - 1];
    const Eigen::MatrixXd dv = lam * p2[n1 - 1] * orth;  // h-orthonormal frame -> coordinates
    double tr = 0.0;
    for (int i = 0; i < n1; ++i) {
      Eigen::VectorXd vv(2 * n1);
      vv << du.col(i), dv.col(i);
      tr += vv.dot(dh.hess * vv);
    }
    const double ev = lam * lam * n1;
    const double ratio = tr / ev;
    hd.min_ratio = std::min(hd.min_ratio, ratio);
    if (!(tr >= c * ev)) ++hd.violations;
    ++hd.samples;
  }
  return hd;
}

/// f(x) = (cosh(x/2) - 1) / (2 sinh(x/2)), with f(0+) = 0.
inline double laplacian_bound_f(double x) {
  if (x <= 0.0) return 0.0;
  // (cosh a - 1) / sinh a = tanh(a / 2), free of cancellation
  return 0.5 * std::tanh(x / 4.0);
}

/// Root of f(d) = 2 eps / m by bisection; +infinity when 2 eps / m >= sup f = 1/2.
inline double d_epsilon(double eps, int m) {
  if (!(eps > 0.0) || m < 1) throw DomainError("d_epsilon needs eps > 0 and m >= 1");
  const double target = 2.0 * eps / m;
  if (target >= 0.5) return std::numeric_limits<double>::infinity();
  double lo = 0.0, hi = 1.0;
  while (laplacian_bound_f(hi) < target) {
    hi *= 2.0;
    if (hi > 1e300) return std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (laplacian_bound_f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// kappa (cosh(kappa L) - 1) / sinh(kappa L).
inline double kappa_bound(double kappa, double length) {
  if (!(kappa > 0.0) || !(length > 0.0)) throw DomainError("kappa_bound needs kappa > 0 and L > 0");
  const double x = kappa * length;
  if (x > 700.0) return kappa * std::tanh(0.5 * x);
  return kappa * (std::cosh(x) - 1.0) / std::sinh(x);
}

/// Sampled diameter of the region where some coordinate-plane curvature exceeds -1/2;
/// zero for the exact model.
inline double curvature_compact_diameter(const TargetDistance& td, int samples_per_axis, const std::vector<double>& rho_levels) {
  if (td.target.is_exact_model()) return 0.0;
  const int n1 = td.target.chart_dim();
  std::vector<Vec> hot;
  for (const Vec& y : boundary_samples(td.target.lattice, samples_per_axis))
    for (double rho : rho_levels) {
      Vec p(n1);
      p.head(n1 - 1) = y;
      p[n1 - 1] = rho;
      double kmax = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n1; ++i)
        for (int j = i + 1; j < n1; ++j)
          kmax = std::max(kmax, sectional_curvature_probe(td.target, p, Vec::Unit(n1, i), Vec::Unit(n1, j)));
      if (kmax > -0.5) hot.push_back(p);
    }
  double diam = 0.0;
  for (std::size_t i = 0; i < hot.size(); ++i)
    for (std::size_t j = i + 1; j < hot.size(); ++j) diam = std::max(diam, distance(td, hot[i], hot[j], false));
  return diam;
}

}  // namespace ahharm

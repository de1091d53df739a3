#include "ahharm/comparison.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ahharm;

namespace {

Vec pt(std::initializer_list<double> v) {
  Vec p(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

}  // namespace

TEST(Distance, ExactModelValues) {
  const TargetDistance td = TargetDistance::make(MetricSpec::hyperbolic(1));
  EXPECT_NEAR(distance(td, pt({0, 1}), pt({0, std::exp(1.7)}), true), 1.7, 1e-13);
  // points at equal height: arcosh(1 + dy^2 / (2 rho^2))
  EXPECT_NEAR(distance(td, pt({0, 0.5}), pt({1, 0.5}), true), std::acosh(1.0 + 1.0 / 0.5), 1e-13);
  const Vec p = pt({0.3, 0.7}), q = pt({2.0, 1.3});
  EXPECT_DOUBLE_EQ(distance(td, p, q, true), distance(td, q, p, true));
  EXPECT_EQ(distance(td, p, p, true), 0.0);
  EXPECT_THROW(distance(td, pt({0, -1}), p, true), DomainError);
}

TEST(Distance, QuotientUsesMinimalImage) {
  const TargetDistance td = TargetDistance::make(MetricSpec::hyperbolic(1));
  const double L = 2 * std::numbers::pi;
  const Vec p = pt({0.1, 0.4}), q = pt({L - 0.1, 0.4});
  EXPECT_NEAR(distance(td, p, q, false), hyperbolic_distance(p, pt({-0.1, 0.4})), 1e-13);
  EXPECT_GT(distance(td, p, q, true), distance(td, p, q, false));
  EXPECT_NEAR(distance(td, p, pt({0.1 + 3 * L, 0.4}), false), 0.0, 1e-12);
}

TEST(Distance, NumericGeodesicMatchesClosedForm) {
  TargetDistance td = TargetDistance::make(MetricSpec::hyperbolic(1, 2 * std::numbers::pi, 50.0));
  td.mode = DistanceMode::numeric;
  for (const auto& [p, q] : {std::pair{pt({0, 1}), pt({1, 2})}, std::pair{pt({0, 0.5}), pt({1.5, 0.5})},
                             std::pair{pt({0.2, 1.0}), pt({0.2, 3.0})}}) {
    EXPECT_NEAR(distance(td, p, q, true), hyperbolic_distance(p, q), 1e-6) << format_point(p) << format_point(q);
  }
  TargetDistance td2 = TargetDistance::make(MetricSpec::hyperbolic(2, 2 * std::numbers::pi, 50.0));
  td2.mode = DistanceMode::numeric;
  const Vec p = pt({0, 0, 1}), q = pt({0.7, -0.4, 1.5});
  EXPECT_NEAR(distance(td2, p, q, true), hyperbolic_distance(p, q), 1e-6);
}

TEST(Distance, PerturbedTargetIsNumericAndNearModel) {
  MetricSpec t = MetricSpec::hyperbolic(1);
  t.boundary_kind = BoundaryMetricKind::conformal;
  t.conformal_amplitude = 0.05;
  const TargetDistance td = TargetDistance::make(t);
  EXPECT_EQ(td.mode, DistanceMode::numeric);
  const Vec p = pt({0.0, 0.5}), q = pt({0.8, 0.9});
  const double d = distance(td, p, q, false);
  EXPECT_NEAR(d, hyperbolic_distance(p, q), 0.2);
  EXPECT_LE(d, distance(td, p, q, true) + 1e-9);
}

TEST(ComparisonODE, ConstantCurvatureClosedForm) {
  const ComparisonODE ode = solve_comparison_ode([](double) { return -1.0; }, 5.0, 2000);
  for (std::size_t i = 1; i < ode.t.size(); i += 97) {
    const double t = ode.t[i];
    EXPECT_NEAR(ode.s[i], std::sinh(t), 1e-9 * std::cosh(t));
    EXPECT_NEAR(ode.q(i), 1.0 / std::tanh(t), 1e-8);
    if (std::isfinite(ode.q_riccati[i])) {
      EXPECT_NEAR(ode.q_riccati[i], 1.0 / std::tanh(t), 1e-6);
    }
  }
  const ComparisonODE flat = solve_comparison_ode([](double) { return 0.0; }, 3.0, 300);
  EXPECT_NEAR(flat.s.back(), 3.0, 1e-12);
  EXPECT_THROW(solve_comparison_ode([](double t) { return t > 1 ? 0.1 : -1.0; }, 2.0, 100), DomainError);
  EXPECT_THROW(solve_comparison_ode([](double) { return -1.0; }, 0.0, 100), ConfigError);
}

TEST(ComparisonODE, WeakerCurvatureBoundLowersCertificate) {
  for (double diam : {0.0, 1.0, 3.0}) {
    auto mu_exact = [diam](double t) { return t < diam ? 0.0 : -1.0; };
    auto mu_upper = [diam](double t) { return t < diam ? 0.0 : -0.5; };
    const double L = diam + 4.0;
    const int steps = 4000;
    const ComparisonODE a = solve_comparison_ode(mu_exact, L, steps), b = solve_comparison_ode(mu_upper, L, steps);
    for (std::size_t i = 1; i < a.t.size(); ++i) {
      ASSERT_LE(b.q(i), a.q(i) + 1e-12);
      ASSERT_LE(b.s[i], a.s[i] + 1e-12);
    }
  }
}

TEST(ComparisonODE, HessianBoundConstants) {
  const HessianConstants hc = hessian_lower_bound_constants();
  EXPECT_EQ(hc.c, 0.25);
  for (double diam : {0.0, 0.5, 2.0, 6.0}) {
    const double L = hc.l(diam);
    EXPECT_DOUBLE_EQ(L, diam + 4.0);
    // breakpoint on a node
    const int steps = static_cast<int>(std::round(L * 1000));
    const ComparisonODE ode = solve_comparison_ode([diam](double t) { return t < diam ? 0.0 : -0.5; }, L, steps);
    EXPECT_GE(ode.q(ode.t.size() - 1), 2 * hc.c);
    EXPECT_GE(ode.s.back(), L);
    EXPECT_GE(ode.s.back(), 1.0 / hc.c);
  }
}

TEST(ComparisonBounds, JacobiFieldsAgainstModels) {
  const ComparisonODE sharp = solve_comparison_ode([](double) { return -1.0; }, 4.0, 800);
  const ComparisonODE weak = solve_comparison_ode([](double) { return -0.5; }, 4.0, 800);
  const ComparisonODE wrong = solve_comparison_ode([](double) { return -2.0; }, 4.0, 800);
  for (double amp : {0.3, 1.0, 2.5}) {
    EXPECT_TRUE(comparison_bounds(sharp, constant_curvature_jacobi(sharp, -1.0, amp)).holds);
    const ComparisonCertificate c = comparison_bounds(weak, constant_curvature_jacobi(weak, -1.0, amp));
    EXPECT_TRUE(c.holds);
    EXPECT_GT(c.worst_margin_inner, -1e-9);
    const ComparisonCertificate bad = comparison_bounds(wrong, constant_curvature_jacobi(wrong, -1.0, amp));
    EXPECT_FALSE(bad.holds);
    EXPECT_GT(bad.worst_t, 0.0);
  }
  EXPECT_THROW(comparison_bounds(wrong, constant_curvature_jacobi(wrong, -1.0, 1.0), 1e-8, true), CertificationError);
}

TEST(DistanceHessian, GradientMatchesFiniteDifferences) {
  const Vec p1 = pt({0.2, -0.3, 0.8}), p2 = pt({1.1, 0.4, 1.9});
  const DistanceHessian dh = hyperbolic_distance_hessian(p1, p2);
  EXPECT_NEAR(dh.d, hyperbolic_distance(p1, p2), 1e-14);
  const double h = 1e-6;
  for (int c = 0; c < 6; ++c) {
    Vec a = p1, b = p2, a2 = p1, b2 = p2;
    (c < 3 ? a[c] : b[c - 3]) += h;
    (c < 3 ? a2[c] : b2[c - 3]) -= h;
    EXPECT_NEAR(dh.grad[c], (hyperbolic_distance(a, b) - hyperbolic_distance(a2, b2)) / (2 * h), 1e-8);
  }
  EXPECT_LT((dh.hess - dh.hess.transpose()).norm(), 1e-12);
}

TEST(DistanceHessian, VerticalGeodesicClosedForm) {
  const double L = 2.3, r1 = 0.6, r2 = r1 * std::exp(L);
  const Vec p1 = pt({0.4, r1}), p2 = pt({0.4, r2});
  const DistanceHessian dh = hyperbolic_distance_hessian(p1, p2);
  Eigen::VectorXd along(4);
  along << 0, r1, 0, r2;
  EXPECT_NEAR(along.dot(dh.hess * along), 0.0, 1e-12);
  for (const auto& [a, b] : {std::pair{1.0, 0.0}, std::pair{0.0, 1.0}, std::pair{1.0, 1.0}, std::pair{0.7, -1.3}}) {
    Eigen::VectorXd v(4);
    v << r1 * a, 0, r2 * b, 0;
    const double expect = (a * a + b * b) / std::tanh(L) - 2 * a * b / std::sinh(L);
    EXPECT_NEAR(v.dot(dh.hess * v), expect, 1e-11);
  }
}

TEST(DistanceHessian, TraceDiagnosticExactModel) {
  for (int dim : {1, 2}) {
    const HessianDiagnostic hd = hessian_trace_diagnostic(dim, 1000, 17 + dim);
    EXPECT_EQ(hd.samples, 1000u);
    EXPECT_EQ(hd.violations, 0u);
    EXPECT_GE(hd.min_ratio, 0.25);
  }
}

TEST(LaplacianBound, FAndDEpsilon) {
  for (double x : {0.01, 0.5, 4.0, 20.0, 100.0}) {
    const double direct = (std::cosh(x / 2) - 1) / (2 * std::sinh(x / 2));
    EXPECT_NEAR(laplacian_bound_f(x), direct, 1e-9 * direct);
  }
  EXPECT_NEAR(laplacian_bound_f(1e-6), 1e-6 / 8, 1e-20);
  EXPECT_EQ(laplacian_bound_f(0.0), 0.0);
  for (int m : {1, 2, 3})
    for (double eps : {0.01, 0.1, 0.2}) {
      if (4 * eps / m >= 1) continue;
      const double d = d_epsilon(eps, m);
      EXPECT_NEAR(d, 4 * std::atanh(4 * eps / m), 1e-10 * d);
      EXPECT_NEAR(laplacian_bound_f(d), 2 * eps / m, 1e-13);
    }
  EXPECT_TRUE(std::isinf(d_epsilon(0.25, 1)));
  EXPECT_TRUE(std::isinf(d_epsilon(0.9, 2)));
  EXPECT_THROW(d_epsilon(0.0, 1), DomainError);
}

TEST(LaplacianBound, KappaBound) {
  for (double k : {0.5, 1.0, 2.0})
    for (double L : {0.1, 1.0, 4.0, 50.0}) {
      const double direct = k * (std::cosh(k * L) - 1) / std::sinh(k * L);
      EXPECT_NEAR(kappa_bound(k, L), direct, 1e-13 * k);
      EXPECT_NEAR(kappa_bound(k, L), k * std::tanh(k * L / 2), 1e-13 * k);
    }
  EXPECT_NEAR(kappa_bound(1.0, 1e4), 1.0, 1e-15);
  EXPECT_THROW(kappa_bound(-1, 1), DomainError);
}

TEST(MapDistance, DilationAndAmbiguity) {
  const SlabGrid g = SlabGrid::geometric({2 * std::numbers::pi}, {16}, 0.8, 0.1, 7);
  const std::vector<double> tl{2 * std::numbers::pi};
  const IntMat id = IntMat::Identity(1, 1);
  const MapField u = sample_map(g, tl, id, [](const Vec& x, double r) { return pt({x[0], r}); });
  const MapField v = sample_map(g, tl, id, [](const Vec& x, double r) { return pt({x[0], 1.5 * r}); });
  const TargetDistance td = TargetDistance::make(MetricSpec::hyperbolic(1));
  const MapDistanceReport rep = map_distance(td, u, v);
  EXPECT_NEAR(rep.sup_d_tilde, std::log(1.5), 1e-12);
  EXPECT_NEAR(rep.sup_d, std::log(1.5), 1e-12);
  EXPECT_EQ(rep.levels.size(), 7u);
  const MapField far = sample_map(g, tl, id, [](const Vec& x, double r) { return pt({x[0] + 3.0, r}); });
  EXPECT_THROW(map_distance(td, u, far), HomotopyError);
  const MapField other = sample_map(g, tl, 2 * id, [](const Vec& x, double r) { return pt({2 * x[0], r}); });
  EXPECT_THROW(map_distance(td, u, other), HomotopyError);
}

TEST(MapDistance, CompactSetDiameter) {
  const std::vector<double> rho{0.2, 0.5, 1.0, 2.0};
  EXPECT_EQ(curvature_compact_diameter(TargetDistance::make(MetricSpec::hyperbolic(1)), 8, rho), 0.0);
  MetricSpec t = MetricSpec::hyperbolic(1);
  t.correction = CorrectionKind::quadratic;
  t.correction_amplitude = 0.05;
  const double d = curvature_compact_diameter(TargetDistance::make(t), 4, rho);
  EXPECT_GE(d, 0.0);
  EXPECT_TRUE(std::isfinite(d));
}

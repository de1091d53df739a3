#include "ahharm/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ahharm;

namespace {

const double kTwoPi = 2 * std::numbers::pi;

struct Problem {
  MetricSpec spec;
  SlabGrid grid;
  BoundaryMap f;
  MapField v;
};

Problem sine_setup(double amplitude, int nodes = 32, int levels = 17, double r_min = 0.05) {
  Problem s{MetricSpec::hyperbolic(1), SlabGrid::geometric({kTwoPi}, {nodes}, 0.8, r_min, levels),
          BoundaryMap::identity({kTwoPi}), {}};
  s.f.perturbation = PerturbationKind::sine;
  s.f.amplitude = amplitude;
  const KernelContext ctx(s.spec, {r_min < 0.02 ? 1024 : 512}, r_min);
  s.v = build_approximate_solution(s.f, s.spec, s.spec, ctx, s.grid);
  return s;
}

/// sin of the slab's log-radius, vanishing on both walls.
double interior_bump(const SlabGrid& g, int k) {
  if (g.is_wall(k)) return 0.0;
  const double t = std::log(g.radius(k) / g.r_min()) / std::log(g.r_max() / g.r_min());
  return std::sin(std::numbers::pi * t);
}

MapField perturb(const MapField& v, double amp) {
  MapField out = v;
  const SlabGrid& g = v.grid;
  for (int k = 0; k < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      const Vec x = g.boundary_point(j);
      const double b = amp * interior_bump(g, k) * (1 + std::cos(x[0]));
      for (int c = 0; c < out.n(); ++c) out.at(c, k, j) += b;
      out.at(out.n(), k, j) *= std::exp(b);
    }
  return out;
}

}  // namespace

TEST(Flow, VacuousToleranceReturnsSeed) {
  const Problem s = sine_setup(0.2);
  FlowOptions opt;
  opt.tol = std::numeric_limits<double>::infinity();
  const FlowState st = flow_to_harmonic(s.v, s.spec, s.spec, 0.05, opt);
  EXPECT_EQ(st.step, 0);
  EXPECT_EQ(st.u.comp, s.v.comp);
}

TEST(Flow, IdentityDataConvergesToIdentity) {
  const Problem s = sine_setup(0.0, 64, 25, 0.0125);
  const FlowState st = flow_to_harmonic(s.v, s.spec, s.spec, 0.0125, FlowOptions{});
  EXPECT_LE(st.tension_sup, 1e-6);
  double err = 0.0;
  for (int k = 0; k < st.u.grid.levels(); ++k)
    for (std::size_t j = 0; j < st.u.grid.boundary_size(); ++j) {
      err = std::max(err, std::abs(st.u.at(0, k, j) - st.u.grid.boundary_point(j)[0]));
      err = std::max(err, std::abs(st.u.rho(k, j) - st.u.grid.radius(k)));
    }
  EXPECT_LE(err, 1e-3);
}

TEST(Flow, PerturbedSeedReturnsToIsometry) {
  // m = n = 2, A = [[1,1],[0,1]]: u = (Ax, sqrt(ehat/m) r) with ehat = |A|^2 = 3
  const MetricSpec spec = MetricSpec::hyperbolic(2);
  const SlabGrid g = SlabGrid::geometric({kTwoPi, kTwoPi}, {12, 12}, 0.8, 0.1, 10);
  IntMat a(2, 2);
  a << 1, 1, 0, 1;
  const double c = std::sqrt(3.0 / 2.0);
  auto iso = [&](const Vec& x, double r) {
    Vec p(3);
    p << x[0] + x[1], x[1], c * r;
    return p;
  };
  const MapField exact = sample_map(g, {kTwoPi, kTwoPi}, a, iso);
  const TensionField tf0 = tension(exact, spec, spec);
  for (const auto& comp : tf0.tau)
    for (double t : comp) ASSERT_LT(std::abs(t), 1e-10);
  const FlowState st = flow_to_harmonic(perturb(exact, 0.05), spec, spec, 0.1, FlowOptions{});
  double err = 0.0;
  for (std::size_t c2 = 0; c2 < exact.comp.size(); ++c2)
    for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(st.u.comp[c2][i] - exact.comp[c2][i]));
  EXPECT_LE(err, 1e-3);
  EXPECT_GT(st.step, 0);
}

TEST(Flow, DirichletRowsAndMonotoneResidual) {
  const Problem s = sine_setup(0.2);
  FlowOptions opt;
  opt.history_size = 1000;
  const FlowState st = flow_to_harmonic(s.v, s.spec, s.spec, 0.1, opt);
  const MapField seed = restrict_to_slab(s.v, 0.1);
  const SlabGrid& g = st.u.grid;
  for (std::size_t c = 0; c < seed.comp.size(); ++c)
    for (int k : {0, g.levels() - 1})
      for (std::size_t j = 0; j < g.boundary_size(); ++j)
        ASSERT_EQ(st.u.at(static_cast<int>(c), k, j), seed.at(static_cast<int>(c), k, j));
  ASSERT_GE(st.history.size(), 2u);
  for (std::size_t i = 1; i < st.history.size(); ++i) EXPECT_LE(st.history[i].tension_sup, st.history[i - 1].tension_sup);
  EXPECT_EQ(st.clamp_events, 0);

  // maximum principle for rho: stays between its wall extremes
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int k : {0, g.levels() - 1})
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      lo = std::min(lo, st.u.rho(k, j));
      hi = std::max(hi, st.u.rho(k, j));
    }
  for (int k = 0; k < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      ASSERT_GE(st.u.rho(k, j), lo * (1 - 1e-12));
      ASSERT_LE(st.u.rho(k, j), hi * (1 + 1e-12));
    }
}

TEST(Flow, CheckpointResumeIsBitIdentical) {
  const Problem s = sine_setup(0.2);
  FlowOptions opt;
  const FlowState full = flow_to_harmonic(s.v, s.spec, s.spec, 0.1, opt);
  ASSERT_GT(full.step, 300);
  std::optional<FlowState> saved;
  opt.checkpoint_every = 200;
  opt.on_checkpoint = [&](const FlowState& st) {
    if (!saved) saved = st;
  };
  flow_to_harmonic(s.v, s.spec, s.spec, 0.1, opt);
  ASSERT_TRUE(saved.has_value());
  EXPECT_EQ(saved->step, 200);
  const FlowState resumed = flow_to_harmonic(s.v, s.spec, s.spec, 0.1, FlowOptions{}, &*saved);
  EXPECT_EQ(resumed.step, full.step);
  EXPECT_EQ(resumed.u.comp, full.u.comp);
}

TEST(Flow, Errors) {
  const Problem s = sine_setup(0.2);
  FlowOptions opt;
  opt.max_steps = 5;
  try {
    flow_to_harmonic(s.v, s.spec, s.spec, 0.1, opt);
    FAIL() << "expected divergence";
  } catch (const FlowDivergenceError& e) {
    EXPECT_FALSE(e.history().empty());
    EXPECT_EQ(e.family(), ErrorFamily::solver);
  }
  EXPECT_THROW(flow_to_harmonic(s.v, s.spec, s.spec, 0.07, FlowOptions{}), ConfigError);
  MapField high = s.v;
  for (double& r : high.comp[1]) r *= 10.0;
  EXPECT_THROW(flow_to_harmonic(high, s.spec, s.spec, 0.1, FlowOptions{}), ChartOverflowError);
}

TEST(Exhaustion, IdentityAndPreconditions) {
  const Problem s = sine_setup(0.0);
  const ExhaustionReport rep = run_exhaustion(s.v, s.spec, s.spec, {0.2, 0.1, 0.05}, FlowOptions{});
  ASSERT_EQ(rep.records.size(), 3u);
  EXPECT_TRUE(rep.complete());
  for (const auto& r : rep.records) {
    EXPECT_LE(r.sup_d, 1e-3);
    EXPECT_FALSE(r.energy_profile.empty());
  }
  EXPECT_THROW(run_exhaustion(s.v, s.spec, s.spec, {0.1, 0.2}, FlowOptions{}), ConfigError);
  EXPECT_THROW(run_exhaustion(s.v, s.spec, s.spec, {0.07}, FlowOptions{}), ConfigError);
}

TEST(Exhaustion, SineDataBounded) {
  const Problem s = sine_setup(0.2);
  const ExhaustionReport rep = run_exhaustion(s.v, s.spec, s.spec, {0.2, 0.1, 0.05}, FlowOptions{});
  ASSERT_TRUE(rep.complete());
  EXPECT_GT(rep.bound, 0.0);
  EXPECT_TRUE(std::isfinite(rep.bound));
  for (const auto& r : rep.records) EXPECT_LE(r.tension_sup, 1e-6);
}

TEST(Uniqueness, SeedsAgree) {
  const Problem s = sine_setup(0.2);
  FlowOptions opt;
  const UniquenessReport one = uniqueness_probe({s.v}, s.spec, s.spec, 0.1, opt);
  EXPECT_EQ(one.max_pairwise, 0.0);
  const MapField other = perturb(restrict_to_slab(s.v, 0.1), 0.1);
  // seeds must share the slab's walls; compare on B_0.1
  const UniquenessReport two = uniqueness_probe({restrict_to_slab(s.v, 0.1), other}, s.spec, s.spec, 0.1, opt);
  EXPECT_TRUE(two.accepted) << two.max_pairwise;
  EXPECT_LE(two.max_pairwise, 1e-3);

  MapField wrong = s.v;
  wrong.homotopy(0, 0) = 2;
  EXPECT_THROW(uniqueness_probe({s.v, wrong}, s.spec, s.spec, 0.1, opt), HomotopyError);
  MapField moved = restrict_to_slab(s.v, 0.1);
  moved.at(0, 0, 0) += 0.01;
  EXPECT_THROW(uniqueness_probe({restrict_to_slab(s.v, 0.1), moved}, s.spec, s.spec, 0.1, opt), ConfigError);
}

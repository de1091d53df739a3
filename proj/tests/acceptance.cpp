// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "ahharm/ahharm.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

using namespace ahharm;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2 * kPi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Vec pt(std::initializer_list<double> c) {
  Vec p(static_cast<int>(c.size()));
  int i = 0;
  for (double v : c) p[i++] = v;
  return p;
}

BoundaryMap sine_map(double amp) {
  BoundaryMap f = BoundaryMap::identity({kTwoPi});
  f.perturbation = PerturbationKind::sine;
  f.amplitude = amp;
  return f;
}

/// r_k = r_max 2^(-k/per_octave), k = 0..levels-1.
SlabGrid octave_ladder(int nodes, double r_max, int per_octave, int levels) {
  return SlabGrid::geometric({kTwoPi}, {nodes}, r_max, r_max * std::pow(2.0, -(levels - 1.0) / per_octave), levels);
}

void c1_kernel_normalization(Outcome& o) {
  const KernelContext ctx(MetricSpec::hyperbolic(1), {1024}, 0.025);
  double worst = 0;
  bool mono = true;
  for (int i = 0; i < 16; ++i) {
    const Vec x = pt({kTwoPi * i / 16 + 0.1});
    double prev1 = 1e300, prev2 = 1e300;
    for (double r : {0.1, 0.05, 0.025}) {
      const KernelMoments mo = kernel_moments(ctx, x, r);
      worst = std::max(worst, std::abs(mo.i0 - 1) / (0.6 * r));
      mono = mono && std::abs(mo.i1) < prev1 && std::abs(mo.i2) < prev2;
      prev1 = std::abs(mo.i1);
      prev2 = std::abs(mo.i2);
    }
  }
  o.detail << "max |I0-1|/(0.6 r) = " << worst << ", I1 and I2 decreasing: " << mono;
  o.require(worst <= 1.0, "|I0-1| <= 0.6 r");
  o.require(mono, "I1, I2 strictly decreasing");
}

void c2_extension(Outcome& o) {
  const KernelContext ctx(MetricSpec::hyperbolic(1), {1024}, 0.025);
  const SlabGrid grid = SlabGrid::geometric({kTwoPi}, {64}, 0.4, 0.025, 17);
  const ExtensionField w = extend(ctx, [](const Vec& x) { return std::sin(x[0]); }, grid);
  const int k = grid.level_of(0.05);
  // periodic half-plane Poisson extension of sin x is e^{-r} sin x
  double err = 0;
  for (std::size_t j = 0; j < grid.boundary_size(); ++j)
    err = std::max(err, std::abs(w.w[grid.index(k, j)] - std::exp(-0.05) * std::sin(grid.boundary_point(j)[0])));
  const double rel = err / std::exp(-0.05);
  const auto phi = ctx.sample([](const Vec& x) { return std::sin(x[0]); });
  double prev_g = 1e300, prev_l = 1e300;
  bool mono = true;
  for (double r : {0.1, 0.05, 0.025}) {
    double g = 0, l = 0;
    for (int i = 0; i < 16; ++i) {
      const ExtensionJet ej = extension_jet(ctx, phi, pt({kTwoPi * i / 16}), r);
      g = std::max(g, r * ej.grad_norm_gbar);
      l = std::max(l, std::abs(r * ej.laplacian_gbar));
    }
    mono = mono && g < prev_g && l < prev_l;
    prev_g = g;
    prev_l = l;
  }
  o.detail << "relative error at r=0.05: " << rel << ", r|grad w| and r Lap w decreasing: " << mono;
  o.require(rel <= 0.05, "relative error <= 5%");
  o.require(mono, "derivative decay");
}

void c3_approximate_solution(Outcome& o) {
  const MetricSpec s = MetricSpec::hyperbolic(1);
  const SlabGrid g = octave_ladder(512, 1.6, 9, 64);
  const KernelContext ctx(s, {1024}, g.r_min());
  const MapField v = build_approximate_solution(sine_map(0.2), s, s, ctx, g);
  const auto rep = rescaled_tension_report(v, s, s);
  const double t1 = report_at(rep, 0.1).sup_tension_h, t2 = report_at(rep, 0.05).sup_tension_h,
               t3 = report_at(rep, 0.025).sup_tension_h;
  const NeumannData nd = neumann_extract(v);
  double e_rho = 0, e_u = 0;
  for (std::size_t j = 0; j < g.boundary_size(); ++j) {
    const double x = g.boundary_point(j)[0];
    e_rho = std::max(e_rho, std::abs(nd.drho_dr[j] - std::abs(1 + 0.2 * std::cos(x))));
    e_u = std::max(e_u, std::abs(nd.du_dr[0][j]));
  }
  o.detail << "sup|tau|_h at 0.1/0.05/0.025: " << t1 << " " << t2 << " " << t3 << ", Neumann errors rho " << e_rho
           << " u " << e_u;
  o.require(t1 > t2 && t2 > t3, "tension decreasing");
  o.require(t3 <= 0.5 * t1, "last <= 0.5 first");
  o.require(e_rho <= 0.02 && e_u <= 0.02, "Neumann data within 0.02");
}

void c4_identity_solver(Outcome& o) {
  const MetricSpec s = MetricSpec::hyperbolic(1);
  const SlabGrid g = octave_ladder(256, 1.6, 9, 64);
  const KernelContext ctx(s, {1024}, g.r_min());
  const MapField v = build_approximate_solution(BoundaryMap::identity({kTwoPi}), s, s, ctx, g);
  FlowOptions opt;
  opt.tol = 1e-6;
  const FlowState st = flow_to_harmonic(v, s, s, g.r_min(), opt);
  double err = 0;
  for (int k = 0; k < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      err = std::max(err, std::abs(st.u.at(0, k, j) - g.boundary_point(j)[0]));
      err = std::max(err, std::abs(st.u.rho(k, j) - g.radius(k)));
    }
  o.detail << "steps " << st.step << ", sup|tau|_h " << st.tension_sup << ", sup chart error " << err;
  o.require(st.tension_sup <= 1e-6, "converged to tol");
  o.require(err <= 1e-3, "chart error <= 1e-3");
}

void c5_energy_limit(Outcome& o) {
  // criterion 3's data and ladder, truncated at 1.6/1024 so the inner-wall layer stays below r = 0.025
  const MetricSpec s = MetricSpec::hyperbolic(1);
  const SlabGrid g = octave_ladder(128, 1.6, 9, 91);
  const KernelContext ctx(s, {8192}, g.r_min());
  const MapField v = build_approximate_solution(sine_map(0.2), s, s, ctx, g);
  const FlowState st = flow_to_harmonic(v, s, s, g.r_min(), FlowOptions{});
  const auto rep = rescaled_tension_report(st.u, s, s);
  std::vector<double> e;
  o.detail << "N=128, delta " << g.r_min() << ", steps " << st.step << ", sup|e-2| at 0.4/0.2/0.1/0.05/0.025:";
  for (double r : {0.4, 0.2, 0.1, 0.05, 0.025}) {
    e.push_back(report_at(rep, r).sup_energy_minus_m1);
    o.detail << " " << e.back();
  }
  bool mono = true;
  for (std::size_t i = 1; i < e.size(); ++i) mono = mono && e[i] < e[i - 1];
  const double last = rep.back().sup_energy_minus_m1;
  o.detail << ", last interior level (r=" << rep.back().r << "): " << last;
  o.require(mono, "decreasing toward the boundary");
  o.require(e.back() <= 0.1 && last <= 0.1, "final level <= 0.1");
}

void c6_exhaustion(Outcome& o) {
  const MetricSpec s = MetricSpec::hyperbolic(1);
  const SlabGrid g = octave_ladder(64, 1.6, 9, 46);  // criterion 3's ladder down to 0.05
  const KernelContext ctx(s, {512}, g.r_min());
  const MapField v = build_approximate_solution(sine_map(0.2), s, s, ctx, g);
  const ExhaustionReport rep = run_exhaustion(v, s, s, {0.2, 0.1, 0.05}, FlowOptions{});
  o.require(rep.complete(), "all truncations converged");
  o.detail << "sup d~ per delta:";
  for (const auto& r : rep.records) o.detail << " " << r.sup_d_tilde;
  o.detail << ", last change " << rep.last_change;
  o.require(std::isfinite(rep.bound), "bounded");
  o.require(rep.stable, "last-two relative change < 10%");
  // uniform decay: below the level of its maximum, every profile decreases toward the boundary
  bool decay = true;
  for (const auto& r : rep.records) {
    const auto& p = r.distance_profile;
    std::size_t peak = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i].sup_d_tilde > p[peak].sup_d_tilde) peak = i;
    for (std::size_t i = peak + 1; i < p.size(); ++i) decay = decay && p[i].sup_d_tilde < p[i - 1].sup_d_tilde;
    decay = decay && p[peak].r > r.delta;
  }
  o.require(decay, "per-level sup d~ decreasing toward the boundary");
}

void c7_barrier(Outcome& o) {
  for (bool perturbed : {false, true}) {
    MetricSpec s = MetricSpec::hyperbolic(1);
    if (perturbed) {
      s.correction = CorrectionKind::quadratic;
      s.correction_amplitude = 0.05;
    }
    const SlabGrid g = SlabGrid::geometric({kTwoPi}, {32}, 0.8, 0.025, 41);
    BarrierOptions opt;
    opt.throw_on_failure = false;
    const BarrierFunction bf = solve_barrier(s, g, opt);
    const double need = -0.1 * bf.epsilon * bf.min_phi * s.dim / 2.0;
    o.detail << (perturbed ? "; p=2: " : "exact: ") << "residual " << bf.residual << ", max Lap phi " << bf.max_lap_phi
             << " (needs <= " << need << ")";
    o.require(bf.residual <= 1e-6, "residual <= 1e-6");
    o.require(bf.max_lap_phi < 0 && bf.max_lap_phi <= need, "superharmonic with margin");
  }
}

void c8_comparison(Outcome& o) {
  double err = 0;
  for (double mu : {-1.0, -4.0, 0.0}) {
    const ComparisonODE ode = solve_comparison_ode([mu](double) { return mu; }, 4.0, 4000);
    const double k = std::sqrt(-mu);
    for (std::size_t i = 1; i < ode.t.size(); ++i) {
      const double t = ode.t[i];
      const double s = k > 0 ? std::sinh(k * t) / k : t;
      const double q = k > 0 ? k / std::tanh(k * t) : 1 / t;
      err = std::max({err, std::abs(ode.s[i] - s) / std::max(1.0, s), std::abs(ode.q(i) - q) / std::max(1.0, q)});
    }
  }
  o.detail << "closed-form error " << err;
  o.require(err <= 1e-8, "constant-mu closed forms to 1e-8");

  const HessianConstants hc = hessian_lower_bound_constants();
  double min_q = 1e300, min_s = 1e300;
  for (double diam : {0.0, 0.5, 2.0, 6.0}) {
    const double L = hc.l(diam);
    const ComparisonODE ode =
        solve_comparison_ode([diam](double t) { return t < diam ? 0.0 : -0.5; }, L, static_cast<int>(std::round(L * 1000)));
    min_q = std::min(min_q, ode.q(ode.t.size() - 1));
    min_s = std::min(min_s, ode.s.back());
  }
  o.detail << ", min q(L) " << min_q << ", min s(L) " << min_s;
  o.require(min_q >= 0.5, "q(L) >= 1/2");
  o.require(min_s >= 4.0, "s(L) >= 4");

  const ComparisonODE ode = solve_comparison_ode([](double) { return -0.5; }, 4.0, 800);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> curv(-2.0, -0.5), amp(0.1, 3.0);
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i)
    violations += comparison_bounds(ode, constant_curvature_jacobi(ode, curv(rng), amp(rng))).violations > 0;
  o.detail << ", Jacobi violations " << violations << "/1000";
  o.require(violations == 0, "zero violations");
}

void c9_uniqueness(Outcome& o) {
  const MetricSpec s = MetricSpec::hyperbolic(1);
  const SlabGrid g = SlabGrid::geometric({kTwoPi}, {32}, 0.8, 0.05, 17);
  const KernelContext ctx(s, {512}, 0.05);
  const MapField v = restrict_to_slab(build_approximate_solution(sine_map(0.2), s, s, ctx, g), 0.1);
  MapField other = v;
  const SlabGrid& h = v.grid;
  for (int k = 1; k + 1 < h.levels(); ++k) {
    const double bump = std::sin(kPi * std::log(h.radius(k) / h.r_min()) / std::log(h.r_max() / h.r_min()));
    for (std::size_t j = 0; j < h.boundary_size(); ++j) {
      const double b = 0.1 * bump * (1 + std::cos(h.boundary_point(j)[0]));
      other.at(0, k, j) += b;
      other.at(1, k, j) *= std::exp(b);
    }
  }
  const UniquenessReport rep = uniqueness_probe({v, other}, s, s, 0.1, FlowOptions{});
  o.detail << "pairwise sup d~ " << rep.max_pairwise;
  o.require(rep.max_pairwise <= 1e-3, "pairwise sup d~ <= 1e-3");
}

void c10_negative_controls(Outcome& o) {
  MetricSpec lin = MetricSpec::hyperbolic(1);
  lin.correction = CorrectionKind::linear;
  lin.correction_amplitude = 0.5;
  const double a = asymptotic_einstein_residual(lin, 0.1, 8) / 0.1;
  const double b = asymptotic_einstein_residual(lin, 0.05, 8) / 0.05;
  const bool einstein_decays = b / a <= 0.7;
  o.detail << "p=1 residual/r ratio " << b / a << " (decay test passes: " << einstein_decays << ")";
  o.require(!einstein_decays, "p=1 source must fail the residual decay test");

  // u = (x, 2r) with identity boundary data violates d rho/dr|_0 = |df| = 1
  const MetricSpec s = MetricSpec::hyperbolic(1);
  const SlabGrid g = octave_ladder(32, 0.8, 8, 33);
  const MapField u = sample_map(g, {kTwoPi}, IntMat::Identity(1, 1), [](const Vec& x, double r) { return pt({x[0], 2 * r}); });
  const auto rep = rescaled_tension_report(u, s, s);
  const double t1 = report_at(rep, 0.1).sup_tension_h, t3 = report_at(rep, 0.05 * std::pow(2.0, 0.125)).sup_tension_h;
  const bool tension_decays = t3 < t1 && t3 <= 0.5 * t1;
  o.detail << "; Neumann-violating map sup|tau|_h " << t1 << " -> " << t3 << " (decay test passes: " << tension_decays
           << ")";
  o.require(!tension_decays, "Neumann-violating map must fail the tension decay test");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget;  // seconds, 0 = none
    void (*run)(Outcome&);
  };
  const Criterion criteria[] = {
      {1, "kernel normalization", 10, c1_kernel_normalization},
      {2, "extension operator", 10, c2_extension},
      {3, "approximate solution", 30, c3_approximate_solution},
      {4, "solver exactness", 60, c4_identity_solver},
      {5, "energy-density limit", 0, c5_energy_limit},
      {6, "exhaustion bound", 0, c6_exhaustion},
      {7, "barrier certificate", 30, c7_barrier},
      {8, "comparison ODE", 0, c8_comparison},
      {9, "uniqueness probe", 0, c9_uniqueness},
      {10, "negative controls", 0, c10_negative_controls},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget > 0 && secs > c.budget) {
      o.pass = false;
      o.detail << " [over the " << c.budget << " s budget]";
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}

// ahharm: config-driven experiment runner.
//
//   ahharm <kernel-check|build-approx|solve|exhaust|barrier|compare> --config FILE [--out DIR]
//          [--threads N] [--seed S] [--resume]

#include "ahharm/ahharm.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <deque>
#include <filesystem>
#include <iostream>
#include <random>

using namespace ahharm;
namespace fs = std::filesystem;

namespace {

struct Run {
  ExperimentConfig cfg;
  fs::path out;
  std::uint64_t seed = 1;
  bool resume = false;

  std::string path(const std::string& name) const { return (out / name).string(); }
  CsvWriter csv(const std::string& name, const std::string& schema, const std::vector<std::string>& header) const {
    return CsvWriter(path(name), schema, 1, cfg.hash, header);
  }
};

MapField build_v(const Run& run) {
  const ExperimentConfig& c = run.cfg;
  return build_approximate_solution(c.map, c.source, c.target, c.make_kernel(), c.make_grid());
}

void write_tension_report(const Run& run, const std::string& name, const std::vector<TensionLevelReport>& rep) {
  CsvWriter w = run.csv(name, "tension_report",
                        {"r", "sup_tension_h", "sup_rescaled_tangential", "sup_rescaled_normal", "sup_energy_minus_m1"});
  for (const auto& l : rep) w.row(l.r, l.sup_tension_h, l.sup_rescaled_tan, l.sup_rescaled_nor, l.sup_energy_minus_m1);
}

void write_history(const Run& run, const std::deque<FlowRecord>& history) {
  CsvWriter w = run.csv("flow_history.csv", "flow_history", {"step", "tension_sup", "energy_sup"});
  for (const auto& h : history) w.row(h.step, h.tension_sup, h.energy_sup);
}

double smallest_delta(const Run& run, const SlabGrid& g) {
  return ExperimentConfig::snap_delta(g, run.cfg.run.delta_list.back());
}

int cmd_kernel_check(const Run& run) {
  const ExperimentConfig& c = run.cfg;
  const KernelContext ctx = c.make_kernel();
  CsvWriter w = run.csv("kernel_check.csv", "kernel_check", {"r", "I0", "I1", "I2", "C_grad", "C_lap"});
  const Vec x0 = Vec::Zero(c.source.dim);
  for (double r : c.kernel.radii) {
    const KernelMoments mo = kernel_moments(ctx, x0, r);
    const KernelBounds kb =
        kernel_bounds_check(ctx, random_kernel_samples(ctx, static_cast<std::size_t>(c.kernel.samples), run.seed, r, r));
    w.row(r, mo.i0, mo.i1, mo.i2, kb.c_grad, kb.c_lap);
    std::cout << "r=" << r << "  I0=" << mo.i0 << "  I1=" << mo.i1 << "  I2=" << mo.i2 << "\n";
  }
  return 0;
}

int cmd_build_approx(const Run& run) {
  const MapField v = build_v(run);
  save_map_field(run.path("v.ahhm"), v);
  const auto rep = rescaled_tension_report(v, run.cfg.source, run.cfg.target);
  write_tension_report(run, "tension_report.csv", rep);
  const NeumannData nd = neumann_extract(v);
  const SlabGrid& g = v.grid;
  std::vector<std::string> header;
  for (int a = 0; a < g.dim(); ++a) header.push_back("x" + std::to_string(a + 1));
  for (int c = 0; c < v.n(); ++c) header.push_back("du" + std::to_string(c + 1) + "_dr");
  header.push_back("drho_dr");
  CsvWriter w = run.csv("neumann.csv", "neumann", header);
  for (std::size_t j = 0; j < g.boundary_size(); ++j) {
    const Vec x = g.boundary_point(j);
    std::vector<double> row(x.data(), x.data() + x.size());
    for (int c = 0; c < v.n(); ++c) row.push_back(nd.du_dr[c][j]);
    row.push_back(nd.drho_dr[j]);
    w.row_values(row);
  }
  std::cout << "levels=" << g.levels() << "  sup|tau|_h at r=" << rep.back().r << ": " << rep.back().sup_tension_h
            << "\n";
  return 0;
}

int cmd_solve(const Run& run) {
  const ExperimentConfig& c = run.cfg;
  const MapField v = build_v(run);
  const double delta = smallest_delta(run, v.grid);
  FlowOptions opt = c.solver;
  const std::string ckpt = run.path("checkpoint.ahfs");
  if (opt.checkpoint_every > 0) opt.on_checkpoint = [&](const FlowState& st) { save_checkpoint(ckpt, st); };
  std::optional<FlowState> start;
  if (run.resume) start = load_checkpoint(ckpt);
  FlowState st;
  try {
    st = flow_to_harmonic(v, c.source, c.target, delta, opt, start ? &*start : nullptr);
  } catch (const FlowDivergenceError& e) {
    write_history(run, e.history());
    throw;
  }
  save_map_field(run.path("u.ahhm"), st.u);
  write_history(run, st.history);
  write_tension_report(run, "solve_levels.csv", rescaled_tension_report(st.u, c.source, c.target));
  std::cout << "delta=" << delta << "  steps=" << st.step << "  sup|tau|_h=" << st.tension_sup << "\n";
  return 0;
}

/// Extra uniqueness seeds: the restricted v plus an interior bump with a seeded phase.
MapField perturbed_seed(const MapField& v, double amp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double phase = std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng);
  MapField out = v;
  const SlabGrid& g = v.grid;
  const double span = std::log(g.r_max() / g.r_min());
  for (int k = 1; k + 1 < g.levels(); ++k) {
    const double bump = std::sin(std::numbers::pi * std::log(g.radius(k) / g.r_min()) / span);
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      const double b = amp * bump * (1 + std::cos(2 * std::numbers::pi * g.boundary_point(j)[0] / g.lattice()[0] + phase));
      for (int c = 0; c < out.n(); ++c) out.at(c, k, j) += b;
      out.at(out.n(), k, j) *= std::exp(b);
    }
  }
  return out;
}

int cmd_exhaust(const Run& run) {
  const ExperimentConfig& c = run.cfg;
  const MapField v = build_v(run);
  std::vector<double> deltas;
  for (double d : c.run.delta_list) deltas.push_back(ExperimentConfig::snap_delta(v.grid, d));
  const ExhaustionReport rep = run_exhaustion(v, c.source, c.target, deltas, c.solver);
  {
    CsvWriter w = run.csv("exhaustion.csv", "exhaustion",
                          {"delta", "iterations", "tension_sup", "sup_d", "sup_d_tilde", "failed", "error"});
    for (const auto& r : rep.records) w.row(r.delta, r.iterations, r.tension_sup, r.sup_d, r.sup_d_tilde, r.failed, r.error);
  }
  {
    CsvWriter w = run.csv("exhaustion_profile.csv", "exhaustion_profile",
                          {"delta", "r", "sup_d", "sup_d_tilde", "sup_energy_minus_m1"});
    for (const auto& r : rep.records)
      for (const auto& l : r.distance_profile) {
        double e = std::numeric_limits<double>::quiet_NaN();
        for (const auto& t : r.energy_profile)
          if (std::abs(t.r - l.r) <= 1e-12 * l.r) e = t.sup_energy_minus_m1;
        w.row(r.delta, l.r, l.sup_d, l.sup_d_tilde, e);
      }
  }
  std::cout << "bound=" << rep.bound << "  last_change=" << rep.last_change << "  stable=" << rep.stable << "\n";
  if (c.run.uniqueness_seeds > 1) {
    const MapField base = restrict_to_slab(v, deltas.back());
    std::vector<MapField> seeds{base};
    for (int s = 1; s < c.run.uniqueness_seeds; ++s)
      seeds.push_back(perturbed_seed(base, c.run.seed_amplitude, run.seed + static_cast<std::uint64_t>(s)));
    const UniquenessReport ur = uniqueness_probe(seeds, c.source, c.target, deltas.back(), c.solver);
    CsvWriter w = run.csv("uniqueness.csv", "uniqueness", {"seed", "iterations", "tension_sup", "max_sup_d_tilde"});
    for (std::size_t s = 0; s < seeds.size(); ++s)
      w.row(s, ur.iterations[s], ur.tension_sup[s], ur.pairwise.row(static_cast<Eigen::Index>(s)).maxCoeff());
    std::cout << "uniqueness max pairwise sup d~=" << ur.max_pairwise << "  accepted=" << ur.accepted << "\n";
  }
  for (const auto& r : rep.records)
    if (r.failed) throw SolverError("exhaustion failed at delta=" + std::to_string(r.delta) + ": " + r.error);
  return 0;
}

int cmd_barrier(const Run& run) {
  const ExperimentConfig& c = run.cfg;
  const SlabGrid g = c.make_grid();
  BarrierOptions opt = c.barrier;
  opt.throw_on_failure = false;
  const BarrierFunction bf = solve_barrier(c.source, g, opt);
  const double margin = -bf.max_lap_phi / (bf.epsilon * bf.min_phi * c.source.dim / 2.0);
  {
    CsvWriter w = run.csv("barrier.csv", "barrier",
                          {"epsilon", "residual", "sweeps", "sup_v", "decay_constant", "max_lap_phi", "min_phi",
                           "margin_ratio", "certified"});
    w.row(bf.epsilon, bf.residual, bf.sweeps, bf.sup_v, bf.decay_constant, bf.max_lap_phi, bf.min_phi, margin,
          bf.certified);
  }
  {
    CsvWriter w = run.csv("barrier_profile.csv", "barrier_profile", {"r", "min_phi", "max_phi", "max_lap_phi"});
    for (int k = 1; k + 1 < g.levels(); ++k) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0, lap = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < g.boundary_size(); ++j) {
        const std::size_t i = g.index(k, j);
        lo = std::min(lo, bf.phi[i]);
        hi = std::max(hi, bf.phi[i]);
        lap = std::max(lap, bf.lap_phi[i]);
      }
      w.row(g.radius(k), lo, hi, lap);
    }
  }
  std::cout << "epsilon=" << bf.epsilon << "  residual=" << bf.residual << "  margin_ratio=" << margin
            << "  certified=" << bf.certified << "\n";
  if (!bf.certified)
    throw CertificationError("barrier is not superharmonic at level " +
                             std::to_string(bf.worst_node / g.boundary_size()) + ", boundary node " +
                             std::to_string(bf.worst_node % g.boundary_size()));
  return 0;
}

int cmd_compare(const Run& run) {
  const ExperimentConfig& c = run.cfg;
  const TargetDistance td = TargetDistance::make(c.target);
  const SlabGrid g = c.make_grid();
  CsvWriter w = run.csv("compare.csv", "compare", {"quantity", "value"});

  const double diam = curvature_compact_diameter(td, 16, g.radii());
  const HessianConstants hc = hessian_lower_bound_constants();
  const double length = hc.l(diam);
  const int steps = static_cast<int>(std::ceil(length * 1000));
  auto mu = [diam](double t) { return t < diam ? 0.0 : -0.5; };
  const ComparisonODE ode = solve_comparison_ode(mu, length, steps);
  w.row("curvature_compact_diameter", diam);
  w.row("comparison_length", length);
  w.row("q_at_length", ode.q(ode.t.size() - 1));
  w.row("s_at_length", ode.s.back());

  std::mt19937_64 rng(run.seed);
  std::uniform_real_distribution<double> curv(-2.0, -0.5), amp(0.1, 3.0);
  std::size_t violations = 0;
  for (int s = 0; s < c.compare.jacobi_samples; ++s) {
    const ComparisonCertificate cc = comparison_bounds(ode, constant_curvature_jacobi(ode, curv(rng), amp(rng)));
    violations += cc.violations > 0;
  }
  w.row("jacobi_samples", c.compare.jacobi_samples);
  w.row("jacobi_violations", violations);

  const HessianDiagnostic hd =
      hessian_trace_diagnostic(c.target.dim, static_cast<std::size_t>(c.compare.hessian_samples), run.seed, 4.0, hc.c);
  w.row("hessian_samples", hd.samples);
  w.row("hessian_violations", hd.violations);
  w.row("hessian_min_ratio", hd.min_ratio);

  const double eps = c.barrier.epsilon.value_or(c.source.dim / 2.0);
  w.row("d_epsilon", d_epsilon(eps, c.source.dim));
  w.row("kappa_bound", kappa_bound(1.0, length));
  w.row("laplacian_bound_f_at_length", laplacian_bound_f(length));

  if (fs::exists(run.path("u.ahhm")) && fs::exists(run.path("v.ahhm"))) {
    const MapDistanceReport dr = map_distance(td, load_map_field(run.path("u.ahhm")), load_map_field(run.path("v.ahhm")));
    w.row("sup_d_u_v", dr.sup_d);
    w.row("sup_d_tilde_u_v", dr.sup_d_tilde);
  }
  std::cout << "jacobi_violations=" << violations << "  hessian_violations=" << hd.violations << "\n";
  if (violations > 0 || hd.violations > 0) throw CertificationError("comparison diagnostics recorded violations");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ahharm: approximate harmonic maps between asymptotically hyperbolic manifolds"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  app.add_option("--config", config_path, "experiment config (INI)")->required();
  app.add_option("--out", out_dir, "output directory (default: run.out)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "seed for random sampling (default: run.seed)");
  app.fallthrough();

  std::map<std::string, int (*)(const Run&)> commands{
      {"kernel-check", cmd_kernel_check}, {"build-approx", cmd_build_approx}, {"solve", cmd_solve},
      {"exhaust", cmd_exhaust},           {"barrier", cmd_barrier},           {"compare", cmd_compare}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, fn] : commands) subs[name] = app.add_subcommand(name);
  subs["solve"]->add_flag("--resume", resume, "continue from <out>/checkpoint.ahfs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Run run;
    run.cfg = load_config(config_path);
    run.out = out_dir.empty() ? fs::path(run.cfg.run.out) : fs::path(out_dir);
    run.seed = seed.value_or(run.cfg.run.seed);
    run.resume = resume;
    thread_count() = threads;
    fs::create_directories(run.out);
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) {
        const auto t0 = std::chrono::steady_clock::now();
        const int rc = commands[name](run);
        std::cout << name << " done in "
                  << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
        return rc;
      }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.family());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

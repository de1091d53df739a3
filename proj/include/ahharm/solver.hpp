#pragma once

// Damped harmonic map heat flow on truncated slabs B_delta = T^m x [delta, r_max].

#include "ahharm/approx.hpp"
#include "ahharm/comparison.hpp"
#include "ahharm/core.hpp"
#include "ahharm/tension.hpp"

#include <deque>
#include <limits>
#include <sstream>

namespace ahharm {

struct FlowOptions {
  double sigma = 0.2;
  double tol = 1e-6;
  bool local_time_step = true;
  long max_steps = 200000;
  std::size_t history_size = 64;
  long checkpoint_every = 0;
  std::function<void(const struct FlowState&)> on_checkpoint;
};

struct FlowRecord {
  long step = 0;
  double tension_sup = 0;
  double energy_sup = 0;
};

struct FlowState {
  MapField u;
  long step = 0;
  double dt = 0;
  double tension_sup = std::numeric_limits<double>::infinity();
  double energy_sup = 0;
  long rejected = 0;
  long clamp_events = 0;
  std::deque<FlowRecord> history;
};

class FlowDivergenceError : public SolverError {
 public:
  FlowDivergenceError(const std::string& w, std::deque<FlowRecord> h) : SolverError(w), history_(std::move(h)) {}
  const std::deque<FlowRecord>& history() const { return history_; }

 private:
  std::deque<FlowRecord> history_;
};

/// Restriction of a map to the slab {r >= delta}; delta must be a grid level.
inline MapField restrict_to_slab(const MapField& v, double delta) {
  const int k = v.grid.level_of(delta);
  if (k < 0) throw ConfigError("truncation radius " + std::to_string(delta) + " is not a level of the grid");
  MapField out(v.grid.truncated(k), v.target_lattice, v.homotopy);
  for (std::size_t c = 0; c < v.comp.size(); ++c)
    std::copy(v.comp[c].begin(), v.comp[c].begin() + static_cast<std::ptrdiff_t>(out.grid.size()), out.comp[c].begin());
  return out;
}

/// min over chart axes of spacing^2 / g^{ii} at every node (zero on wall rows).
inline std::vector<double> node_time_scales(const SlabGrid& g, const SourceCache& cache) {
  std::vector<double> s(g.size(), 0.0);
  const int m = g.dim();
  for (int k = 1; k + 1 < g.levels(); ++k) {
    const double dr = std::min(g.radius(k - 1) - g.radius(k), g.radius(k) - g.radius(k + 1));
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      const Mat& gi = cache.g_inv(k, j);
      double best = dr * dr / gi(m, m);
      for (int a = 0; a < m; ++a) best = std::min(best, g.spacing(a) * g.spacing(a) / gi(a, a));
      s[g.index(k, j)] = best;
    }
  }
  return s;
}

/// sigma * min over interior nodes of spacing^2 / g^{ii}.
inline double stable_time_step(const SlabGrid& g, const SourceCache& cache, double sigma) {
  const std::vector<double> s = node_time_scales(g, cache);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k + 1 < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j) best = std::min(best, s[g.index(k, j)]);
  return sigma * best;
}

struct FlowEvaluation {
  std::vector<std::vector<double>> tau;
  double tension_sup = 0;
  double energy_sup = 0;
};

inline FlowEvaluation evaluate_flow(const MapField& u, const SourceCache& cache, const MetricSpec& target) {
  const SlabGrid& g = u.grid;
  const int nc = u.n() + 1;
  FlowEvaluation ev{std::vector<std::vector<double>>(nc, std::vector<double>(g.size(), 0.0))};
  for (std::size_t j = 0; j < g.boundary_size(); ++j) {
    check_in_chart(target, u.rho(0, j), 0, j);
    check_in_chart(target, u.rho(g.levels() - 1, j), g.levels() - 1, j);
  }
  std::vector<double> tsup(g.boundary_size(), 0.0), esup(g.boundary_size(), 0.0);
  parallel_for(g.boundary_size(), [&](std::size_t j) {
    for (int k = 1; k + 1 < g.levels(); ++k) {
      const NodeTension nt = node_tension(u, cache, target, k, j);
      for (int c = 0; c < nc; ++c) ev.tau[c][g.index(k, j)] = nt.tau[c];
      tsup[j] = std::max(tsup[j], nt.norm_h);
      esup[j] = std::max(esup[j], nt.energy);
    }
  });
  for (std::size_t j = 0; j < g.boundary_size(); ++j) {
    if (!std::isfinite(tsup[j])) throw SolverError("tension is not finite at boundary node " + std::to_string(j));
    ev.tension_sup = std::max(ev.tension_sup, tsup[j]);
    ev.energy_sup = std::max(ev.energy_sup, esup[j]);
  }
  return ev;
}

/// `local` holds per-node step ratios (node scale / global minimum scale); empty means uniform.
inline void apply_flow_step(MapField& u, const FlowEvaluation& ev, double dt, const std::vector<double>& local) {
  const SlabGrid& g = u.grid;
  const int n = u.n();
  for (int k = 1; k + 1 < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      const std::size_t i = g.index(k, j);
      const double h = local.empty() ? dt : dt * local[i];
      for (int c = 0; c < n; ++c) u.comp[c][i] += h * ev.tau[c][i];
      u.comp[n][i] *= std::exp(h * ev.tau[n][i] / u.comp[n][i]);
    }
}

/// Iterates u <- u + dt tau(u) (rho multiplicatively) until sup |tau|_h <= tol. A step that
/// raises sup |tau|_h is rejected and dt halved. `resume` continues a checkpointed flow.
inline FlowState flow_to_harmonic(const MapField& v, const MetricSpec& source, const MetricSpec& target, double delta,
                                  const FlowOptions& opt, const FlowState* resume = nullptr) {
  if (v.grid.r_min() > delta * (1 + 1e-12)) throw ConfigError("flow needs r_min <= delta");
  if (!(opt.sigma > 0.0)) throw ConfigError("flow needs sigma > 0");
  FlowState st;
  st.u = resume ? resume->u : restrict_to_slab(v, delta);
  if (resume && std::abs(st.u.grid.r_min() - delta) > 1e-12 * delta)
    throw ConfigError("checkpoint slab does not match delta");
  const SourceCache cache(source, st.u.grid);
  std::vector<double> local;
  {
    const std::vector<double> scales = node_time_scales(st.u.grid, cache);
    double smin = std::numeric_limits<double>::infinity();
    for (int k = 1; k + 1 < st.u.grid.levels(); ++k)
      for (std::size_t j = 0; j < st.u.grid.boundary_size(); ++j) smin = std::min(smin, scales[st.u.grid.index(k, j)]);
    st.dt = resume ? resume->dt : opt.sigma * smin;
    if (opt.local_time_step) {
      local = scales;
      for (double& x : local) x /= smin;
    }
  }
  if (resume) {
    st.step = resume->step;
    st.rejected = resume->rejected;
    st.history = resume->history;
  }
  FlowEvaluation ev = evaluate_flow(st.u, cache, target);
  st.tension_sup = ev.tension_sup;
  st.energy_sup = ev.energy_sup;
  const double dt_floor = 1e-12 * st.dt;
  auto record = [&] {
    st.history.push_back({st.step, st.tension_sup, st.energy_sup});
    while (st.history.size() > opt.history_size) st.history.pop_front();
  };
  if (st.history.empty()) record();
  while (!(st.tension_sup <= opt.tol)) {
    if (st.step >= opt.max_steps) {
      std::ostringstream os;
      os << "flow did not reach tol " << opt.tol << " within " << opt.max_steps << " steps (sup|tau|_h = "
         << st.tension_sup << ", dt = " << st.dt << ")";
      throw FlowDivergenceError(os.str(), st.history);
    }
    MapField trial = st.u;
    apply_flow_step(trial, ev, st.dt, local);
    FlowEvaluation next = evaluate_flow(trial, cache, target);
    if (next.tension_sup > st.tension_sup) {
      st.dt *= 0.5;
      ++st.rejected;
      if (st.dt < dt_floor) throw FlowDivergenceError("flow stagnated: time step underflow", st.history);
      continue;
    }
    st.u = std::move(trial);
    ev = std::move(next);
    ++st.step;
    st.tension_sup = ev.tension_sup;
    st.energy_sup = ev.energy_sup;
    if (st.step % 100 == 0 || st.tension_sup <= opt.tol) record();
    if (opt.checkpoint_every > 0 && opt.on_checkpoint && st.step % opt.checkpoint_every == 0) opt.on_checkpoint(st);
  }
  return st;
}

struct ExhaustionRecord {
  double delta = 0;
  long iterations = 0;
  double tension_sup = 0;
  double sup_d = 0;
  double sup_d_tilde = 0;
  std::vector<MapDistanceLevel> distance_profile;   // d(u_delta, v) per level of B_delta
  std::vector<TensionLevelReport> energy_profile;  // per interior level
  bool failed = false;
  std::string error;
};

struct ExhaustionReport {
  std::vector<ExhaustionRecord> records;
  double bound = 0;            // max over delta of sup d~_delta
  double last_change = 0;      // relative change of sup d~ over the last two deltas
  bool stable = false;         // last_change < 10%
  bool complete() const {
    return std::none_of(records.begin(), records.end(), [](const ExhaustionRecord& r) { return r.failed; });
  }
};

/// Flows v on each B_delta and records the distance of u_delta to v.
inline ExhaustionReport run_exhaustion(const MapField& v, const MetricSpec& source, const MetricSpec& target,
                                       const std::vector<double>& deltas, const FlowOptions& opt) {
  if (deltas.empty()) throw ConfigError("exhaustion needs at least one delta");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (i > 0 && !(deltas[i] < deltas[i - 1])) throw ConfigError("delta list must be strictly decreasing");
    if (v.grid.level_of(deltas[i]) < 0)
      throw ConfigError("delta " + std::to_string(deltas[i]) + " is not a level of the grid");
  }
  const TargetDistance td = TargetDistance::make(target);
  ExhaustionReport rep;
  for (double delta : deltas) {
    ExhaustionRecord rec;
    rec.delta = delta;
    try {
      const FlowState st = flow_to_harmonic(v, source, target, delta, opt);
      rec.iterations = st.step;
      rec.tension_sup = st.tension_sup;
      const MapDistanceReport dr = map_distance(td, st.u, v);
      rec.sup_d = dr.sup_d;
      rec.sup_d_tilde = dr.sup_d_tilde;
      rec.distance_profile = dr.levels;
      rec.energy_profile = rescaled_tension_report(st.u, source, target);
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    rep.records.push_back(std::move(rec));
  }
  for (const auto& r : rep.records)
    if (!r.failed) rep.bound = std::max(rep.bound, r.sup_d_tilde);
  if (rep.records.size() >= 2 && rep.complete()) {
    const double a = rep.records[rep.records.size() - 2].sup_d_tilde, b = rep.records.back().sup_d_tilde;
    rep.last_change = std::abs(b - a) / std::max(std::abs(a), 1e-300);
    rep.stable = rep.last_change < 0.1;
  }
  return rep;
}

struct UniquenessReport {
  std::vector<long> iterations;
  std::vector<double> tension_sup;
  Eigen::MatrixXd pairwise;  // sup d~ between converged solutions
  double max_pairwise = 0;
  bool accepted = false;  // max_pairwise <= 10 tol
};

/// Flows every seed on B_delta and compares the limits pairwise.
inline UniquenessReport uniqueness_probe(const std::vector<MapField>& seeds, const MetricSpec& source,
                                         const MetricSpec& target, double delta, const FlowOptions& opt) {
  if (seeds.empty()) throw ConfigError("uniqueness probe needs at least one seed");
  std::vector<MapField> restricted;
  for (const MapField& s : seeds) {
    require_same_class(seeds.front(), s, "uniqueness_probe");
    restricted.push_back(restrict_to_slab(s, delta));
  }
  const SlabGrid& g = restricted.front().grid;
  for (const MapField& s : restricted)
    for (std::size_t c = 0; c < s.comp.size(); ++c)
      for (int k : {0, g.levels() - 1})
        for (std::size_t j = 0; j < g.boundary_size(); ++j)
          if (s.at(static_cast<int>(c), k, j) != restricted.front().at(static_cast<int>(c), k, j))
            throw ConfigError("uniqueness_probe: seeds carry different boundary data");
  UniquenessReport rep;
  std::vector<MapField> limits;
  for (const MapField& s : restricted) {
    const FlowState st = flow_to_harmonic(s, source, target, delta, opt);
    rep.iterations.push_back(st.step);
    rep.tension_sup.push_back(st.tension_sup);
    limits.push_back(st.u);
  }
  const TargetDistance td = TargetDistance::make(target);
  const std::size_t n = limits.size();
  rep.pairwise = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double d = map_distance(td, limits[a], limits[b]).sup_d_tilde;
      rep.pairwise(a, b) = rep.pairwise(b, a) = d;
      rep.max_pairwise = std::max(rep.max_pairwise, d);
    }
  rep.accepted = rep.max_pairwise <= 10 * opt.tol;
  return rep;
}

}  // namespace ahharm

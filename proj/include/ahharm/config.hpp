#pragma once

// Experiment configuration: INI sections source, target, map, grid, kernel, solver, run,
// barrier, compare. Every default lives in kDefaults.

#include "ahharm/approx.hpp"
#include "ahharm/barrier.hpp"
#include "ahharm/core.hpp"
#include "ahharm/geometry.hpp"
#include "ahharm/grid.hpp"
#include "ahharm/io.hpp"
#include "ahharm/kernel.hpp"
#include "ahharm/solver.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

namespace ahharm {

struct ConfigDefault {
  const char* key;
  const char* value;
  const char* meaning;
};

inline constexpr std::array kDefaults{
    ConfigDefault{"source.boundary_metric", "flat", "flat | conformal:<amplitude>"},
    ConfigDefault{"source.correction", "none", "none | quadratic:<amplitude> | linear:<amplitude>"},
    ConfigDefault{"source.r_star", "4", "outer edge of the normal-form chart"},
    ConfigDefault{"target.boundary_metric", "flat", "flat | conformal:<amplitude>"},
    ConfigDefault{"target.correction", "none", "none | quadratic:<amplitude> | linear:<amplitude>"},
    ConfigDefault{"target.r_star", "4", "outer edge of the normal-form chart"},
    ConfigDefault{"map.A", "identity", "integer n x m matrix, rows separated by ';'"},
    ConfigDefault{"map.offset", "0", "offset b, one entry per target axis"},
    ConfigDefault{"map.perturbation", "none", "none | sine"},
    ConfigDefault{"map.amplitude", "0", "amplitude of the sine perturbation"},
    ConfigDefault{"grid.N", "256", "boundary nodes per axis"},
    ConfigDefault{"grid.r_max", "0.8", "outer wall"},
    ConfigDefault{"grid.r_min", "0.05", "inner wall"},
    ConfigDefault{"grid.ratio", "0.85", "radial ratio q; the level count is rounded so both walls are levels"},
    ConfigDefault{"grid.levels", "auto", "explicit level count, overrides ratio"},
    ConfigDefault{"kernel.quadrature", "grid", "quadrature nodes per axis ('grid' = grid.N)"},
    ConfigDefault{"kernel.resolution_factor", "2", "require N_a >= factor * L_a / r_min"},
    ConfigDefault{"kernel.blend_fraction", "0.25", "blend width of the modified distance as a fraction of delta_inj"},
    ConfigDefault{"kernel.radii", "0.1,0.05,0.025", "radius ladder for kernel-check"},
    ConfigDefault{"kernel.samples", "200", "random (x, x', r) samples for the derivative bounds"},
    ConfigDefault{"solver.sigma", "0.2", "time step safety factor"},
    ConfigDefault{"solver.tol", "1e-6", "stop when sup |tau|_h <= tol"},
    ConfigDefault{"solver.max_steps", "200000", "flow step limit"},
    ConfigDefault{"solver.local_time_step", "true", "per-node time steps scaled by the local stencil"},
    ConfigDefault{"solver.checkpoint_every", "0", "checkpoint period in accepted steps (0 = off)"},
    ConfigDefault{"run.delta_list", "0.2,0.1,0.05", "truncation radii, strictly decreasing"},
    ConfigDefault{"run.seed", "1", "seed for random sampling"},
    ConfigDefault{"run.out", "out", "output directory"},
    ConfigDefault{"run.uniqueness_seeds", "1", "flow seeds in the exhaust uniqueness probe (1 = off)"},
    ConfigDefault{"run.seed_amplitude", "0.05", "interior perturbation of the extra seeds"},
    ConfigDefault{"barrier.epsilon", "auto", "auto | fixed positive value"},
    ConfigDefault{"barrier.use_correction", "true", "solve for the bounded correction v"},
    ConfigDefault{"barrier.tol", "1e-8", "linear residual target"},
    ConfigDefault{"compare.hessian_samples", "1000", "configurations for the Hessian trace diagnostic"},
    ConfigDefault{"compare.jacobi_samples", "1000", "Jacobi fields for the comparison inequalities"},
};

inline constexpr std::array kRequiredKeys{"source.dim", "source.lattice", "target.dim", "target.lattice"};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string::npos) {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": '" + text + "' is not a number");
  return v;
}

/// "2pi", "pi", "0.5pi" or a plain number.
inline double parse_length(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  if (t.size() >= 2 && t.substr(t.size() - 2) == "pi") {
    const std::string coef = trim(t.substr(0, t.size() - 2));
    return (coef.empty() ? 1.0 : parse_double(key, coef)) * std::numbers::pi;
  }
  return parse_double(key, t);
}

inline long long parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": '" + text + "' is not an integer");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": '" + text + "' is not a boolean");
}

}  // namespace detail

struct GridConfig {
  std::vector<int> nodes;
  double r_max = 0.8, r_min = 0.05, ratio = 0.85;
  int levels = 0;  // 0: derived from ratio

  int level_count() const {
    if (levels > 0) return levels;
    return static_cast<int>(std::lround(std::log(r_max / r_min) / -std::log(ratio))) + 1;
  }
};

struct KernelConfig {
  std::vector<int> quadrature;
  double resolution_factor = 2.0;
  double blend_fraction = 0.25;
  std::vector<double> radii;
  int samples = 200;
};

struct RunConfig {
  std::vector<double> delta_list;
  std::uint64_t seed = 1;
  std::string out = "out";
  int uniqueness_seeds = 1;
  double seed_amplitude = 0.05;
};

struct CompareConfig {
  int hessian_samples = 1000;
  int jacobi_samples = 1000;
};

struct ExperimentConfig {
  MetricSpec source, target;
  BoundaryMap map;
  GridConfig grid;
  KernelConfig kernel;
  FlowOptions solver;
  RunConfig run;
  BarrierOptions barrier;
  CompareConfig compare;
  std::string text;  // raw file contents
  std::string hash;  // FNV-1a of text

  SlabGrid make_grid() const {
    return SlabGrid::geometric(source.lattice, grid.nodes, grid.r_max, grid.r_min, grid.level_count());
  }

  KernelContext make_kernel() const {
    return KernelContext(source, kernel.quadrature, grid.r_min, kernel.resolution_factor, kernel.blend_fraction);
  }

  /// Nearest grid level to delta in log distance.
  static double snap_delta(const SlabGrid& g, double delta) { return g.radius(g.nearest_level(delta)); }
};

namespace detail {

inline void parse_metric(const boost::property_tree::ptree& pt, const std::string& sec, MetricSpec& s,
                         const std::function<std::string(const std::string&)>& get) {
  s.dim = static_cast<int>(parse_int(sec + ".dim", get(sec + ".dim")));
  if (s.dim < 1 || s.dim > kMaxBoundaryDim) throw ConfigError(sec + ".dim must be 1.." + std::to_string(kMaxBoundaryDim));
  s.lattice.clear();
  for (const std::string& t : split(get(sec + ".lattice"), ", ")) s.lattice.push_back(parse_length(sec + ".lattice", t));
  if (s.lattice.size() == 1 && s.dim > 1) s.lattice.assign(s.dim, s.lattice[0]);
  if (static_cast<int>(s.lattice.size()) != s.dim) throw ConfigError(sec + ".lattice needs one period per axis");
  const std::string bm = get(sec + ".boundary_metric");
  if (bm == "flat") {
    s.boundary_kind = BoundaryMetricKind::flat;
    s.conformal_amplitude = 0.0;
  } else if (bm.rfind("conformal:", 0) == 0) {
    s.boundary_kind = BoundaryMetricKind::conformal;
    s.conformal_amplitude = parse_double(sec + ".boundary_metric", bm.substr(10));
  } else {
    throw ConfigError(sec + ".boundary_metric must be flat or conformal:<amplitude>");
  }
  const std::string co = get(sec + ".correction");
  if (co == "none") {
    s.correction = CorrectionKind::none;
    s.correction_amplitude = 0.0;
  } else if (co.rfind("quadratic:", 0) == 0) {
    s.correction = CorrectionKind::quadratic;
    s.correction_amplitude = parse_double(sec + ".correction", co.substr(10));
  } else if (co.rfind("linear:", 0) == 0) {
    s.correction = CorrectionKind::linear;
    s.correction_amplitude = parse_double(sec + ".correction", co.substr(7));
  } else {
    throw ConfigError(sec + ".correction must be none, quadratic:<a> or linear:<a>");
  }
  s.r_star = parse_double(sec + ".r_star", get(sec + ".r_star"));
  (void)pt;
}

}  // namespace detail

/// Parses and validates a configuration; all parse-time checkable preconditions are checked.
inline ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  std::set<std::string> known;
  for (const auto& d : kDefaults) known.insert(d.key);
  for (const char* k : kRequiredKeys) known.insert(k);
  for (const auto& [sec, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + sec + "' outside a section");
    for (const auto& [key, val] : body)
      if (!known.count(sec + "." + key)) throw ConfigError("config: unknown key " + sec + "." + key);
  }
  auto get = [&](const std::string& key) -> std::string {
    if (const auto v = tree.get_optional<std::string>(key)) return detail::trim(*v);
    for (const auto& d : kDefaults)
      if (key == d.key) return d.value;
    throw ConfigError("config: missing required key " + key);
  };

  ExperimentConfig c;
  c.text = text;
  c.hash = hex64(fnv1a64(text));
  detail::parse_metric(tree, "source", c.source, get);
  detail::parse_metric(tree, "target", c.target, get);
  c.source.validate("source");
  c.target.validate("target");

  const int m = c.source.dim, n = c.target.dim;
  c.map.source_lattice = c.source.lattice;
  c.map.target_lattice = c.target.lattice;
  const std::string a = get("map.A");
  if (a == "identity") {
    if (m != n) throw ConfigError("map.A = identity needs equal source and target dimensions");
    c.map.affine = IntMat::Identity(n, m);
  } else {
    const auto rows = detail::split(a, ";");
    if (static_cast<int>(rows.size()) != n) throw ConfigError("map.A needs n rows");
    c.map.affine = IntMat(n, m);
    for (int al = 0; al < n; ++al) {
      const auto cols = detail::split(rows[al], ", ");
      if (static_cast<int>(cols.size()) != m) throw ConfigError("map.A needs m entries per row");
      for (int b = 0; b < m; ++b) c.map.affine(al, b) = detail::parse_int("map.A", cols[b]);
    }
  }
  const auto off = detail::split(get("map.offset"), ", ");
  c.map.offset = Vec::Zero(n);
  if (off.size() == 1)
    c.map.offset.setConstant(detail::parse_double("map.offset", off[0]));
  else if (static_cast<int>(off.size()) == n)
    for (int al = 0; al < n; ++al) c.map.offset[al] = detail::parse_double("map.offset", off[al]);
  else
    throw ConfigError("map.offset needs 1 or n entries");
  const std::string pk = get("map.perturbation");
  if (pk == "none")
    c.map.perturbation = PerturbationKind::none;
  else if (pk == "sine")
    c.map.perturbation = PerturbationKind::sine;
  else
    throw ConfigError("map.perturbation must be none or sine");
  c.map.amplitude = detail::parse_double("map.amplitude", get("map.amplitude"));

  const auto nodes = detail::split(get("grid.N"), ", ");
  for (const auto& t : nodes) c.grid.nodes.push_back(static_cast<int>(detail::parse_int("grid.N", t)));
  if (c.grid.nodes.size() == 1 && m > 1) c.grid.nodes.assign(m, c.grid.nodes[0]);
  if (static_cast<int>(c.grid.nodes.size()) != m) throw ConfigError("grid.N needs one count per source axis");
  c.grid.r_max = detail::parse_double("grid.r_max", get("grid.r_max"));
  c.grid.r_min = detail::parse_double("grid.r_min", get("grid.r_min"));
  c.grid.ratio = detail::parse_double("grid.ratio", get("grid.ratio"));
  if (!(c.grid.ratio > 0.5 && c.grid.ratio < 1.0)) throw ConfigError("grid.ratio must lie in (0.5, 1)");
  const std::string lv = get("grid.levels");
  c.grid.levels = lv == "auto" ? 0 : static_cast<int>(detail::parse_int("grid.levels", lv));
  if (c.grid.r_max > c.source.r_star) throw ConfigError("grid.r_max exceeds source.r_star");

  const std::string q = get("kernel.quadrature");
  if (q == "grid") {
    c.kernel.quadrature = c.grid.nodes;
  } else {
    for (const auto& t : detail::split(q, ", ")) c.kernel.quadrature.push_back(static_cast<int>(detail::parse_int("kernel.quadrature", t)));
    if (c.kernel.quadrature.size() == 1 && m > 1) c.kernel.quadrature.assign(m, c.kernel.quadrature[0]);
  }
  c.kernel.resolution_factor = detail::parse_double("kernel.resolution_factor", get("kernel.resolution_factor"));
  c.kernel.blend_fraction = detail::parse_double("kernel.blend_fraction", get("kernel.blend_fraction"));
  for (const auto& t : detail::split(get("kernel.radii"), ", ")) c.kernel.radii.push_back(detail::parse_double("kernel.radii", t));
  c.kernel.samples = static_cast<int>(detail::parse_int("kernel.samples", get("kernel.samples")));

  c.solver.sigma = detail::parse_double("solver.sigma", get("solver.sigma"));
  const std::string tol = get("solver.tol");
  c.solver.tol = tol == "inf" ? std::numeric_limits<double>::infinity() : detail::parse_double("solver.tol", tol);
  c.solver.max_steps = detail::parse_int("solver.max_steps", get("solver.max_steps"));
  c.solver.local_time_step = detail::parse_bool("solver.local_time_step", get("solver.local_time_step"));
  c.solver.checkpoint_every = detail::parse_int("solver.checkpoint_every", get("solver.checkpoint_every"));
  if (!(c.solver.sigma > 0.0) || !(c.solver.tol > 0.0) || c.solver.max_steps < 0)
    throw ConfigError("solver: sigma and tol must be positive, max_steps non-negative");

  for (const auto& t : detail::split(get("run.delta_list"), ", ")) c.run.delta_list.push_back(detail::parse_double("run.delta_list", t));
  if (c.run.delta_list.empty()) throw ConfigError("run.delta_list is empty");
  for (std::size_t i = 0; i < c.run.delta_list.size(); ++i) {
    if (i > 0 && !(c.run.delta_list[i] < c.run.delta_list[i - 1]))
      throw ConfigError("run.delta_list must be strictly decreasing");
    if (!(c.run.delta_list[i] >= c.grid.r_min * (1 - 1e-9) && c.run.delta_list[i] < c.grid.r_max))
      throw ConfigError("run.delta_list entries must lie in [grid.r_min, grid.r_max)");
  }
  c.run.seed = static_cast<std::uint64_t>(detail::parse_int("run.seed", get("run.seed")));
  c.run.out = get("run.out");
  c.run.uniqueness_seeds = static_cast<int>(detail::parse_int("run.uniqueness_seeds", get("run.uniqueness_seeds")));
  c.run.seed_amplitude = detail::parse_double("run.seed_amplitude", get("run.seed_amplitude"));
  if (c.run.uniqueness_seeds < 1) throw ConfigError("run.uniqueness_seeds must be at least 1");

  const std::string eps = get("barrier.epsilon");
  if (eps != "auto") c.barrier.epsilon = detail::parse_double("barrier.epsilon", eps);
  c.barrier.use_correction = detail::parse_bool("barrier.use_correction", get("barrier.use_correction"));
  c.barrier.tol = detail::parse_double("barrier.tol", get("barrier.tol"));

  c.compare.hessian_samples = static_cast<int>(detail::parse_int("compare.hessian_samples", get("compare.hessian_samples")));
  c.compare.jacobi_samples = static_cast<int>(detail::parse_int("compare.jacobi_samples", get("compare.jacobi_samples")));

  // parse-time preconditions: grid shape, df rank and lattice compatibility, resolution
  const SlabGrid g = c.make_grid();
  for (double d : c.run.delta_list) ExperimentConfig::snap_delta(g, d);
  c.map.validate();
  c.make_kernel();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ahharm

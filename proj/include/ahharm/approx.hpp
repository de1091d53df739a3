#pragma once

// Boundary data f: T^m -> T^n, discretized maps u = (u^alpha, rho) on a slab grid,
// and the approximate harmonic extension v of f.

#include "ahharm/core.hpp"
#include "ahharm/geometry.hpp"
#include "ahharm/grid.hpp"
#include "ahharm/kernel.hpp"

#include <vector>

namespace ahharm {

using IntMat = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxBoundaryDim, kMaxBoundaryDim>;

enum class PerturbationKind { none, sine };

/// f(x) = A x + b + eps s(x), with s^alpha(x) = sin(2 pi x^a / L_a), a = alpha mod m.
struct BoundaryMap {
  std::vector<double> source_lattice;
  std::vector<double> target_lattice;
  IntMat affine;
  Vec offset;
  PerturbationKind perturbation = PerturbationKind::none;
  double amplitude = 0.0;

  int m() const { return static_cast<int>(source_lattice.size()); }
  int n() const { return static_cast<int>(target_lattice.size()); }

  static BoundaryMap identity(const std::vector<double>& lattice) {
    const int m = static_cast<int>(lattice.size());
    BoundaryMap f{lattice, lattice, IntMat::Identity(m, m), Vec::Zero(m)};
    return f;
  }

  double perturbation_axis_wave(int alpha, double xa) const {
    const int a = alpha % m();
    return 2.0 * std::numbers::pi / source_lattice[a] * xa;
  }

  /// Lifted value (chart coordinates on the target cover).
  Vec value(const Vec& x) const {
    Vec y = affine.cast<double>() * x + offset;
    if (perturbation == PerturbationKind::sine)
      for (int al = 0; al < n(); ++al) y[al] += amplitude * std::sin(perturbation_axis_wave(al, x[al % m()]));
    return y;
  }

  /// Periodic part eps s(x).
  Vec periodic_part(const Vec& x) const {
    Vec s = Vec::Zero(n());
    if (perturbation == PerturbationKind::sine)
      for (int al = 0; al < n(); ++al) s[al] = amplitude * std::sin(perturbation_axis_wave(al, x[al % m()]));
    return s;
  }

  Mat differential(const Vec& x) const {
    Mat df = affine.cast<double>();
    if (perturbation == PerturbationKind::sine)
      for (int al = 0; al < n(); ++al) {
        const int a = al % m();
        df(al, a) += amplitude * 2.0 * std::numbers::pi / source_lattice[a] * std::cos(perturbation_axis_wave(al, x[a]));
      }
    return df;
  }

  /// Lattice compatibility and full rank of df on a sampling lattice.
  void validate(int samples_per_axis = 32) const {
    if (m() < 1 || m() > kMaxBoundaryDim || n() < 1 || n() > kMaxBoundaryDim)
      throw ConfigError("boundary map dimensions out of range");
    if (affine.rows() != n() || affine.cols() != m()) throw ConfigError("boundary map matrix A must be n x m");
    if (offset.size() != n()) throw ConfigError("boundary map offset must have n entries");
    if (n() < m()) throw DegenerateDataError("df cannot have rank m when n < m");
    for (int al = 0; al < n(); ++al)
      for (int a = 0; a < m(); ++a) {
        const double k = static_cast<double>(affine(al, a)) * source_lattice[a] / target_lattice[al];
        if (std::abs(k - std::round(k)) > 1e-9)
          throw ConfigError("A does not map the source lattice into the target lattice");
      }
    for (const Vec& x : boundary_samples(source_lattice, samples_per_axis)) {
      Eigen::JacobiSVD<Mat> svd(differential(x));
      const double smin = svd.singularValues()[m() - 1];
      if (!(smin >= 1e-3))
        throw DegenerateDataError("df degenerates at x=" + format_point(x) + " (min singular value " +
                                  std::to_string(smin) + ")");
    }
  }
};

/// ehat(f) = ghat^{ab}(x) hhat_{alpha beta}(f(x)) d_a f^alpha d_b f^beta.
inline double boundary_energy_density_at(const BoundaryMap& f, const MetricSpec& source, const MetricSpec& target,
                                         const Vec& x) {
  const Mat df = f.differential(x);
  const Mat gi = boundary_metric(source, x).inverse();
  const Mat h = boundary_metric(target, f.value(x));
  return (gi * df.transpose() * h * df).trace();
}

inline std::vector<double> boundary_energy_density(const BoundaryMap& f, const MetricSpec& source,
                                                   const MetricSpec& target, const std::vector<Vec>& points) {
  f.validate();
  std::vector<double> e(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) e[i] = boundary_energy_density_at(f, source, target, points[i]);
  return e;
}

/// Map u = (u^1..u^n, rho) on a slab grid; tangential components are lifts.
struct MapField {
  SlabGrid grid;
  std::vector<double> target_lattice;
  IntMat homotopy;
  std::vector<std::vector<double>> comp;  // n tangential components, then rho

  MapField() = default;
  MapField(SlabGrid g, std::vector<double> tl, IntMat a)
      : grid(std::move(g)), target_lattice(std::move(tl)), homotopy(std::move(a)) {
    comp.assign(target_lattice.size() + 1, std::vector<double>(grid.size(), 0.0));
  }

  int n() const { return static_cast<int>(target_lattice.size()); }
  int rho_index() const { return n(); }
  double& at(int c, int level, std::size_t j) { return comp[c][grid.index(level, j)]; }
  double at(int c, int level, std::size_t j) const { return comp[c][grid.index(level, j)]; }
  double rho(int level, std::size_t j) const { return at(n(), level, j); }

  /// Lattice jump of component alpha across one period of source axis a.
  double seam_jump(int alpha, int axis) const {
    return static_cast<double>(homotopy(alpha, axis)) * grid.lattice()[axis];
  }

  /// Target chart point (u^1..u^n, rho) at a node.
  Vec point(int level, std::size_t j) const {
    Vec p(n() + 1);
    for (int c = 0; c <= n(); ++c) p[c] = at(c, level, j);
    return p;
  }
};

inline void require_same_class(const MapField& a, const MapField& b, const std::string& what) {
  if (a.homotopy.rows() != b.homotopy.rows() || a.homotopy.cols() != b.homotopy.cols() || a.homotopy != b.homotopy)
    throw HomotopyError(what + ": maps lie in different relative homotopy classes");
  if (a.grid.radii() != b.grid.radii() || a.grid.nodes() != b.grid.nodes() || a.grid.lattice() != b.grid.lattice())
    throw ConfigError(what + ": maps live on different grids");
}

/// (1 - psi) v1 + psi v2 componentwise, psi given per grid node.
inline MapField blend_maps(const MapField& v1, const MapField& v2, const std::vector<double>& psi) {
  require_same_class(v1, v2, "blend_maps");
  if (psi.size() != v1.grid.size()) throw ConfigError("blend_maps: cutoff field has the wrong size");
  MapField out = v1;
  for (std::size_t c = 0; c < out.comp.size(); ++c)
    for (std::size_t i = 0; i < psi.size(); ++i) {
      if (!(psi[i] >= 0.0 && psi[i] <= 1.0)) throw ConfigError("blend_maps: cutoff must lie in [0, 1]");
      if (psi[i] == 0.0) continue;
      out.comp[c][i] = psi[i] == 1.0 ? v2.comp[c][i] : (1.0 - psi[i]) * v1.comp[c][i] + psi[i] * v2.comp[c][i];
    }
  return out;
}

/// v^alpha = w^alpha - r dw^alpha/dr, rho = r w_rho, where each w is the kernel extension
/// of the boundary datum written relative to its value at the evaluation point:
/// w(x, r) = phi(x) + int K(x, r; x') (phi~_x(x') - phi(x)), phi~_x the lift nearest x.
inline MapField build_approximate_solution(const BoundaryMap& f, const MetricSpec& source, const MetricSpec& target,
                                           const KernelContext& ctx, const SlabGrid& grid) {
  f.validate();
  if (f.m() != source.dim || f.n() != target.dim) throw ConfigError("boundary map dimensions do not match the metrics");
  if (grid.dim() != source.dim) throw ConfigError("grid dimension does not match the source");
  if (grid.r_min() < ctx.r_min() * (1.0 - 1e-12)) throw ResolutionError("grid reaches below the kernel's resolved r_min");
  if (grid.r_max() > source.r_star * (1.0 + 1e-12)) throw DomainError("grid leaves the source chart (r > r_star)");

  const int m = f.m(), n = f.n();
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  const std::size_t nq = ctx.quadrature_size();
  std::vector<Vec> sq(nq);
  std::vector<double> eq(nq);
  for (std::size_t i = 0; i < nq; ++i) {
    sq[i] = f.periodic_part(ctx.node(i));
    eq[i] = std::sqrt(boundary_energy_density_at(f, source, target, ctx.node(i))) / sqrt_m;
  }
  const Mat a = f.affine.cast<double>();

  MapField v(grid, f.target_lattice, f.affine);
  const std::size_t nb = grid.boundary_size();
  parallel_for(nb, [&](std::size_t j) {
    const Vec x = grid.boundary_point(j);
    const Vec fx = f.value(x);
    const Vec sx = f.periodic_part(x);
    const double ex = std::sqrt(boundary_energy_density_at(f, source, target, x)) / sqrt_m;
    std::vector<double> d(nq);
    std::vector<Vec> g(nq);
    for (std::size_t i = 0; i < nq; ++i) {
      const PairGeometry pg = ctx.pair(x, i);
      d[i] = pg.d;
      Vec gi(n + 1);
      gi.head(n) = a * pg.lift_disp + (sq[i] - sx);
      gi[n] = eq[i] - ex;
      g[i] = ctx.weight(i) * gi;
    }
    for (int k = 0; k < grid.levels(); ++k) {
      const double r = grid.radius(k);
      Vec s0 = Vec::Zero(n + 1), s1 = Vec::Zero(n + 1);
      for (std::size_t i = 0; i < nq; ++i) {
        const auto rad = ctx.radial(d[i], r);
        s0 += rad[0] * g[i];
        s1 += rad[1] * g[i];
      }
      for (int al = 0; al < n; ++al) v.at(al, k, j) = fx[al] + s0[al] - r * s1[al];
      v.at(n, k, j) = r * (ex + s0[n]);
    }
  });
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!(v.comp[n][i] > 0.0))
      throw SolverError("approximate solution has rho <= 0 at node " + std::to_string(i));
  return v;
}

/// Exact lifted map on the grid: u^alpha = value(x), rho = c(x) r.
inline MapField sample_map(const SlabGrid& grid, const std::vector<double>& target_lattice, const IntMat& a,
                           const std::function<Vec(const Vec&, double)>& u) {
  MapField out(grid, target_lattice, a);
  for (int k = 0; k < grid.levels(); ++k)
    for (std::size_t j = 0; j < grid.boundary_size(); ++j) {
      const Vec p = u(grid.boundary_point(j), grid.radius(k));
      for (int c = 0; c <= out.n(); ++c) out.at(c, k, j) = p[c];
    }
  return out;
}

}  // namespace ahharm

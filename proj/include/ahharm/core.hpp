#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ahharm {

// Boundary and target dimensions are small; chart points live in at most
// four coordinates (m <= 3 plus the defining-function direction).
inline constexpr int kMaxBoundaryDim = 3;
inline constexpr int kMaxChartDim = kMaxBoundaryDim + 1;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxChartDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxChartDim, kMaxChartDim>;

/// Christoffel array Γ^k_ij stored as one (dim x dim) matrix per upper index k.
struct Christoffel {
  int dim = 0;
  std::array<Mat, kMaxChartDim> upper{};

  Christoffel() = default;
  explicit Christoffel(int d) : dim(d) {
    for (int k = 0; k < d; ++k) upper[k] = Mat::Zero(d, d);
  }
  double operator()(int k, int i, int j) const { return upper[k](i, j); }
  double& operator()(int k, int i, int j) { return upper[k](i, j); }
};

/// Error families; the CLI maps each family onto a distinct exit code.
enum class ErrorFamily { config, resolution, solver, certification };

class Error : public std::runtime_error {
 public:
  Error(ErrorFamily family, const std::string& what) : std::runtime_error(what), family_(family) {}
  ErrorFamily family() const noexcept { return family_; }

 private:
  ErrorFamily family_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorFamily::config, w) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorFamily::config, w) {}
};
struct DegenerateMetricError : Error {
  explicit DegenerateMetricError(const std::string& w) : Error(ErrorFamily::config, w) {}
};
struct DegenerateDataError : Error {
  explicit DegenerateDataError(const std::string& w) : Error(ErrorFamily::config, w) {}
};
struct HomotopyError : Error {
  explicit HomotopyError(const std::string& w) : Error(ErrorFamily::config, w) {}
};
struct ResolutionError : Error {
  explicit ResolutionError(const std::string& w) : Error(ErrorFamily::resolution, w) {}
};
struct SolverError : Error {
  explicit SolverError(const std::string& w) : Error(ErrorFamily::solver, w) {}
};
struct ChartOverflowError : Error {
  explicit ChartOverflowError(const std::string& w) : Error(ErrorFamily::solver, w) {}
};
struct CertificationError : Error {
  explicit CertificationError(const std::string& w) : Error(ErrorFamily::certification, w) {}
};

inline int exit_code(ErrorFamily f) {
  switch (f) {
    case ErrorFamily::config: return 2;
    case ErrorFamily::resolution: return 3;
    case ErrorFamily::solver: return 4;
    case ErrorFamily::certification: return 5;
  }
  return 1;
}

/// Number of worker threads used by node-parallel loops. 1 means serial.
inline int& thread_count() {
  static int n = 1;
  return n;
}

/// Static-chunked parallel map over [0, n). Each index is visited exactly once;
/// callers keep reductions outside so results do not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int threads = std::max(1, thread_count());
  if (threads == 1 || n < 2 * static_cast<std::size_t>(threads)) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

inline std::string format_point(const Vec& p) {
  std::string s = "(";
  for (int i = 0; i < p.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(p[i]);
  }
  return s + ")";
}

}  // namespace ahharm

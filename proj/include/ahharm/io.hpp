#pragma once

// MapField binary files ("AHHM"), flow checkpoints ("AHFS") and versioned CSV output.

#include "ahharm/approx.hpp"
#include "ahharm/core.hpp"
#include "ahharm/solver.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>
#include <string_view>

namespace ahharm {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw ConfigError("binary file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

inline void expect_magic(std::istream& is, const char* magic) {
  char m[4];
  if (!is.read(m, 4) || std::memcmp(m, magic, 4) != 0)
    throw ConfigError(std::string("not a ") + magic + " file (bad magic bytes)");
}

}  // namespace detail

inline constexpr std::uint32_t kMapFieldVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_map_field(std::ostream& os, const MapField& u) {
  const SlabGrid& g = u.grid;
  const int m = g.dim(), n = u.n();
  os.write("AHHM", 4);
  detail::put_le<std::uint32_t>(os, kMapFieldVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(n));
  for (int a = 0; a < m; ++a) detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.nodes()[a]));
  for (int a = 0; a < m; ++a) detail::put_le<double>(os, g.lattice()[a]);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.levels()));
  for (double r : g.radii()) detail::put_le<double>(os, r);
  for (int al = 0; al < n; ++al)
    for (int a = 0; a < m; ++a) detail::put_le<std::int64_t>(os, u.homotopy(al, a));
  for (double l : u.target_lattice) detail::put_le<double>(os, l);
  for (const auto& comp : u.comp)
    for (double x : comp) detail::put_le<double>(os, x);
}

inline MapField read_map_field(std::istream& is) {
  detail::expect_magic(is, "AHHM");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kMapFieldVersion) throw ConfigError("unsupported map file version " + std::to_string(version));
  const int m = static_cast<int>(detail::get_le<std::uint32_t>(is));
  const int n = static_cast<int>(detail::get_le<std::uint32_t>(is));
  if (m < 1 || m > kMaxBoundaryDim || n < 1 || n > kMaxBoundaryDim) throw ConfigError("map file has bad dimensions");
  std::vector<int> nodes(m);
  std::vector<double> lattice(m);
  for (int& x : nodes) x = static_cast<int>(detail::get_le<std::uint32_t>(is));
  for (double& x : lattice) x = detail::get_le<double>(is);
  const auto levels = detail::get_le<std::uint32_t>(is);
  if (levels > (1u << 20)) throw ConfigError("map file has an implausible level count");
  std::vector<double> radii(levels);
  for (double& r : radii) r = detail::get_le<double>(is);
  IntMat a(n, m);
  for (int al = 0; al < n; ++al)
    for (int b = 0; b < m; ++b) a(al, b) = detail::get_le<std::int64_t>(is);
  std::vector<double> tl(n);
  for (double& x : tl) x = detail::get_le<double>(is);
  MapField u(SlabGrid(lattice, nodes, radii), tl, a);
  for (auto& comp : u.comp)
    for (double& x : comp) x = detail::get_le<double>(is);
  return u;
}

inline void save_map_field(const std::string& path, const MapField& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  write_map_field(os, u);
}

inline MapField load_map_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  return read_map_field(is);
}

inline void write_checkpoint(std::ostream& os, const FlowState& st) {
  os.write("AHFS", 4);
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::int64_t>(os, st.step);
  detail::put_le<double>(os, st.dt);
  detail::put_le<double>(os, st.tension_sup);
  detail::put_le<double>(os, st.energy_sup);
  detail::put_le<std::int64_t>(os, st.rejected);
  detail::put_le<std::int64_t>(os, st.clamp_events);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(st.history.size()));
  for (const FlowRecord& r : st.history) {
    detail::put_le<std::int64_t>(os, r.step);
    detail::put_le<double>(os, r.tension_sup);
    detail::put_le<double>(os, r.energy_sup);
  }
  write_map_field(os, st.u);
}

inline FlowState read_checkpoint(std::istream& is) {
  detail::expect_magic(is, "AHFS");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  FlowState st;
  st.step = detail::get_le<std::int64_t>(is);
  st.dt = detail::get_le<double>(is);
  st.tension_sup = detail::get_le<double>(is);
  st.energy_sup = detail::get_le<double>(is);
  st.rejected = detail::get_le<std::int64_t>(is);
  st.clamp_events = detail::get_le<std::int64_t>(is);
  const auto count = detail::get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    FlowRecord r;
    r.step = detail::get_le<std::int64_t>(is);
    r.tension_sup = detail::get_le<double>(is);
    r.energy_sup = detail::get_le<double>(is);
    st.history.push_back(r);
  }
  st.u = read_map_field(is);
  return st;
}

inline void save_checkpoint(const std::string& path, const FlowState& st) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + tmp);
    write_checkpoint(os, st);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw ConfigError("cannot move checkpoint into " + path);
}

inline FlowState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  return read_checkpoint(is);
}

/// Comma-separated output with a leading "# schema=<name>/<version> config_hash=<hex>" line
/// and a mandatory header row. Doubles use the classic locale at 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& schema, int version, const std::string& config_hash,
            const std::vector<std::string>& header)
      : os_(path), columns_(header.size()) {
    if (!os_) throw ConfigError("cannot write " + path);
    os_.imbue(std::locale::classic());
    os_ << std::setprecision(17);
    os_ << "# schema=" << schema << '/' << version << " config_hash=" << config_hash << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... values) {
    if (sizeof...(Ts) != columns_) throw ConfigError("CSV row has the wrong number of columns");
    std::size_t i = 0;
    ((os_ << (i++ ? "," : ""), put(values)), ...);
    os_ << '\n';
  }

  void row_values(const std::vector<double>& values) {
    if (values.size() != columns_) throw ConfigError("CSV row has the wrong number of columns");
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << values[i];
    os_ << '\n';
  }

 private:
  void put(double v) { os_ << v; }
  void put(float v) { os_ << static_cast<double>(v); }
  void put(const std::string& s) { os_ << s; }
  void put(const char* s) { os_ << s; }
  void put(bool b) { os_ << (b ? 1 : 0); }
  template <class T>
    requires std::is_integral_v<T>
  void put(T v) {
    os_ << v;
  }

  std::ofstream os_;
  std::size_t columns_;
};

/// (level, r, x..., u..., rho) rows for every node.
inline void write_map_field_csv(const std::string& path, const MapField& u, const std::string& config_hash) {
  const SlabGrid& g = u.grid;
  std::vector<std::string> header{"level", "r"};
  for (int a = 0; a < g.dim(); ++a) header.push_back("x" + std::to_string(a + 1));
  for (int c = 0; c < u.n(); ++c) header.push_back("u" + std::to_string(c + 1));
  header.push_back("rho");
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << "# schema=map_field/1 config_hash=" << config_hash << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (int k = 0; k < g.levels(); ++k)
    for (std::size_t j = 0; j < g.boundary_size(); ++j) {
      os << k << ',' << g.radius(k);
      const Vec x = g.boundary_point(j);
      for (int a = 0; a < g.dim(); ++a) os << ',' << x[a];
      for (int c = 0; c <= u.n(); ++c) os << ',' << u.at(c, k, j);
      os << '\n';
    }
}

}  // namespace ahharm

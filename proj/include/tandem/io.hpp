// Canonical text outputs: shortest round-trip float formatting, value and
// policy CSV tables, and a stable content hash for run manifests.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dp.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace tandem::io {

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double out = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return out;
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xF];
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

/// Rows `x1,x2,v` in row-major order.
inline std::string value_csv(const ValueTable& v) {
  std::string s = "x1,x2,v\n";
  for (int x1 = 0; x1 <= v.L1(); ++x1)
    for (int x2 = 0; x2 <= v.L2(); ++x2)
      s += std::to_string(x1) + ',' + std::to_string(x2) + ',' + format_double(v(x1, x2)) + '\n';
  return s;
}

/// Rows `x1,x2,a_value,b_value,a_argmin_count,b_argmin_count`.
inline std::string policy_csv(const TandemModel& model, const PolicyTable& p) {
  std::string s = "x1,x2,a_value,b_value,a_argmin_count,b_argmin_count\n";
  for (int x1 = 0; x1 <= p.a.L1(); ++x1)
    for (int x2 = 0; x2 <= p.a.L2(); ++x2) {
      s += std::to_string(x1) + ',' + std::to_string(x2) + ',' +
           format_double(model.node1().actions[p.a(x1, x2)]) + ',' +
           format_double(model.node2().actions[p.b(x1, x2)]) + ',' +
           std::to_string(p.a_set(x1, x2).size()) + ',' + std::to_string(p.b_set(x1, x2).size()) + '\n';
    }
  return s;
}

class PolicyFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::uint32_t grid_index(const ActionGrid& grid, double value, int x1, int x2) {
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] == value) return static_cast<std::uint32_t>(i);
  throw PolicyFormatError("state (" + std::to_string(x1) + "," + std::to_string(x2) +
                          "): action " + format_double(value) + " is not on the grid");
}

}  // namespace detail

/// Parses a policy table in the `policy_csv` layout. Every box state must
/// appear exactly once; action values must be grid points. Argmin counts
/// are ignored and the result carries singleton sets.
inline PolicyTable parse_policy_csv(const std::string& text, const TandemModel& model,
                                    const TruncationSpec& box) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw PolicyFormatError("empty policy file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split(line, ',');
  if (header.size() < 4 || header[0] != "x1" || header[1] != "x2" || header[2] != "a_value" ||
      header[3] != "b_value")
    throw PolicyFormatError("policy header must start with x1,x2,a_value,b_value");

  PolicyTable p(box);
  BoxTable<char> seen(box, 0);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() < 4) throw PolicyFormatError("short policy row: " + line);
    const int x1 = static_cast<int>(parse_double(f[0]));
    const int x2 = static_cast<int>(parse_double(f[1]));
    if (!box.in_box({x1, x2})) throw PolicyFormatError("policy row outside box: " + line);
    if (seen(x1, x2)) throw PolicyFormatError("duplicate policy row: " + line);
    seen(x1, x2) = 1;
    const auto a = detail::grid_index(model.node1().actions, parse_double(f[2]), x1, x2);
    const auto b = detail::grid_index(model.node2().actions, parse_double(f[3]), x1, x2);
    p.a(x1, x2) = a;
    p.b(x1, x2) = b;
    p.a_set(x1, x2) = {a};
    p.b_set(x1, x2) = {b};
    ++rows;
  }
  if (rows != box.num_states()) {
    for (std::size_t i = 0; i < box.num_states(); ++i)
      if (!seen[i]) {
        const State x = box.state(i);
        throw PolicyFormatError("policy file misses state (" + std::to_string(x.x1) + "," +
                                std::to_string(x.x2) + ")");
      }
  }
  return p;
}

}  // namespace tandem::io

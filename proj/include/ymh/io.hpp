#pragma once

// CSV time series and binary metric snapshots.

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>

#include "ymh/flow.hpp"

namespace ymh {

static_assert(std::endian::native == std::endian::little, "snapshot format assumes a little-endian host");

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string hym_column(double alpha, double n) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "hym_%g_%g", alpha, n);
  return buf;
}

inline std::vector<std::string> csv_columns(const std::vector<std::pair<double, double>>& hym_pairs, int rank) {
  std::vector<std::string> c{"t", "ymh", "i_func", "sup_theta", "sup_phi_sq", "min_eig_h", "trace_heat_res", "acd_p"};
  for (auto [a, n] : hym_pairs) c.push_back(hym_column(a, n));
  for (int i = 1; i <= rank; ++i) c.push_back("lambda_" + std::to_string(i));
  c.push_back("spatial_dev");
  return c;
}

inline std::vector<double> csv_values(const DiagnosticsRow& r) {
  std::vector<double> v{r.t, r.ymh, r.i_func, r.sup_theta, r.sup_phi_sq, r.min_eig_h, r.trace_heat_res, r.acd_p};
  v.insert(v.end(), r.hym.begin(), r.hym.end());
  v.insert(v.end(), r.lambda.begin(), r.lambda.end());
  v.push_back(r.spatial_dev);
  return v;
}

inline std::string diagnostics_csv(const Diagnostics& d, int rank) {
  std::ostringstream out;
  out << boost::join(csv_columns(d.hym_pairs, rank), ",") << "\n";
  for (const DiagnosticsRow& r : d.rows) {
    const std::vector<double> v = csv_values(r);
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << format_double(v[i]);
    out << "\n";
  }
  return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (boost::trim_copy(line).empty()) continue;
    std::vector<std::string> f;
    boost::split(f, line, [](char c) { return c == ','; });
    if (t.columns.empty()) {
      for (auto& x : f) t.columns.push_back(boost::trim_copy(x));
      continue;
    }
    if (f.size() != t.columns.size())
      throw InputError("csv line " + std::to_string(number) + ": expected " + std::to_string(t.columns.size()) +
                       " fields, got " + std::to_string(f.size()));
    std::vector<double> row;
    for (auto& x : f) {
      const std::string s = boost::trim_copy(x);
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size())
        throw InputError("csv line " + std::to_string(number) + ": not a number '" + s + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Snapshots: "YMHF", u32 version, u32 n, u32 R, f64 t, then per site the
// R x R entries of h row-major as (re, im) f64 pairs.

inline constexpr std::uint32_t kSnapshotVersion = 1;

template <int R>
std::string encode_snapshot(const MetricState<R>& st) {
  std::string out("YMHF");
  auto put = [&](const auto& v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); };
  put(kSnapshotVersion);
  put(static_cast<std::uint32_t>(st.h.grid().n()));
  put(static_cast<std::uint32_t>(R));
  put(st.t);
  for (const auto& m : st.h.values())
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < R; ++j) {
        put(m(i, j).real());
        put(m(i, j).imag());
      }
  return out;
}

struct SnapshotHeader {
  std::uint32_t version = 0;
  std::uint32_t n = 0;
  std::uint32_t rank = 0;
  double t = 0.0;
};

inline SnapshotHeader snapshot_header(const std::string& bytes) {
  constexpr std::size_t size = 4 + 3 * 4 + 8;
  if (bytes.size() < size || bytes.compare(0, 4, "YMHF") != 0) throw IoError("not a snapshot (bad magic)");
  SnapshotHeader h;
  std::memcpy(&h.version, bytes.data() + 4, 4);
  std::memcpy(&h.n, bytes.data() + 8, 4);
  std::memcpy(&h.rank, bytes.data() + 12, 4);
  std::memcpy(&h.t, bytes.data() + 16, 8);
  if (h.version != kSnapshotVersion) throw IoError("unsupported snapshot version " + std::to_string(h.version));
  return h;
}

/// The grid and sector come from the background the snapshot is loaded into.
template <int R>
MetricState<R> decode_snapshot(const std::string& bytes, const Background<R>& bg) {
  const SnapshotHeader h = snapshot_header(bytes);
  if (static_cast<int>(h.rank) != R) throw IoError("snapshot rank " + std::to_string(h.rank) + " != " + std::to_string(R));
  if (static_cast<int>(h.n) != bg.grid.n()) throw IoError("snapshot grid " + std::to_string(h.n) + " != " +
                                                          std::to_string(bg.grid.n()));
  const std::size_t body = static_cast<std::size_t>(h.n) * h.n * R * R * 16;
  if (bytes.size() != 24 + body) throw IoError("snapshot size mismatch");
  MetricState<R> st = initial_state(bg);
  st.t = h.t;
  const char* p = bytes.data() + 24;
  for (auto& m : st.h.values())
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < R; ++j) {
        double re, im;
        std::memcpy(&re, p, 8);
        std::memcpy(&im, p + 8, 8);
        p += 16;
        m(i, j) = cd(re, im);
      }
  return st;
}

template <int R>
void save_snapshot(const std::string& path, const MetricState<R>& st) {
  write_text(path, encode_snapshot(st));
}

template <int R>
MetricState<R> load_snapshot(const std::string& path, const Background<R>& bg) {
  return decode_snapshot(read_text(path), bg);
}

}  // namespace ymh

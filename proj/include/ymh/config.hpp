#pragma once

// Experiment configs: "key = value" lines under [section] headers, '#' comments.

#include <boost/algorithm/string.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ymh/flow.hpp"

namespace ymh {

struct OutputPaths {
  std::string csv;
  std::string snapshot;
  std::string report;
};

struct ExperimentConfig {
  int n = 0;
  BundleConfig bundle;
  FlowParams flow;
  std::vector<std::pair<double, double>> hym_pairs{{1.0, 0.0}, {2.0, 0.0}, {4.0, 3.0}};
  double lp_for_critical = 2.0;
  OutputPaths output;
  std::optional<std::vector<double>> expect_type;
  std::string source;
};

namespace detail {

struct ConfigLine {
  int number;
  std::string value;
};

class ConfigReader {
 public:
  ConfigReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + msg);
  }

  double to_double(const ConfigLine& l, const std::string& text) const {
    const std::string t = boost::trim_copy(text);
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) fail(l.number, "not a number: '" + t + "'");
    return v;
  }

  long long to_int(const ConfigLine& l, const std::string& text) const {
    const std::string t = boost::trim_copy(text);
    long long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) fail(l.number, "not an integer: '" + t + "'");
    return v;
  }

  std::uint64_t to_u64(const ConfigLine& l, const std::string& text) const {
    const std::string t = boost::trim_copy(text);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) fail(l.number, "not a seed: '" + t + "'");
    return v;
  }

  /// "a" or "a/b".
  double to_fraction(const ConfigLine& l, const std::string& text) const {
    const auto slash = text.find('/');
    if (slash == std::string::npos) return to_double(l, text);
    const double den = to_double(l, text.substr(slash + 1));
    if (den == 0.0) fail(l.number, "zero denominator");
    return to_double(l, text.substr(0, slash)) / den;
  }

  std::string source_;
};

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  boost::split(out, s, [sep](char c) { return c == sep; });
  for (auto& x : out) boost::trim(x);
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  using detail::ConfigLine;
  detail::ConfigReader rd(source);
  std::map<std::string, std::map<std::string, ConfigLine>> kv;
  std::vector<ConfigLine> block_lines;

  static const std::map<std::string, std::vector<std::string>> known = {
      {"geometry", {"n"}},
      {"bundle", {"degrees", "seed", "block"}},
      {"flow", {"dt_safety", "t_max", "stop_tolerance", "stop_mode", "snapshot_interval", "initial_conformal"}},
      {"functionals", {"hym_pairs", "lp_for_critical"}},
      {"output", {"csv_path", "snapshot_path", "report_path"}},
      {"expect", {"type"}},
  };

  std::string section;
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    std::string line = raw.substr(0, raw.find('#'));
    boost::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') rd.fail(number, "unterminated section header");
      section = boost::trim_copy(line.substr(1, line.size() - 2));
      if (!known.count(section)) rd.fail(number, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) rd.fail(number, "expected 'key = value'");
    if (section.empty()) rd.fail(number, "key outside of any section");
    const std::string key = boost::trim_copy(line.substr(0, eq));
    const std::string value = boost::trim_copy(line.substr(eq + 1));
    const auto& keys = known.at(section);
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      rd.fail(number, "unknown key '" + key + "' in [" + section + "]");
    if (section == "bundle" && key == "block") {
      block_lines.push_back({number, value});
      continue;
    }
    if (kv[section].count(key)) rd.fail(number, "duplicate key '" + key + "'");
    kv[section][key] = {number, value};
  }

  auto get = [&](const std::string& sec, const std::string& key) -> const ConfigLine* {
    auto s = kv.find(sec);
    if (s == kv.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  };
  auto require = [&](const std::string& sec, const std::string& key) -> const ConfigLine& {
    const ConfigLine* l = get(sec, key);
    if (!l) rd.fail(number, "missing required key '" + key + "' in [" + sec + "]");
    return *l;
  };

  ExperimentConfig c;
  c.source = source;
  {
    const ConfigLine& l = require("geometry", "n");
    const long long n = rd.to_int(l, l.value);
    if (n < 4 || n > 4096) rd.fail(l.number, "n must lie in [4, 4096]");
    c.n = static_cast<int>(n);
  }
  {
    const ConfigLine& l = require("bundle", "degrees");
    for (const auto& d : detail::split_list(l.value, ',')) c.bundle.degrees.push_back(static_cast<int>(rd.to_int(l, d)));
    if (c.bundle.rank() < 1 || c.bundle.rank() > 3) rd.fail(l.number, "rank must be 1, 2 or 3");
  }
  if (const ConfigLine* l = get("bundle", "seed")) c.bundle.seed = rd.to_u64(*l, l->value);
  for (const ConfigLine& l : block_lines) {
    const auto f = detail::split_list(l.value, ',');
    if (f.size() < 3) rd.fail(l.number, "block needs 'i,j,kind,...'");
    HiggsBlock b;
    b.line = l.number;
    b.i = static_cast<int>(rd.to_int(l, f[0]));
    b.j = static_cast<int>(rd.to_int(l, f[1]));
    const std::string kind = boost::to_lower_copy(f[2]);
    if (kind == "constant") {
      if (f.size() != 4) rd.fail(l.number, "constant block is 'i,j,constant,value'");
      b.kind = BlockKind::constant;
      b.value = rd.to_double(l, f[3]);
    } else if (kind == "section") {
      if (f.size() != 5) rd.fail(l.number, "section block is 'i,j,section,seed,scale'");
      b.kind = BlockKind::section;
      b.seed = rd.to_u64(l, f[3]);
      b.scale = rd.to_double(l, f[4]);
    } else if (kind == "aliased") {
      if (f.size() != 6) rd.fail(l.number, "aliased block is 'i,j,aliased,seed,scale,amp'");
      b.kind = BlockKind::aliased;
      b.seed = rd.to_u64(l, f[3]);
      b.scale = rd.to_double(l, f[4]);
      b.alias_amplitude = rd.to_double(l, f[5]);
    } else {
      rd.fail(l.number, "unknown block kind '" + f[2] + "'");
    }
    c.bundle.blocks.push_back(b);
  }
  try {
    c.bundle.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  for (int d : c.bundle.degrees)
    if (static_cast<long long>(c.n) * c.n < 32LL * std::abs(d))
      rd.fail(require("bundle", "degrees").number, "grid too coarse for degree " + std::to_string(d) +
                                                       " (need n^2 >= 32 |d|)");

  auto opt_double = [&](const char* key, double& dst) {
    if (const ConfigLine* l = get("flow", key)) dst = rd.to_double(*l, l->value);
  };
  opt_double("dt_safety", c.flow.dt_safety);
  opt_double("t_max", c.flow.t_max);
  opt_double("stop_tolerance", c.flow.stop_tolerance);
  opt_double("snapshot_interval", c.flow.snapshot_interval);
  opt_double("initial_conformal", c.flow.initial_conformal);
  if (const ConfigLine* l = get("flow", "stop_mode")) {
    if (l->value == "relative") c.flow.stop_mode = StopMode::relative;
    else if (l->value == "absolute") c.flow.stop_mode = StopMode::absolute;
    else rd.fail(l->number, "stop_mode must be 'relative' or 'absolute'");
  }
  c.flow.lambda = einstein_constant(c.bundle);
  try {
    c.flow.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }

  if (const ConfigLine* l = get("functionals", "hym_pairs")) {
    c.hym_pairs.clear();
    for (const auto& item : detail::split_list(l->value, ';')) {
      if (item.size() < 2 || item.front() != '(' || item.back() != ')')
        rd.fail(l->number, "hym pair must look like (alpha,N): '" + item + "'");
      const auto f = detail::split_list(item.substr(1, item.size() - 2), ',');
      if (f.size() != 2) rd.fail(l->number, "hym pair must look like (alpha,N): '" + item + "'");
      const double alpha = rd.to_double(*l, f[0]), n = rd.to_double(*l, f[1]);
      if (alpha < 1.0) rd.fail(l->number, "hym alpha must be >= 1");
      if (n < 0.0) rd.fail(l->number, "hym N must be >= 0");
      c.hym_pairs.emplace_back(alpha, n);
    }
  }
  if (const ConfigLine* l = get("functionals", "lp_for_critical")) {
    c.lp_for_critical = rd.to_double(*l, l->value);
    if (c.lp_for_critical < 1.0) rd.fail(l->number, "lp_for_critical must be >= 1");
  }

  if (const ConfigLine* l = get("output", "csv_path")) c.output.csv = l->value;
  if (const ConfigLine* l = get("output", "snapshot_path")) c.output.snapshot = l->value;
  if (const ConfigLine* l = get("output", "report_path")) c.output.report = l->value;

  if (const ConfigLine* l = get("expect", "type")) {
    std::vector<double> t;
    for (const auto& v : detail::split_list(l->value, ',')) t.push_back(rd.to_fraction(*l, v));
    if (static_cast<int>(t.size()) != c.bundle.rank()) rd.fail(l->number, "expected type length must equal rank");
    c.expect_type = t;
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_config(in, path);
}

inline ExperimentConfig parse_config_string(const std::string& text, const std::string& source = "<config>") {
  std::istringstream in(text);
  return parse_config(in, source);
}

}  // namespace ymh

#pragma once

// Config -> run -> checks, CSV, snapshot and report; CSV re-checking; grid refinement.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ymh/config.hpp"
#include "ymh/io.hpp"

namespace ymh {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunArtifacts {
  ExperimentConfig config;
  OracleResult oracle;
  Diagnostics diagnostics;
  std::string status;
  long steps = 0;
  double dt = 0.0;
  TypeEstimate estimate;
  double frame_defect = 0.0;  // max over rows
  std::vector<CheckResult> checks;
  std::string csv;
  std::string snapshot;
  std::string report;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

inline std::string join_values(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v[i]);
    s += (i ? "," : "") + std::string(buf);
  }
  return s + ")";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Monotone columns

struct MonotoneViolation {
  std::string column;
  std::size_t row = 0;  // index of the offending row (0-based, data rows)
  double increase = 0.0;
  double slack = 0.0;
};

/// eps_int = 10 dt max|dE/dt|, with a floor at 1e-9 max|E| for roundoff.
/// The rate is taken over decreasing segments so an uptick cannot widen its own slack.
inline double monotone_slack(const std::vector<double>& t, const std::vector<double>& v, double dt) {
  double rate = 0.0, mag = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    mag = std::max(mag, std::abs(v[k]));
    if (k > 0 && t[k] > t[k - 1] && v[k] < v[k - 1]) rate = std::max(rate, (v[k - 1] - v[k]) / (t[k] - t[k - 1]));
  }
  return 10.0 * dt * rate + 1e-9 * mag;
}

inline std::vector<MonotoneViolation> monotone_violations(const CsvTable& table, double dt) {
  std::vector<MonotoneViolation> out;
  const int it = table.column("t");
  std::vector<double> t;
  for (const auto& r : table.rows) t.push_back(r[it]);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const std::string& name = table.columns[c];
    if (!(name == "ymh" || name == "sup_theta" || name.rfind("hym_", 0) == 0)) continue;
    std::vector<double> v;
    for (const auto& r : table.rows) v.push_back(r[c]);
    const double slack = monotone_slack(t, v, dt);
    for (std::size_t k = 1; k < v.size(); ++k)
      if (v[k] > v[k - 1] + slack) out.push_back({name, k, v[k] - v[k - 1], slack});
  }
  return out;
}

/// Smallest positive spacing of the t column: an upper bound for the step.
inline double inferred_step(const CsvTable& table) {
  const int it = table.column("t");
  double dt = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < table.rows.size(); ++k) {
    const double d = table.rows[k][it] - table.rows[k - 1][it];
    if (d > 0) dt = std::min(dt, d);
  }
  return std::isfinite(dt) ? dt : 0.0;
}

struct CsvReport {
  std::vector<CheckResult> checks;
  std::string text;
  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

/// Re-checks a run's CSV: monotone columns and the final I against the stop rule.
inline CsvReport check_csv(const CsvTable& table, double dt, double stop_tolerance, StopMode mode) {
  if (table.rows.empty()) throw ConfigError("no rows");
  for (const char* col : {"t", "ymh", "i_func", "sup_theta"})
    if (table.column(col) < 0) throw InputError(std::string("csv: missing column '") + col + "'");
  CsvReport rep;
  const auto viol = monotone_violations(table, dt);
  CheckResult mono{"monotone", viol.empty(), "dt=" + format_double(dt)};
  for (const auto& v : viol) {
    mono.detail += "; " + v.column + " increases at row " + std::to_string(v.row) + " (t=" +
                   format_double(table.rows[v.row][table.column("t")]) + ") by " + format_double(v.increase) +
                   " > eps_int " + format_double(v.slack);
  }
  rep.checks.push_back(mono);

  const int ii = table.column("i_func");
  const double i0 = table.rows.front()[ii], ifin = table.rows.back()[ii];
  const double threshold = mode == StopMode::relative ? stop_tolerance * std::max(i0, 1e-12) : stop_tolerance;
  rep.checks.push_back({"i_final", ifin < threshold,
                        "I(0)=" + format_double(i0) + " I(T)=" + format_double(ifin) + " threshold=" +
                            format_double(threshold)});

  std::ostringstream s;
  s << "rows=" << table.rows.size() << "\n";
  for (const std::string& name : table.columns) {
    const int c = table.column(name);
    s << name << ": first=" << format_double(table.rows.front()[c]) << " last="
      << format_double(table.rows.back()[c]) << "\n";
  }
  for (const auto& c : rep.checks) s << (c.pass ? "PASS " : "FAIL ") << c.name << " " << c.detail << "\n";
  rep.text = s.str();
  return rep;
}

// ---------------------------------------------------------------------------
// Runs

template <int R>
RunArtifacts run_experiment_rank(const ExperimentConfig& cfg, const SnapshotObserver<R>& extra = {}) {
  RunArtifacts out;
  out.config = cfg;
  out.oracle = oracle_hn_type(cfg.bundle);
  const Background<R> bg = build_background<R>(cfg.bundle, TorusGrid(cfg.n));
  const HiggsField<R> higgs = build_higgs(cfg.bundle, bg);

  std::optional<CriticalTarget> target;
  const bool unstable = out.oracle.hn.steps.size() > 1;
  if (unstable) target = CriticalTarget{out.oracle.hn, cfg.lp_for_critical};

  auto observer = [&](const MetricState<R>& st, const Evaluation<R>& e, const DiagnosticsRow& row) {
    out.frame_defect = std::max(out.frame_defect, frame_spectrum_defect(e));
    if (extra) extra(st, e, row);
  };
  RunResult<R> res = run_flow(bg, higgs, cfg.flow, cfg.hym_pairs, target, SnapshotObserver<R>(observer));
  out.diagnostics = std::move(res.diagnostics);
  out.status = res.status;
  out.steps = res.steps;
  out.dt = res.dt;
  out.estimate = res.estimate;
  out.csv = diagnostics_csv(out.diagnostics, R);
  out.snapshot = encode_snapshot(res.final_state);

  const std::vector<double> expected = cfg.expect_type ? *cfg.expect_type : out.oracle.type.values();
  const auto& rows = out.diagnostics.rows;

  {
    double err = 0.0;
    for (int i = 0; i < R; ++i) err = std::max(err, std::abs(out.estimate.lambda[i] - expected[i]));
    const bool pass = err <= 0.02 && out.estimate.spatial_dev < 0.02;
    out.checks.push_back({"type", pass,
                          "estimate " + detail::join_values(out.estimate.lambda) + " vs " +
                              (cfg.expect_type ? "expected " : "oracle ") + detail::join_values(expected) +
                              " max_err=" + format_double(err) + " spatial_dev=" +
                              format_double(out.estimate.spatial_dev)});
  }
  {
    double worst = -1e300;
    for (const auto& r : rows) worst = std::max(worst, dominance_defect(expected, r.lambda));
    const Dominance final_verdict = dominance_compare(expected, out.estimate.lambda, 0.02);
    out.checks.push_back({"dominance", worst <= 0.05,
                          std::string("max partial-sum shortfall ") + format_double(worst) + ", final oracle " +
                              to_string(final_verdict) + " estimate"});
  }
  {
    CsvTable table = parse_csv(out.csv);
    const auto viol = monotone_violations(table, out.dt);
    std::string d = std::to_string(viol.size()) + " violations";
    for (const auto& v : viol) d += "; " + v.column + " row " + std::to_string(v.row);
    out.checks.push_back({"monotone", viol.empty(), d});
  }
  {
    const double i0 = rows.front().i_func, ifin = rows.back().i_func;
    const double thr = cfg.flow.stop_mode == StopMode::relative ? cfg.flow.stop_tolerance * std::max(i0, 1e-12)
                                                                : cfg.flow.stop_tolerance;
    out.checks.push_back({"i_final", ifin < thr,
                          "I(0)=" + format_double(i0) + " I(T)=" + format_double(ifin) + " status=" + out.status});
  }
  {
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.sup_phi_sq);
    const double bound = 1.1 * rows.front().sup_phi_sq;
    out.checks.push_back({"higgs_c0", worst <= bound,
                          "max sup|phi|^2=" + format_double(worst) + " bound=" + format_double(bound)});
  }
  out.checks.push_back({"frame_spectrum", out.frame_defect <= 1e-9, "max defect " + format_double(out.frame_defect)});
  if (unstable) {
    const double a0 = rows.front().acd_p, a1 = rows.back().acd_p;
    const double bound = std::max(0.05 * a0, 1e-8);
    out.checks.push_back({"critical_distance", a1 < bound,
                          "initial=" + format_double(a0) + " final=" + format_double(a1)});
  }
  {
    const Evaluation<R> e = evaluate(res.final_state, higgs, bg);
    const GradedReport g = seshadri_graded_check(out.oracle, e);
    if (g.expected.size() > 1 || g.clusters.size() > 1) {
      double worst = 0.0;
      for (const auto& w : g.whc) worst = std::max(worst, w.max());
      out.checks.push_back({"splitting", g.status == GradedStatus::pass,
                            std::string(to_string(g.status)) + (g.reason.empty() ? "" : " (" + g.reason + ")") +
                                " max whc=" + format_double(worst)});
    }
  }

  std::ostringstream s;
  s << "config=" << cfg.source << "\n"
    << "n=" << cfg.n << "\n"
    << "rank=" << R << "\n"
    << "dt=" << format_double(out.dt) << "\n"
    << "steps=" << out.steps << "\n"
    << "t_final=" << format_double(rows.back().t) << "\n"
    << "status=" << out.status << "\n"
    << "oracle_type=" << out.oracle.type.str() << "\n"
    << "estimate=" << detail::join_values(out.estimate.lambda) << "\n"
    << "spatial_dev=" << format_double(out.estimate.spatial_dev) << "\n"
    << "dominance=" << to_string(dominance_compare(expected, out.estimate.lambda, 0.02)) << "\n";
  for (const auto& c : out.checks) s << "check." << c.name << "=" << (c.pass ? "pass" : "fail") << " " << c.detail << "\n";
  s << (out.ok() ? "type " + detail::join_values(out.estimate.lambda) + " == oracle " + out.oracle.type.str()
                 : std::string("checks failed"))
    << "\n";
  out.report = s.str();
  return out;
}

inline RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.bundle.rank()) {
    case 1: return run_experiment_rank<1>(cfg);
    case 2: return run_experiment_rank<2>(cfg);
    case 3: return run_experiment_rank<3>(cfg);
    default: throw ConfigError("rank must be 1, 2 or 3");
  }
}

inline void write_artifacts(const RunArtifacts& a) {
  if (!a.config.output.csv.empty()) write_text(a.config.output.csv, a.csv);
  if (!a.config.output.snapshot.empty()) write_text(a.config.output.snapshot, a.snapshot);
  if (!a.config.output.report.empty()) write_text(a.config.output.report, a.report);
}

// ---------------------------------------------------------------------------
// Refinement

struct RefineLevel {
  int n = 0;
  double dt = 0.0;
  double trace_res = 0.0;  // max over rows
  double derivative_err = 0.0;
};

struct RefineResult {
  std::vector<RefineLevel> levels;
  std::vector<double> trace_orders;
  std::vector<double> derivative_orders;
  bool ok() const {
    for (double p : trace_orders)
      if (!(p >= 1.8)) return false;
    for (double p : derivative_orders)
      if (!(p >= 1.8)) return false;
    return true;
  }
};

/// Max error of covariant dbar on exp(2 pi i (x + 2y)) against pi i (1 + 2i) f.
inline double dbar_mode_error(int n) {
  const TorusGrid g(n);
  const LinkField triv = LinkField::landau(g, 0);
  ScalarField f(g, FormDegree::zero, {0});
  for (int s = 0; s < g.sites(); ++s) {
    const double x = g.x_of(s) * g.spacing(), y = g.y_of(s) * g.spacing();
    f[s] = std::exp(kI * kTwoPi * (x + 2.0 * y));
  }
  const ScalarField db = covariant_dbar(f, triv);
  double err = 0.0;
  for (int s = 0; s < g.sites(); ++s) err = std::max(err, std::abs(db[s] - 0.5 * kI * kTwoPi * (1.0 + 2.0 * kI) * f[s]));
  return err;
}

/// Runs the config at n, 2n, ... with dt_safety fixed (so dt scales as n^-2)
/// and reports observed orders of the trace heat residual and of dbar.
inline RefineResult refine_experiment(const ExperimentConfig& cfg, int levels) {
  if (levels < 2) throw PreconditionError("refine: need at least 2 levels");
  RefineResult out;
  std::vector<std::vector<DiagnosticsRow>> runs;
  for (int l = 0; l < levels; ++l) {
    ExperimentConfig c = cfg;
    c.n = cfg.n << l;
    RefineLevel lv;
    lv.n = c.n;
    const RunArtifacts a = run_experiment(c);
    lv.dt = a.dt;
    lv.derivative_err = dbar_mode_error(c.n);
    out.levels.push_back(lv);
    runs.push_back(a.diagnostics.rows);
  }
  // residuals are compared at row times present on every level
  auto at = [](const std::vector<DiagnosticsRow>& rows, double t) -> const DiagnosticsRow* {
    for (const auto& r : rows)
      if (std::abs(r.t - t) < 1e-12) return &r;
    return nullptr;
  };
  int common = 0;
  for (const auto& r0 : runs.front()) {
    if (!std::isfinite(r0.trace_heat_res)) continue;
    std::vector<const DiagnosticsRow*> hits;
    for (const auto& rows : runs)
      if (const DiagnosticsRow* r = at(rows, r0.t); r && std::isfinite(r->trace_heat_res)) hits.push_back(r);
    if (hits.size() != runs.size()) continue;
    ++common;
    for (int l = 0; l < levels; ++l) out.levels[l].trace_res = std::max(out.levels[l].trace_res, hits[l]->trace_heat_res);
  }
  if (common == 0)
    throw PreconditionError("refine: no row time shared by all levels; make snapshot_interval a multiple of dt");
  for (int l = 1; l < levels; ++l) {
    const RefineLevel &a = out.levels[l - 1], &b = out.levels[l];
    out.trace_orders.push_back(std::log2(a.trace_res / b.trace_res));
    out.derivative_orders.push_back(std::log2(a.derivative_err / b.derivative_err));
  }
  return out;
}

}  // namespace ymh

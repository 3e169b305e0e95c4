// ymhlab: run / report / refine.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "ymh/harness.hpp"

using namespace ymh;

namespace {

int cmd_run(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  const RunArtifacts a = run_experiment(cfg);
  write_artifacts(a);
  std::cout << a.report;
  return a.ok() ? 0 : 1;
}

int cmd_report(const std::string& path, double dt, double tol, const std::string& mode) {
  const CsvTable table = parse_csv(read_text(path));
  if (table.rows.empty()) {
    std::cerr << "no rows\n";
    return 2;
  }
  const StopMode m = mode == "absolute" ? StopMode::absolute : StopMode::relative;
  const double step = dt > 0 ? dt : inferred_step(table);
  const CsvReport rep = check_csv(table, step, tol, m);
  if (dt <= 0) std::cout << "note: eps_int uses the smallest row spacing as dt; pass --dt for the integrator step\n";
  std::cout << rep.text;
  return rep.ok() ? 0 : 1;
}

int cmd_refine(const std::string& path, int levels) {
  const ExperimentConfig cfg = load_config(path);
  const RefineResult r = refine_experiment(cfg, levels);
  std::printf("%6s %14s %14s %14s\n", "n", "dt", "trace_res", "dbar_err");
  for (const auto& l : r.levels)
    std::printf("%6d %14.6g %14.6g %14.6g\n", l.n, l.dt, l.trace_res, l.derivative_err);
  for (std::size_t k = 0; k < r.trace_orders.size(); ++k)
    std::printf("order %d->%d: trace_res %.3f  dbar %.3f\n", r.levels[k].n, r.levels[k + 1].n, r.trace_orders[k],
                r.derivative_orders[k]);
  std::printf("%s\n", r.ok() ? "orders >= 1.8" : "order degradation");
  return r.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Yang-Mills-Higgs flow lab"};
  app.require_subcommand(1);

  std::string config_path, csv_path, mode = "relative";
  double dt = 0.0, tol = 1e-4;
  int levels = 3;

  auto* run = app.add_subcommand("run", "integrate a config and write CSV, snapshot and report");
  run->add_option("config", config_path)->required();

  auto* report = app.add_subcommand("report", "re-check a run's CSV");
  report->add_option("csv", csv_path)->required();
  report->add_option("--dt", dt, "integrator step (default: smallest row spacing)");
  report->add_option("--stop-tolerance", tol, "stop tolerance on I");
  report->add_option("--stop-mode", mode)->check(CLI::IsMember({"relative", "absolute"}));

  auto* refine = app.add_subcommand("refine", "grid refinement study");
  refine->add_option("config", config_path)->required();
  refine->add_option("--levels", levels)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path);
    if (*report) return cmd_report(csv_path, dt, tol, mode);
    if (*refine) return cmd_refine(config_path, levels);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include <iostream>

#include <CLI11.hpp>

#include "gridflow/runner.hpp"

int main(int argc, char** argv) {
  namespace h = gridflow::harness;
  CLI::App app{"gridflow: flow-level simulator for distributed data-processing grids"};
  app.require_subcommand(1);

  h::RunOptions run;
  std::uint64_t seed = 0;
  double duration = 0.0;
  double interval = 0.0;
  auto* run_cmd = app.add_subcommand("run", "run a scenario and write CSV outputs");
  run_cmd->add_option("scenario", run.scenario, "scenario file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run_cmd->add_option("--seed", seed, "random seed");
  auto* duration_opt = run_cmd->add_option("--duration", duration, "simulated seconds");
  auto* interval_opt = run_cmd->add_option("--metrics-interval", interval, "metrics window in seconds");
  run_cmd->add_option("--out", run.out_dir, "output directory");
  run_cmd->add_option("--set", run.sets, "override key=value (dotted path)");
  run_cmd->add_option("--sweep", run.sweeps, "sweep key=v1,v2,... (one output subdirectory per value)");

  std::string validate_file;
  std::vector<std::string> validate_sets;
  auto* validate_cmd = app.add_subcommand("validate", "check a scenario and print it with defaults filled in");
  validate_cmd->add_option("scenario", validate_file, "scenario file")->required();
  validate_cmd->add_option("--set", validate_sets, "override key=value (dotted path)");

  std::string trace_file;
  double dt = 1e-3;
  auto* oracle_cmd = app.add_subcommand("oracle", "fixed-timestep reference completion times for a trace");
  oracle_cmd->add_option("trace", trace_file, "JSON trace file")->required();
  oracle_cmd->add_option("--dt", dt, "time step in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : h::kExitConfig;
  }

  if (*run_cmd) {
    if (*seed_opt) run.seed = seed;
    if (*duration_opt) run.duration = duration;
    if (*interval_opt) run.metrics_interval = interval;
    return h::run_command(run, std::cerr);
  }
  if (*validate_cmd) return h::validate_command(validate_file, validate_sets, std::cout, std::cerr);
  return h::oracle_command(trace_file, dt, std::cout, std::cerr);
}

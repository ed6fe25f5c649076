// Command-line front end: `run` and `sweep` over a JSON config.

#include <iostream>

#include <CLI11.hpp>

#include "blowuplab/harness.hpp"

int main(int argc, char** argv) {
  namespace h = blowuplab::harness;
  CLI::App app{"blowuplab: fixed-point blowup experiments"};
  app.require_subcommand(1);

  std::optional<double> tol;
  int jobs = 1;
  app.add_option("--tol", tol, "override rel_tol for every scenario")->check(CLI::PositiveNumber);

  h::RunOptions ro;
  auto* run = app.add_subcommand("run", "run every scenario in a config");
  run->add_option("config", ro.config, "config file")->required();
  run->add_option("--out", ro.out_dir, "output directory")->required();
  run->add_option("--jobs", jobs, "parallel scenarios")->check(CLI::PositiveNumber);
  run->add_option("--tol", tol, "override rel_tol for every scenario")->check(CLI::PositiveNumber);

  h::SweepOptions so;
  auto* sweep = app.add_subcommand("sweep", "sweep one numeric parameter");
  sweep->add_option("config", so.config, "config file")->required();
  sweep->add_option("--param", so.param, "dotted scenario field, e.g. a0 or pressure_rr.inner.value")
      ->required();
  sweep->add_option("--values", so.values, "comma-separated values")->required();
  sweep->add_option("--out", so.out_dir, "output directory")->required();
  sweep->add_option("--jobs", jobs, "parallel points")->check(CLI::PositiveNumber);
  sweep->add_option("--tol", tol, "override rel_tol for every scenario")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : h::kExitConfig;
  }

  try {
    if (*run) {
      ro.jobs = jobs;
      ro.tol = tol;
      return h::run(ro, std::cout);
    }
    so.jobs = jobs;
    so.tol = tol;
    return h::sweep(so, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return h::kExitConfig;
  }
}

// Stability analysis of interpolation minima under GD/SGD: Lyapunov
// exponents of the linearized update cocycle, Oseledets spectra, moment
// exponents, regularity reports, projective drift certificates, and seeded
// escape experiments.

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sgdstab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sgdstab: dynamical-stability indicators for minima of overparameterized regression"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int threads = 0;
  bool verbose = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--threads", threads, "worker cap (does not change results)");
    sub->add_flag("--verbose", verbose, "progress output");
  };

  CLI::App* analyze = app.add_subcommand("analyze", "mu/lambda/spectrum/moment/regularity report");
  CLI::App* sweep = app.add_subcommand("sweep", "stability portrait over a learning-rate grid");
  CLI::App* certify = app.add_subcommand("certify", "projective drift certificate (N in {2,3})");
  CLI::App* simulate = app.add_subcommand("simulate", "SGD escape experiment around a minimum");
  for (CLI::App* sub : {analyze, sweep, certify, simulate}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  sgdstab::ExperimentConfig cfg;
  try {
    cfg = sgdstab::load_config_file(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (threads > 0) cfg.threads = threads;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return sgdstab::kExitConfig;
  }

  try {
    if (analyze->parsed()) return sgdstab::cmd_analyze(cfg, verbose);
    if (sweep->parsed()) return sgdstab::cmd_sweep(cfg, verbose);
    if (certify->parsed()) return sgdstab::cmd_certify(cfg, verbose);
    if (simulate->parsed()) return sgdstab::cmd_simulate(cfg, verbose);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return sgdstab::kExitConfig;
  } catch (const sgdstab::NonConvergence& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return sgdstab::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return sgdstab::kExitNumerical;
  }
  return sgdstab::kExitConfig;
}

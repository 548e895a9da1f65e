#pragma once

#include <string>

#include "sgdstab/jsonio.hpp"

namespace sgdstab {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitUnsupported = 4;

// full stability analysis at a single learning rate -> analysis.json/.csv
int cmd_analyze(const ExperimentConfig& cfg, bool verbose);
// lambda/mu portrait over a learning-rate grid -> sweep.csv/.json
int cmd_sweep(const ExperimentConfig& cfg, bool verbose);
// projective drift certification (N in {2,3}) -> certificate.json, r_curve.csv
int cmd_certify(const ExperimentConfig& cfg, bool verbose);
// escape experiment at a single learning rate -> escape.json/.csv
int cmd_simulate(const ExperimentConfig& cfg, bool verbose);

ExperimentConfig load_config_file(const std::string& path);

}  // namespace sgdstab

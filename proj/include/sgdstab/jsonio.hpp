#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sgdstab/lyapunov.hpp"
#include "sgdstab/projective.hpp"
#include "sgdstab/regularity.hpp"
#include "sgdstab/simulate.hpp"
#include "sgdstab/task.hpp"

namespace sgdstab {

using Json = nlohmann::json;

// Single-document experiment configuration; all randomness is seeded from
// here so a config file determines every output byte.
struct ExperimentConfig {
  // task
  ModelKind kind = ModelKind::Linear;
  int D = 6;
  int N = 2;
  std::uint64_t task_seed = 7;
  // dynamics
  double eta = 0.9;
  std::vector<double> eta_grid;
  // estimator budgets
  int n_steps = 64;
  long trials = 4096;
  std::uint64_t estimator_seed = 1;
  long long enum_budget = kEnumBudget;
  std::vector<double> moment_p_grid = {-1.0, 1.0, 2.0};
  // analyze selection flags
  bool with_exact = true;
  bool with_spectrum = true;
  bool with_moments = true;
  bool with_regularity = true;
  // escape experiment
  double init_radius = 1e-6;
  double ball_radius = 1e-2;
  long horizon = 100000;
  long escape_trials = 1000;
  double converge_loss = 1e-22;
  bool dump_trajectories = false;
  bool sweep_escape = false;
  // projective certification
  int grid_resolution = 2048;
  std::vector<double> cert_p_grid;  // filled with a default scan when empty
  double q_eps = 0.05;
  // runtime
  std::string out_dir = "out";
  int threads = 1;
};

ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);  // throws std::invalid_argument

// FNV-1a over the canonical serialized config, as a hex string; embedded in
// every output file for provenance.
std::string config_hash(const ExperimentConfig& cfg);

Json task_to_json(const RegressionTask& task);
Json minimum_to_json(const MinimumPoint& m);
Json estimate_to_json(const std::string& quantity, const LyapunovEstimate& est,
                      std::uint64_t seed);
Json moment_to_json(const MomentEstimate& est, std::uint64_t seed);
Json spectrum_to_json(const SpectrumEstimate& est);
Json regularity_to_json(const RegularityReport& rep);
Json witness_to_json(const std::optional<ContractionWitness>& w);
Json probe_to_json(const IrreducibilityProbe& p);
Json escape_to_json(const EscapeReport& rep);
Json certificate_to_json(const DriftScan& scan);

// RFC-4180 CSV: header row, '.' decimal, fields quoted only when needed.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(const std::vector<std::string>& fields);
  void write(const std::string& path) const;
  static std::string num(double v);  // shortest round-trip decimal, "" for NaN
  static std::string num(long long v);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace sgdstab

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sgdstab/rng.hpp"
#include "sgdstab/task.hpp"
#include "sgdstab/types.hpp"

namespace sgdstab {

enum class Termination { Converged, Escaped, Horizon };
std::string to_string(Termination t);

struct SimOptions {
  int stride = 16;                       // keep every stride-th point
  double converge_loss = kManifoldTol;   // early stop below this loss (<=0 disables)
  double escape_radius = 0.0;            // stop when ||x - reference|| exceeds (<=0 disables)
  Vector reference;                      // escape monitoring center
  double overflow_norm = 1e100;          // beyond this the run counts as escaped
};

struct Trajectory {
  std::vector<Vector> points;  // strided; always includes the initial and final state
  std::vector<double> losses;  // loss at each stored point
  long steps_taken = 0;
  Termination termination = Termination::Horizon;
  double final_loss = 0.0;
};

Trajectory run_gd(const RegressionTask& task, const Vector& x0, double eta, long horizon,
                  const SimOptions& opts = {});

Trajectory run_sgd(const RegressionTask& task, const Vector& x0, double eta, long horizon,
                   const SeedStream& stream, const SimOptions& opts = {});

struct EscapeConfig {
  double eta = 0.1;
  double init_radius = 1e-6;
  double ball_radius = 1e-2;
  long horizon = 100000;
  long trials = 1000;
  std::uint64_t seed = 1;
  double converge_loss = 1e-22;  // strict so convergence is unambiguous
  // the growth rate is measured on a separate fixed-length window per trial
  // (same init and stream, no stopping), so first-passage conditioning does
  // not bias the slope; burn-in absorbs the direction-alignment transient
  long growth_horizon = 96;
  long growth_burn_in = 24;
  int threads = 1;
};

struct EscapeReport {
  long trials = 0;
  double eta = 0.0;
  double init_radius = 0.0;
  double ball_radius = 0.0;
  long horizon = 0;
  long stay_and_converge_count = 0;
  long escape_count = 0;
  long undecided_count = 0;
  double stay_fraction = 0.0;  // over decided trials
  // mean per-trial least-squares slope of log dist(x_n, M), with its
  // standard error over trials
  double empirical_growth_rate = 0.0;
  double growth_rate_std_error = 0.0;
  bool exact_distance = false;  // affine distance (linear task) vs loss surrogate
};

// Samples initial points uniformly in a ball around the minimum, runs SGD,
// and classifies each trial as stay-and-converge / escaped / undecided.
// Initialization is a ball, not a full-support measure; conclusions are
// local to the minimum.
EscapeReport escape_experiment(const RegressionTask& task, const MinimumPoint& minimum,
                               const EscapeConfig& cfg);

struct SweepRow {
  double eta = 0.0;
  double mu_value = 0.0;
  double lambda = 0.0;
  double lambda_se = 0.0;
  double escape_fraction = std::numeric_limits<double>::quiet_NaN();
  double growth_rate = std::numeric_limits<double>::quiet_NaN();
  bool refined = false;  // produced by bisection, not the input grid
};

struct SweepConfig {
  int lambda_n = 64;
  long lambda_trials = 2048;
  std::uint64_t seed = 1;
  bool run_escape = false;
  EscapeConfig escape_template;  // eta overwritten per grid point
  int bisect_iters = 24;
  double bisect_rel_tol = 1e-3;  // on the eta interval, relative to its width
  int threads = 1;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // grid rows first, then bisection refinements
  // final sign-change brackets (eta_low, eta_high) with lambda(eta_low) < 0 < lambda(eta_high)
  // or the reverse
  std::vector<std::pair<double, double>> crossings;
};

SweepResult eta_sweep(const RegressionTask& task, const MinimumPoint& minimum,
                      const std::vector<double>& eta_grid, const SweepConfig& cfg);

// distance to the zero-loss set: exact affine distance for the linear model,
// sqrt(2 loss)/sigma_min(S) surrogate otherwise
double distance_to_manifold(const RegressionTask& task, const MinimumPoint& minimum,
                            const Vector& x);

}  // namespace sgdstab

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace sgdstab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char* kToolVersion = "0.1.0";

// Numerical conventions shared across modules. All norms are the operator
// 2-norm; a point counts as lying on the zero-loss manifold when the
// empirical loss is below kManifoldTol.
inline constexpr double kManifoldTol = 1e-10;
inline constexpr double kRankTolRel = 1e-8;
inline constexpr int kRenormInterval = 16;

struct NonConvergence : std::runtime_error {
  double best_loss;
  long iterations;
  NonConvergence(double loss, long iters)
      : std::runtime_error("minimizer did not reach the requested loss (best " +
                           std::to_string(loss) + " after " + std::to_string(iters) +
                           " iterations)"),
        best_loss(loss),
        iterations(iters) {}
};

struct FrameCollapse : std::runtime_error {
  long step;
  explicit FrameCollapse(long at_step)
      : std::runtime_error("frame became numerically rank-deficient at step " +
                           std::to_string(at_step)),
        step(at_step) {}
};

struct BudgetExceeded : std::runtime_error {
  long long required;
  long long budget;
  BudgetExceeded(long long req, long long bud)
      : std::runtime_error("enumeration of " + std::to_string(req) +
                           " sequences exceeds budget " + std::to_string(bud)),
        required(req),
        budget(bud) {}
};

struct SingularFactor : std::runtime_error {
  explicit SingularFactor(const std::string& what) : std::runtime_error(what) {}
};

struct NoConvergence : std::runtime_error {
  double oscillation;
  double last_estimate;
  NoConvergence(double osc, double last)
      : std::runtime_error("power iteration did not settle (oscillation " +
                           std::to_string(osc) + ")"),
        oscillation(osc),
        last_estimate(last) {}
};

}  // namespace sgdstab

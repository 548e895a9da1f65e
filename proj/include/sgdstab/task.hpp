#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgdstab/types.hpp"

namespace sgdstab {

enum class ModelKind { Linear, RandomFeature, ShallowTanh };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// A scalar regression problem: a differentiable model F(x, y) with D
// parameters and N < D training pairs (y_i, z_i), under the square loss
// l(F, z) = (F - z)^2 / 2. Targets come from a random teacher of the same
// architecture, so the zero-loss set is nonempty by construction.
class RegressionTask {
 public:
  ModelKind kind = ModelKind::Linear;
  int param_dim = 0;   // D
  int sample_count = 0;  // N
  int input_dim = 0;   // d
  std::uint64_t seed = 0;
  std::vector<Vector> inputs;  // y_i in R^d
  Vector targets;              // z_i

  // shallow-tanh / random-feature internals
  int hidden_width = 0;
  Matrix feature_weights;  // width x d (fixed for random-feature)
  Vector feature_bias;     // width

  double value(const Vector& x, const Vector& y) const;     // F(x, y)
  Vector gradient(const Vector& x, const Vector& y) const;  // grad_x F(x, y)

  double residual(const Vector& x, int i) const;  // F(x, y_i) - z_i
  Vector residuals(const Vector& x) const;
  double loss(const Vector& x) const;  // (1/2N) sum r_i^2
  Vector loss_gradient(const Vector& x) const;
  Vector individual_loss_gradient(const Vector& x, int i) const;
  Matrix gradient_matrix(const Vector& x) const;  // S(x): D x N, column i = grad_x F(x, y_i)
};

RegressionTask build_task(ModelKind kind, int D, int N, std::uint64_t seed);

// A point on (or numerically on) the zero-loss manifold together with the
// per-example gradient matrix S and NTK Gram matrix G = S^T S.
struct MinimumPoint {
  Vector x_star;
  Vector residuals;
  Matrix S;  // D x N
  Matrix G;  // N x N
  double loss_value = 0.0;
  long iterations = 0;
};

struct FindMinOptions {
  long gd_steps = 200;       // warmup gradient steps with backtracking
  long gn_steps = 200;       // Gauss-Newton refinement steps
  double gd_step_init = 0.1;
};

// Gradient descent warmup plus Gauss-Newton refinement on the residual
// vector. Returns init unchanged when it is already below tol. Throws
// NonConvergence (carrying the best loss reached) if the budget runs out.
MinimumPoint find_minimum(const RegressionTask& task, const Vector& init, double tol,
                          const FindMinOptions& opts = {});

// Populate residuals/S/G at a given point without optimizing.
MinimumPoint minimum_at(const RegressionTask& task, const Vector& x);

struct ManifoldCheck {
  bool pass = false;
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
};

// Column-independence certificate for S: pass iff the smallest singular
// value exceeds kRankTolRel times the largest.
ManifoldCheck check_hypothesis_manifold(const Matrix& S);

}  // namespace sgdstab

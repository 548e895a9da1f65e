#pragma once

#include <optional>
#include <vector>

#include "sgdstab/rng.hpp"
#include "sgdstab/types.hpp"

namespace sgdstab {

// The linearized per-step dynamics at a minimum: the N single-example
// factors 1 - eta*G_[i] (G_[i] keeps only row i of G), the deterministic
// full-batch factor 1 - (eta/N)*G, and the uniform norm bounds
//   K1^n ||w|| <= ||product_n w|| <= K2^n ||w||.
// K1 is recorded as 0 when some factor is singular.
struct FactorSet {
  double eta = 0.0;
  std::optional<Matrix> gram;       // set when built from a Gram matrix
  std::vector<Matrix> sgd_factors;  // sampled uniformly
  Matrix gd_factor;                 // average of sgd_factors
  double k1 = 0.0;
  double k2 = 0.0;

  int dim() const { return static_cast<int>(gd_factor.rows()); }
  int count() const { return static_cast<int>(sgd_factors.size()); }
  const Matrix& factor(int i) const { return sgd_factors[i]; }
};

FactorSet make_factors(const Matrix& G, double eta);

// Arbitrary equiprobable factor list (used e.g. for scalar counterexamples);
// the deterministic factor is the average of the list.
FactorSet custom_factors(std::vector<Matrix> factors, double eta);

// 1 - (eta/B)*G_[batch], zeroing the rows of G outside the batch
// (0-based indices). batch of size 1 reproduces an SGD factor; the full
// batch reproduces the GD factor.
Matrix minibatch_factor(const Matrix& G, double eta, const std::vector<int>& batch);

struct ProductSample {
  double log_norm = 0.0;  // k = 1: log||product * w||; k > 1: leading R-diagonal sum
  Matrix frame;           // orthonormal N x k image frame
  Vector r_log_sums;      // per-column accumulated log R diagonals (length k)
};

// What to do when a renormalization meets a rank-deficient frame (possible
// only when some factor is singular): throw FrameCollapse, or pin the dead
// slot's exponent sum to -infinity and keep going with the orthonormal
// completion.
enum class CollapsePolicy { Throw, StickyMinusInf };

// Applies n factors drawn from the stream to an orthonormal frame,
// re-orthonormalizing every renorm_interval steps (and always at the end),
// so the raw product is never materialized. A k = 1 frame is tracked by
// plain norm; exact annihilation is reported as log_norm = -infinity rather
// than thrown. Trailing R-diagonal slots lose precision once
// (K2/K1)^renorm_interval approaches 1/eps; lower the interval for widely
// spread factor sets.
ProductSample sample_product(const FactorSet& factors, const SeedStream& stream, long n,
                             const Matrix& frame0, int renorm_interval = kRenormInterval,
                             CollapsePolicy on_collapse = CollapsePolicy::Throw);

// log of the operator 2-norm of the n-step product, via a rescaled running
// product (overflow-safe for any factor magnitudes at desk scale).
double product_log_norm(const FactorSet& factors, const SeedStream& stream, long n,
                        int renorm_interval = kRenormInterval);

// log||product * w|| for a single tracked vector; -infinity if the vector is
// annihilated exactly.
double vector_log_norm(const FactorSet& factors, const SeedStream& stream, long n,
                       const Vector& w, int renorm_interval = kRenormInterval);

}  // namespace sgdstab

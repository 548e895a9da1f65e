#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sgdstab/cocycle.hpp"
#include "sgdstab/types.hpp"

namespace sgdstab {

// Regularity of a minimum: (i) diagonal Gram entries avoid 1/eta and 2/eta,
// (ii) the nonzero-pattern graph of G is connected. Zeros are taken relative
// to the largest Gram entry.
struct RegularityReport {
  bool diag_ok = false;
  bool connectivity_ok = false;
  std::vector<double> margin_inv_eta;  // |G_ii - 1/eta|
  std::vector<double> margin_two_eta;  // |G_ii - 2/eta|
  std::vector<std::vector<int>> components;  // sorted 0-based index blocks
  double edge_margin = 0.0;  // smallest |G_ij| used as an edge (0 if none)
  double zero_tol = 0.0;
  bool regular() const { return diag_ok && connectivity_ok; }
};

RegularityReport check_regular(const Matrix& G, double eta);

struct ContractionWitness {
  int factor_index = 0;       // i with |1 - eta*G_ii| > 1
  Matrix limit;               // normalized power limit, numerically rank one
  double rank_gap = 0.0;      // sigma_2 / sigma_1 of the limit
  int iterations = 0;
};

// Searches for an expanding single-example factor and iterates its
// normalized powers to a rank-1 limit. nullopt means no expanding diagonal
// entry was found (inconclusive, not a refutation).
std::optional<ContractionWitness> contraction_witness(const FactorSet& factors);

struct IrreducibilityProbe {
  // distinct images observed per subspace dimension k = 1..N-1, minimized
  // over starting subspaces (coordinate/eigenvector subspaces and random
  // ones); heuristic evidence only
  std::vector<int> min_distinct_per_dim;
  int saturation_threshold = 0;
  bool saturated_all_dims = false;
};

IrreducibilityProbe irreducibility_probe(const FactorSet& factors, int trials,
                                         std::uint64_t seed);

}  // namespace sgdstab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgdstab/cocycle.hpp"
#include "sgdstab/types.hpp"

namespace sgdstab {

// log spectral radius of 1 - (eta/N)*G for a symmetric positive definite
// Gram matrix; equals log||1 - (eta/N)G|| since the matrix is symmetric.
double mu(const Matrix& G, double eta);

struct StabilityEquivalence {
  double mu_value = 0.0;
  double hessian_norm = 0.0;  // ||G/N||
  bool mu_negative = false;
  bool hessian_norm_lt_2_over_eta = false;
};
StabilityEquivalence mu_stability_equivalence(const Matrix& G, double eta);

enum class LyapMethod { McNorm, McVector, ExactEnum };
std::string to_string(LyapMethod m);

struct LyapunovEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n_steps = 0;
  long trials = 0;
  LyapMethod method = LyapMethod::McNorm;
  bool minus_infinity = false;  // some sampled product annihilated the vector
};

inline constexpr long long kEnumBudget = 10'000'000;

// (1/n) E[log||product_n||] by full enumeration of the N^n index sequences.
// Non-increasing in n; upper-bounds the Lyapunov exponent.
double lambda_exact(const FactorSet& factors, int n, long long budget = kEnumBudget);

// Monte Carlo estimate. McNorm averages (1/n)log||product_n|| (operator
// norm); McVector averages (1/n)log||product_n w|| for a fixed random unit w
// per trial. std_error is the sample standard error over trials.
LyapunovEstimate lambda_mc(const FactorSet& factors, int n, long trials, std::uint64_t seed,
                           LyapMethod method = LyapMethod::McNorm, int threads = 1);

struct SpectrumEstimate {
  std::vector<double> exponents;   // sorted descending, may contain -inf
  std::vector<double> std_errors;  // aligned with exponents
  int n_steps = 0;
  long trials = 0;
};

// Full exponent tuple from accumulated R diagonals of a re-orthonormalized
// random frame, averaged over trials.
SpectrumEstimate oseledets_spectrum(const FactorSet& factors, int n, long trials,
                                    std::uint64_t seed, int threads = 1);

enum class MomentMode { ExactEnum, Mc };

struct MomentEstimate {
  double p = 0.0;
  double value = 0.0;      // Lambda_p
  double std_error = 0.0;  // 0 for exact enumeration
  int n_steps = 0;
  long trials = 0;
  MomentMode mode = MomentMode::ExactEnum;
};

// p-th moment growth rate (1/n) log E[||product_n w||^p], maximized over a
// probe set of directions (coordinate axes, the top right-singular direction
// of the GD factor, and 8 seeded random units). Log-domain throughout.
MomentEstimate moment_lyapunov(const FactorSet& factors, double p, int n, MomentMode mode,
                               long trials, std::uint64_t seed, long long budget = kEnumBudget);

struct SecondMomentVerdict {
  enum class Kind { Stable, Unstable, Marginal };
  Kind kind = Kind::Marginal;
  MomentEstimate lambda2;
  LyapunovEstimate lambda;
  // almost-surely stable (lambda < 0) yet second-moment unstable (Lambda_2 > 0)
  bool as_stable_but_moment_unstable = false;
};
std::string to_string(SecondMomentVerdict::Kind k);

SecondMomentVerdict second_moment_verdict(const FactorSet& factors, int n,
                                          long trials = 4096, std::uint64_t seed = 1,
                                          long long budget = kEnumBudget);

}  // namespace sgdstab

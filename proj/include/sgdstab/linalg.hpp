#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sgdstab/types.hpp"

namespace sgdstab {

// operator 2-norm (largest singular value)
double spectral_norm(const Matrix& m);
double min_singular_value(const Matrix& m);
// max |eigenvalue| of a symmetric matrix
double sym_spectral_radius(const Matrix& m);
double max_sym_eigenvalue(const Matrix& m);
double min_sym_eigenvalue(const Matrix& m);

bool is_symmetric(const Matrix& m, double rel_tol = 1e-12);

// QR with R forced to a nonnegative diagonal; returns Q (n x k) and the
// diagonal of R in r_diag.
void qr_positive(const Matrix& a, Matrix& q, Vector& r_diag);

// deterministic pairwise sum (thread-count independent reduction order)
double pairwise_sum(std::span<const double> xs);

struct MeanStdErr {
  double mean;
  double std_error;
};
MeanStdErr mean_and_stderr(std::span<const double> xs);

// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must be
// written to preallocated per-index slots; ordering of side effects is then
// irrelevant to the final reduction.
void parallel_for(long count, int threads, const std::function<void(long)>& fn);

}  // namespace sgdstab

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgdstab/cocycle.hpp"
#include "sgdstab/types.hpp"

namespace sgdstab {

// Discretization of the unit sphere for ambient dimension 2 or 3. For
// dimension 2 the nodes are equiangular on the circle; for dimension 3 they
// come from a subdivided icosahedron (node count rounds up to the next
// subdivision level) with the triangulation kept for interpolation.
struct SphereGrid {
  int ambient_dim = 2;
  std::vector<Vector> nodes;
  std::vector<double> weights;  // uniform
  std::vector<std::array<int, 3>> triangles;  // ambient_dim == 3 only
  std::vector<std::vector<int>> node_triangles;  // incident triangles per node
  int resolution() const { return static_cast<int>(nodes.size()); }
};

SphereGrid make_sphere_grid(int ambient_dim, int resolution);

// Positivity-preserving interpolation of node samples at an off-grid
// direction (piecewise linear in angle for dim 2, barycentric on the
// triangulation for dim 3).
double interpolate(const SphereGrid& grid, const std::vector<double>& f, const Vector& direction);

// One application of the q-twisted transfer operator:
//   (P_q f)(s) = (1/N) sum_i ||M_i s||^q f(M_i s / ||M_i s||).
// Throws SingularFactor if some ||M_i s|| < 1e-14.
std::vector<double> apply_pq(const SphereGrid& grid, const FactorSet& factors, double q,
                             const std::vector<double>& f);

// Precomputed mapped-direction stencils for repeated applications.
class PqOperator {
 public:
  PqOperator(const SphereGrid& grid, const FactorSet& factors);
  std::vector<double> apply(double q, const std::vector<double>& f) const;
  const SphereGrid& grid() const { return *grid_; }

 private:
  const SphereGrid* grid_;
  int num_factors_;
  // per (node, factor): image norm and interpolation stencil
  std::vector<double> log_norms_;
  std::vector<std::array<int, 3>> stencil_idx_;
  std::vector<std::array<double, 3>> stencil_w_;
  int stencil_size_;
};

struct LeadingEigen {
  double r = 0.0;                    // dominant eigenvalue r(q)
  std::vector<double> eigenfunction; // positive, normalized to max = 1
  int sweeps = 0;
  double residual = 0.0;  // Collatz-Wielandt gap at termination
};

// Power iteration for the dominant eigenpair of P_q. Throws NoConvergence
// (with the oscillation measure) if the Collatz-Wielandt interval fails to
// shrink below tol within the sweep cap.
LeadingEigen leading_eigen(const SphereGrid& grid, const FactorSet& factors, double q,
                           double tol = 1e-10, int max_sweeps = 20000);

struct DriftCertificate {
  double p = 0.0;
  double gamma = 0.0;  // r(-p), certified < 1
  std::vector<double> f_star;
  double max_relative_drift_error = 0.0;
  double c_minus = 0.0;  // min of f_star
  double c_plus = 0.0;   // max of f_star
  int resolution = 0;
};

struct DriftScan {
  std::optional<DriftCertificate> certificate;
  std::vector<std::pair<double, double>> r_curve;  // (q = -p, r(q)) for scanned p
  std::string reason;  // set when no certificate was produced
};

struct DriftOptions {
  double lambda_estimate = 0.0;   // must be positive (caller-supplied)
  double certification_margin = 0.99;  // require r(-p) below this
  double drift_tol = 1e-2;
  double power_tol = 1e-10;
  int sample_checks = 64;         // off-grid w samples for the drift identity
  std::uint64_t seed = 1;
};

// Scans p_grid in ascending order and returns the first p whose r(-p) is
// certified below the margin and whose empirical drift identity
//   E[F*(M w)] = gamma F*(w),  F*(w) = ||w||^{-p} f*(w/||w||)
// holds within drift_tol. Produces reason + the r(-p) curve otherwise.
DriftScan build_drift_certificate(const SphereGrid& grid, const FactorSet& factors,
                                  const std::vector<double>& p_grid, const DriftOptions& opts);

// F*(w) from a certificate (exactly homogeneous of degree -p by construction)
double drift_function(const SphereGrid& grid, const DriftCertificate& cert, const Vector& w);

}  // namespace sgdstab

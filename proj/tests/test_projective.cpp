#include <cmath>

#include "doctest.h"
#include "sgdstab/lyapunov.hpp"
#include "sgdstab/projective.hpp"
#include "sgdstab/rng.hpp"

using namespace sgdstab;

namespace {

Matrix gram2(double a, double b, double c) {
  Matrix g(2, 2);
  g << a, b, b, c;
  return g;
}

// regular N=2 instance with a clearly positive exponent (near-diagonal with
// one expanding direction)
FactorSet unstable_regular_2d() { return make_factors(gram2(1.0, 0.1, 3.0), 0.9); }

}  // namespace

TEST_CASE("sphere grids") {
  SUBCASE("circle nodes are equiangular unit vectors") {
    SphereGrid g = make_sphere_grid(2, 64);
    CHECK(g.resolution() == 64);
    for (const Vector& v : g.nodes) CHECK(std::abs(v.norm() - 1.0) < 1e-14);
    double a0 = std::atan2(g.nodes[1](1), g.nodes[1](0));
    CHECK(a0 == doctest::Approx(2.0 * M_PI / 64).epsilon(1e-12));
  }
  SUBCASE("icosphere rounds the node count up to a subdivision level") {
    SphereGrid g = make_sphere_grid(3, 100);
    CHECK(g.resolution() >= 100);
    CHECK(g.resolution() == 162);
    for (const Vector& v : g.nodes) CHECK(std::abs(v.norm() - 1.0) < 1e-14);
    CHECK_FALSE(g.triangles.empty());
  }
  SUBCASE("dimensions outside {2,3} rejected") {
    CHECK_THROWS_AS(make_sphere_grid(4, 32), std::invalid_argument);
  }
}

TEST_CASE("interpolation reproduces node samples and constants") {
  for (int dim : {2, 3}) {
    SphereGrid g = make_sphere_grid(dim, dim == 2 ? 128 : 162);
    std::vector<double> f(g.resolution());
    Rng rng(7);
    for (double& v : f) v = 1.0 + rng.next_double();
    for (int s = 0; s < g.resolution(); s += 7)
      CHECK(interpolate(g, f, g.nodes[s]) == doctest::Approx(f[s]).epsilon(1e-9));
    std::vector<double> ones(g.resolution(), 1.0);
    for (int t = 0; t < 40; ++t)
      CHECK(interpolate(g, ones, rng.unit_vector(dim)) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("P_0 is Markov: constants are fixed") {
  FactorSet fs = unstable_regular_2d();
  SphereGrid g = make_sphere_grid(2, 256);
  std::vector<double> ones(g.resolution(), 1.0);
  std::vector<double> out = apply_pq(g, fs, 0.0, ones);
  for (double v : out) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

  // N = 3 variant with a 3x3 Gram
  Matrix g3(3, 3);
  g3 << 2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 3.0;
  FactorSet fs3 = make_factors(g3, 0.9);
  SphereGrid grid3 = make_sphere_grid(3, 162);
  std::vector<double> ones3(grid3.resolution(), 1.0);
  std::vector<double> out3 = apply_pq(grid3, fs3, 0.0, ones3);
  for (double v : out3) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("P_q preserves positivity") {
  FactorSet fs = unstable_regular_2d();
  SphereGrid g = make_sphere_grid(2, 128);
  Rng rng(3);
  std::vector<double> f(g.resolution());
  for (double& v : f) v = 0.01 + rng.next_double();
  for (double q : {-0.5, 0.3, 1.0}) {
    std::vector<double> out = apply_pq(g, fs, q, f);
    for (double v : out) CHECK(v > 0.0);
  }
}

TEST_CASE("a factor that annihilates a grid direction is rejected") {
  Matrix dead = Matrix::Zero(2, 2);
  dead(1, 1) = 1.0;  // kills the (1,0) node
  FactorSet fs = custom_factors({dead, Matrix::Identity(2, 2)}, 1.0);
  SphereGrid g = make_sphere_grid(2, 64);
  std::vector<double> ones(g.resolution(), 1.0);
  CHECK_THROWS_AS(apply_pq(g, fs, 0.0, ones), SingularFactor);
}

TEST_CASE("leading eigenpair of P_q") {
  FactorSet fs = unstable_regular_2d();
  SphereGrid g = make_sphere_grid(2, 512);

  SUBCASE("r(0) = 1 with the constant eigenfunction") {
    LeadingEigen le = leading_eigen(g, fs, 0.0);
    CHECK(le.r == doctest::Approx(1.0).epsilon(1e-10));
    for (double v : le.eigenfunction) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("log r is convex in q inside the perturbative window") {
    std::vector<double> qs = {-0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4};
    std::vector<double> lr;
    for (double q : qs) lr.push_back(std::log(leading_eigen(g, fs, q).r));
    for (std::size_t i = 1; i + 1 < lr.size(); ++i)
      CHECK(lr[i] <= 0.5 * (lr[i - 1] + lr[i + 1]) + 1e-6);
  }
  SUBCASE("outside the window the iteration reports non-convergence") {
    // for strongly negative q the iterate collapses onto the projective
    // attractor and no positive eigenfunction exists to converge to
    CHECK_THROWS_AS(leading_eigen(g, fs, -0.5, 1e-10, 2000), NoConvergence);
  }
  SUBCASE("derivative of log r at zero matches the Lyapunov exponent") {
    LyapunovEstimate lam = lambda_mc(fs, 256, 2048, 5, LyapMethod::McVector);
    const double eps = 0.05;
    double rp = leading_eigen(g, fs, eps).r;
    double rm = leading_eigen(g, fs, -eps).r;
    double slope = (std::log(rp) - std::log(rm)) / (2.0 * eps);
    CHECK(std::abs(slope - lam.value) <= std::max(0.02, 5.0 * lam.std_error));
  }
  SUBCASE("grid refinement moves r(q) by little") {
    SphereGrid g2 = make_sphere_grid(2, 1024);
    for (double q : {-0.2, 0.2}) {
      double r1 = leading_eigen(g, fs, q).r;
      double r2 = leading_eigen(g2, fs, q).r;
      CHECK(std::abs(r1 - r2) < 1e-3);
    }
  }
}

TEST_CASE("three-dimensional sphere operator end to end") {
  // all diagonal entries mildly expanding: the eigenfunction stays smooth
  // enough for the off-grid drift identity at this resolution
  Matrix g(3, 3);
  g << 2.4, 0.2, 0.1, 0.2, 2.5, 0.15, 0.1, 0.15, 2.6;
  FactorSet fs = make_factors(g, 0.9);
  SphereGrid grid = make_sphere_grid(3, 2562);

  LeadingEigen r0 = leading_eigen(grid, fs, 0.0);
  CHECK(r0.r == doctest::Approx(1.0).epsilon(1e-10));

  LyapunovEstimate lam = lambda_mc(fs, 256, 1024, 7, LyapMethod::McVector);
  REQUIRE(lam.value > 0.0);
  const double eps = 0.05;
  double slope = (std::log(leading_eigen(grid, fs, eps).r) -
                  std::log(leading_eigen(grid, fs, -eps).r)) /
                 (2.0 * eps);
  // coarser grid than the circle case; slope agreement within a wider band
  CHECK(std::abs(slope - lam.value) <= std::max(0.05, 5.0 * lam.std_error));

  DriftOptions opts;
  opts.lambda_estimate = lam.value;
  DriftScan scan = build_drift_certificate(grid, fs, {0.05, 0.1, 0.2, 0.3}, opts);
  REQUIRE(scan.certificate.has_value());
  CHECK(scan.certificate->p == doctest::Approx(0.2));
  CHECK(scan.certificate->gamma < 1.0);
  CHECK(scan.certificate->max_relative_drift_error <= 1e-2);
}

TEST_CASE("rough eigenfunctions are refused rather than certified loosely") {
  // strongly lopsided expansion makes f* genuinely Holder-rough; the
  // off-grid drift identity then cannot reach the 1e-2 margin at this
  // resolution and the scan must say so
  Matrix g(3, 3);
  g << 1.0, 0.1, 0.05, 0.1, 3.0, 0.1, 0.05, 0.1, 1.2;
  FactorSet fs = make_factors(g, 0.9);
  SphereGrid grid = make_sphere_grid(3, 2562);
  LyapunovEstimate lam = lambda_mc(fs, 256, 1024, 7, LyapMethod::McVector);
  REQUIRE(lam.value > 0.0);
  DriftOptions opts;
  opts.lambda_estimate = lam.value;
  DriftScan scan = build_drift_certificate(grid, fs, {0.05, 0.1, 0.2}, opts);
  CHECK_FALSE(scan.certificate.has_value());
  CHECK_FALSE(scan.r_curve.empty());
  CHECK_FALSE(scan.reason.empty());
}

TEST_CASE("drift certificates") {
  FactorSet fs = unstable_regular_2d();
  SphereGrid g = make_sphere_grid(2, 512);
  LyapunovEstimate lam = lambda_mc(fs, 256, 1024, 5, LyapMethod::McVector);
  REQUIRE(lam.value > 0.0);

  SUBCASE("a certificate exists for the unstable regular instance") {
    DriftOptions opts;
    opts.lambda_estimate = lam.value;
    DriftScan scan = build_drift_certificate(g, fs, {0.1, 0.2, 0.3, 0.5, 0.8}, opts);
    REQUIRE(scan.certificate.has_value());
    const DriftCertificate& c = *scan.certificate;
    CHECK(c.gamma > 0.0);
    CHECK(c.gamma < 1.0);
    CHECK(c.c_minus > 0.0);
    CHECK(c.c_plus == doctest::Approx(1.0));
    CHECK(c.max_relative_drift_error <= 1e-2);

    // F* homogeneity holds exactly by construction
    Rng rng(2);
    Vector w = rng.unit_vector(2) * 0.37;
    double f1 = drift_function(g, c, 2.5 * w);
    double f2 = std::pow(2.5, -c.p) * drift_function(g, c, w);
    CHECK(f1 == doctest::Approx(f2).epsilon(1e-12));
  }
  SUBCASE("non-positive lambda estimate is refused with a reason") {
    DriftOptions opts;
    opts.lambda_estimate = -0.1;
    DriftScan scan = build_drift_certificate(g, fs, {0.1, 0.2}, opts);
    CHECK_FALSE(scan.certificate.has_value());
    CHECK_FALSE(scan.reason.empty());
  }
  SUBCASE("a stable factor set certifies nothing even with a lied-about lambda") {
    FactorSet stable = make_factors(gram2(1.0, 0.1, 1.2), 0.1);
    DriftOptions opts;
    opts.lambda_estimate = 0.5;  // wrong on purpose; r(-p) >= 1 protects the scan
    DriftScan scan = build_drift_certificate(g, stable, {0.1, 0.2, 0.4}, opts);
    CHECK_FALSE(scan.certificate.has_value());
  }
}

#include <cmath>

#include "doctest.h"
#include "sgdstab/linalg.hpp"
#include "sgdstab/lyapunov.hpp"
#include "sgdstab/rng.hpp"

using namespace sgdstab;

namespace {

Matrix gram2(double a, double b, double c) {
  Matrix g(2, 2);
  g << a, b, b, c;
  return g;
}

Matrix random_spd(int n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.next_normal();
  Matrix g = a.transpose() * a / n + 0.05 * Matrix::Identity(n, n);
  return scale * g;
}

FactorSet appendix_scalars() {
  Matrix a(1, 1), b(1, 1);
  a << 1.0 / 3.0;
  b << 2.0;
  return custom_factors({a, b}, 1.0);
}

}  // namespace

TEST_CASE("mu closed forms") {
  Matrix g1(1, 1);
  g1 << 1.0;
  CHECK(mu(g1, 0.5) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(mu(g1, 2.0) == doctest::Approx(0.0).epsilon(1e-12));

  Matrix gd = gram2(1.0, 0.0, 3.0);
  CHECK(mu(gd, 0.9) == doctest::Approx(std::log(0.55)).epsilon(1e-12));

  Matrix bad(2, 2);
  bad << 1, 0.2, 0.3, 1;
  CHECK_THROWS_AS(mu(bad, 0.5), std::invalid_argument);
}

TEST_CASE("mu sign and the Hessian-norm predicate agree off the boundary") {
  SUBCASE("boundary: both false with mu = 0") {
    Matrix g(1, 1);
    g << 1.0;
    StabilityEquivalence eq = mu_stability_equivalence(g, 2.0);
    CHECK(eq.mu_value == doctest::Approx(0.0));
    CHECK_FALSE(eq.mu_negative);
    CHECK_FALSE(eq.hessian_norm_lt_2_over_eta);
  }
  SUBCASE("random SPD instances, small eta") {
    for (int t = 0; t < 20; ++t) {
      Matrix g = random_spd(3, 100 + t);
      StabilityEquivalence eq = mu_stability_equivalence(g, 0.1);
      CHECK(eq.mu_negative);
      CHECK(eq.hessian_norm_lt_2_over_eta);
    }
  }
}

TEST_CASE("lambda_exact closed forms and budget") {
  SUBCASE("scalar: every n returns log|1-eta g|") {
    Matrix g(1, 1);
    g << 1.5;
    FactorSet fs = make_factors(g, 0.5);
    for (int n : {1, 2, 5, 9})
      CHECK(lambda_exact(fs, n) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  }
  SUBCASE("n=1 is the single-factor expectation") {
    Matrix g = gram2(2.0, 1.0, 2.0);
    FactorSet fs = make_factors(g, 0.9);
    double expect = 0.5 * (std::log(spectral_norm(fs.sgd_factors[0])) +
                           std::log(spectral_norm(fs.sgd_factors[1])));
    CHECK(lambda_exact(fs, 1) == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("budget enforced") {
    Matrix g = random_spd(3, 5);
    FactorSet fs = make_factors(g, 0.5);
    CHECK_THROWS_AS(lambda_exact(fs, 20, 1000), BudgetExceeded);
    CHECK_THROWS_AS(moment_lyapunov(fs, 2.0, 20, MomentMode::ExactEnum, 0, 1, 1000),
                    BudgetExceeded);
  }
}

TEST_CASE("lambda_exact is non-increasing in n on random SPD Grams") {
  for (int t = 0; t < 5; ++t) {
    int N = 2 + (t % 2);
    Matrix g = random_spd(N, 300 + t, 1.5);
    Rng rng(400 + t);
    double eta = 0.3 + 1.2 * rng.next_double();
    FactorSet fs = make_factors(g, eta);
    double prev = lambda_exact(fs, 1);
    for (int n = 2; n <= 6; ++n) {
      double cur = lambda_exact(fs, n);
      CHECK(cur <= prev + 1e-10);
      prev = cur;
    }
  }
}

TEST_CASE("lambda_mc matches scalar truth with zero spread") {
  Matrix g(1, 1);
  g << 1.5;
  FactorSet fs = make_factors(g, 0.5);
  for (LyapMethod m : {LyapMethod::McNorm, LyapMethod::McVector}) {
    LyapunovEstimate est = lambda_mc(fs, 16, 64, 42, m);
    CHECK(est.value == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    CHECK(est.std_error <= 1e-12);
  }
}

TEST_CASE("lambda_mc is deterministic in the seed") {
  Matrix g = gram2(2.0, 1.0, 2.0);
  FactorSet fs = make_factors(g, 0.9);
  LyapunovEstimate a = lambda_mc(fs, 32, 256, 7, LyapMethod::McNorm);
  LyapunovEstimate b = lambda_mc(fs, 32, 256, 7, LyapMethod::McNorm);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  LyapunovEstimate c = lambda_mc(fs, 32, 256, 8, LyapMethod::McNorm);
  CHECK(a.value != c.value);
}

TEST_CASE("thread count does not change lambda_mc bits") {
  Matrix g = random_spd(3, 77);
  FactorSet fs = make_factors(g, 0.8);
  LyapunovEstimate a = lambda_mc(fs, 32, 512, 7, LyapMethod::McVector, 1);
  LyapunovEstimate b = lambda_mc(fs, 32, 512, 7, LyapMethod::McVector, 4);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("diagonal Gram: commuting-factor law of large numbers") {
  // factors diag(0.1, 1) and diag(1, -1.7); the top exponent is
  // (1/2) log 1.7 because each index is drawn half the time
  Matrix g = gram2(1.0, 0.0, 3.0);
  FactorSet fs = make_factors(g, 0.9);
  const double truth = 0.5 * std::log(1.7);

  LyapunovEstimate est = lambda_mc(fs, 64, 4096, 11, LyapMethod::McNorm);
  CHECK(std::abs(est.value - truth) <= 3.0 * est.std_error);

  double exact10 = lambda_exact(fs, 10);
  CHECK(std::abs(est.value - exact10) <= 3.0 * est.std_error + 0.05);
}

TEST_CASE("mc-norm sits at or below the exact enumeration at matched n") {
  Matrix g = gram2(2.0, 1.0, 2.0);
  FactorSet fs = make_factors(g, 0.9);
  double exact = lambda_exact(fs, 8);
  LyapunovEstimate est = lambda_mc(fs, 8, 4096, 3, LyapMethod::McNorm);
  CHECK(std::abs(est.value - exact) <= 3.0 * est.std_error);
}

TEST_CASE("oseledets spectrum") {
  SUBCASE("scalar: single exponent") {
    Matrix g(1, 1);
    g << 1.5;
    FactorSet fs = make_factors(g, 0.5);
    SpectrumEstimate s = oseledets_spectrum(fs, 32, 16, 5);
    REQUIRE(s.exponents.size() == 1);
    CHECK(s.exponents[0] == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  }
  SUBCASE("diagonal commuting case splits into the two half rates") {
    Matrix g = gram2(1.0, 0.0, 3.0);
    FactorSet fs = make_factors(g, 0.9);
    SpectrumEstimate s = oseledets_spectrum(fs, 256, 512, 6);
    REQUIRE(s.exponents.size() == 2);
    CHECK(std::abs(s.exponents[0] - 0.5 * std::log(1.7)) <= 4.0 * s.std_errors[0] + 1e-6);
    CHECK(std::abs(s.exponents[1] - 0.5 * std::log(0.1)) <= 4.0 * s.std_errors[1] + 1e-6);
  }
  SUBCASE("top exponent is consistent with lambda_mc") {
    Matrix g = random_spd(3, 500);
    FactorSet fs = make_factors(g, 0.9);
    SpectrumEstimate s = oseledets_spectrum(fs, 128, 1024, 2);
    LyapunovEstimate est = lambda_mc(fs, 128, 1024, 2, LyapMethod::McVector);
    double tol = 3.0 * std::sqrt(s.std_errors[0] * s.std_errors[0] +
                                 est.std_error * est.std_error) + 1e-3;
    CHECK(std::abs(s.exponents[0] - est.value) <= tol);
  }
  SUBCASE("exponent sum telescopes to the sampled log-determinant average") {
    Matrix g = random_spd(3, 600);
    const double eta = 0.7;
    FactorSet fs = make_factors(g, eta);
    const int n = 64;
    const long trials = 64;
    const std::uint64_t seed = 17;
    SpectrumEstimate s = oseledets_spectrum(fs, n, trials, seed);
    // det(1 - eta G_[i]) = 1 - eta G_ii, so the expected sum is exactly
    // computable from the sampled index streams
    double det_avg = 0.0;
    for (long t = 0; t < trials; ++t) {
      SeedStream stream = SeedStream::for_trial(seed, t);
      double acc = 0.0;
      for (int k = 1; k <= n; ++k) {
        int idx = stream.index_at(k, fs.count());
        acc += std::log(std::abs(1.0 - eta * g(idx, idx)));
      }
      det_avg += acc / n;
    }
    det_avg /= trials;
    double sum = 0.0;
    for (double e : s.exponents) sum += e;
    CHECK(sum == doctest::Approx(det_avg).epsilon(1e-6));
  }
}

TEST_CASE("scale covariance: c M shifts every exponent by log c") {
  Matrix g = random_spd(2, 700);
  FactorSet fs = make_factors(g, 0.9);
  const double c = 1.7;
  std::vector<Matrix> scaled;
  for (const Matrix& m : fs.sgd_factors) scaled.push_back(c * m);
  FactorSet fs2 = custom_factors(scaled, 0.9);

  LyapunovEstimate a = lambda_mc(fs, 48, 256, 21, LyapMethod::McVector);
  LyapunovEstimate b = lambda_mc(fs2, 48, 256, 21, LyapMethod::McVector);
  CHECK(b.value - a.value == doctest::Approx(std::log(c)).epsilon(1e-8));

  SpectrumEstimate sa = oseledets_spectrum(fs, 48, 128, 22);
  SpectrumEstimate sb = oseledets_spectrum(fs2, 48, 128, 22);
  for (std::size_t i = 0; i < sa.exponents.size(); ++i)
    CHECK(sb.exponents[i] - sa.exponents[i] == doctest::Approx(std::log(c)).epsilon(1e-8));
}

TEST_CASE("moment exponents on the two-point scalar family") {
  FactorSet fs = appendix_scalars();

  SUBCASE("p = 0 vanishes identically") {
    CHECK(moment_lyapunov(fs, 0.0, 4, MomentMode::ExactEnum, 0, 1).value ==
          doctest::Approx(0.0).epsilon(1e-14));
    CHECK(moment_lyapunov(fs, 0.0, 16, MomentMode::Mc, 128, 1).value ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("Lambda_2 = log E[Y^2] = log(37/18) at any n") {
    for (int n : {1, 3, 8}) {
      MomentEstimate me = moment_lyapunov(fs, 2.0, n, MomentMode::ExactEnum, 0, 1);
      CHECK(me.value == doctest::Approx(std::log(37.0 / 18.0)).epsilon(1e-12));
    }
  }
  SUBCASE("exact and mc agree within noise") {
    MomentEstimate ex = moment_lyapunov(fs, 2.0, 8, MomentMode::ExactEnum, 0, 1);
    MomentEstimate mc = moment_lyapunov(fs, 2.0, 8, MomentMode::Mc, 8192, 9);
    CHECK(std::abs(mc.value - ex.value) <= 3.0 * mc.std_error);
  }
  SUBCASE("Lambda_p dominates p lambda on the probe grid") {
    LyapunovEstimate lam = lambda_mc(fs, 256, 2048, 13, LyapMethod::McVector);
    for (double p : {-1.0, 1.0, 2.0}) {
      MomentEstimate me = moment_lyapunov(fs, p, 6, MomentMode::ExactEnum, 0, 1);
      CHECK(me.value >= p * lam.value - 3.0 * std::abs(p) * lam.std_error - 1e-9);
    }
  }
  SUBCASE("Lambda_p is convex on the probe grid") {
    double m1 = moment_lyapunov(fs, -1.0, 6, MomentMode::ExactEnum, 0, 1).value;
    double p05 = moment_lyapunov(fs, 0.5, 6, MomentMode::ExactEnum, 0, 1).value;
    double p2 = moment_lyapunov(fs, 2.0, 6, MomentMode::ExactEnum, 0, 1).value;
    // chord from -1 to 2 lies above the value at 0.5
    double chord = m1 + (p05 - -1.0) / (2.0 - -1.0) * (p2 - m1);
    CHECK(p05 <= chord + 1e-9);
  }
}

TEST_CASE("second-moment verdicts") {
  SUBCASE("two-point scalar family: a.s. stable yet second-moment unstable") {
    FactorSet fs = appendix_scalars();
    SecondMomentVerdict v = second_moment_verdict(fs, 8, 4096, 3);
    CHECK(v.kind == SecondMomentVerdict::Kind::Unstable);
    CHECK(v.lambda.value < 0.0);
    CHECK(v.as_stable_but_moment_unstable);
    CHECK(v.lambda2.value == doctest::Approx(std::log(37.0 / 18.0)).epsilon(1e-10));
  }
  SUBCASE("stable scalar factor is stable on both counts") {
    Matrix g(1, 1);
    g << 1.0;
    FactorSet fs = make_factors(g, 0.5);
    SecondMomentVerdict v = second_moment_verdict(fs, 8, 256, 3);
    CHECK(v.kind == SecondMomentVerdict::Kind::Stable);
    CHECK_FALSE(v.as_stable_but_moment_unstable);
  }
  SUBCASE("deterministic GD factor: verdict sign equals the sign of 2 mu") {
    Matrix g = gram2(2.0, 1.0, 2.0);
    for (double eta : {0.2, 1.4}) {
      FactorSet full = make_factors(g, eta);
      FactorSet gd_only = custom_factors({full.gd_factor}, eta);
      double mu_val = mu(g, eta);
      SecondMomentVerdict v = second_moment_verdict(gd_only, 16, 64, 3);
      if (mu_val < 0) CHECK(v.kind == SecondMomentVerdict::Kind::Stable);
      if (mu_val > 0) CHECK(v.kind == SecondMomentVerdict::Kind::Unstable);
      CHECK(v.lambda2.value == doctest::Approx(2.0 * mu_val).epsilon(1e-6));
    }
  }
}

TEST_CASE("annihilating factors surface as -infinity, never clipped") {
  Matrix g(1, 1);
  g << 2.0;
  FactorSet fs = make_factors(g, 0.5);  // the single factor is exactly 0
  REQUIRE(fs.k1 == 0.0);

  LyapunovEstimate est = lambda_mc(fs, 8, 16, 1, LyapMethod::McVector);
  CHECK(est.minus_infinity);
  CHECK(est.value == -std::numeric_limits<double>::infinity());

  // N=2 with one singular factor: bottom exponent is -infinity, top finite
  Matrix g2(2, 2);
  g2 << 2.0, 0.0, 0.0, 1.0;
  FactorSet fs2 = make_factors(g2, 0.5);  // factors diag(0,1), diag(1,0.5)
  SpectrumEstimate s = oseledets_spectrum(fs2, 32, 16, 3);
  CHECK(std::isfinite(s.exponents[0]));
  CHECK(s.exponents[1] == -std::numeric_limits<double>::infinity());
}

TEST_CASE("lambda of the deterministic GD singleton equals mu") {
  Matrix g = random_spd(3, 900);
  const double eta = 0.9;
  FactorSet full = make_factors(g, eta);
  FactorSet gd_only = custom_factors({full.gd_factor}, eta);
  LyapunovEstimate est = lambda_mc(gd_only, 64, 8, 1, LyapMethod::McNorm);
  CHECK(est.value == doctest::Approx(mu(g, eta)).epsilon(1e-10));
  CHECK(est.std_error <= 1e-14);
}

#include "sgdstab/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sgdstab/linalg.hpp"
#include "sgdstab/rng.hpp"

namespace sgdstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Kahan accumulator; enumeration sums run over up to ~1e7 terms and feed a
// 1e-10 monotonicity check downstream.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// streaming log-sum-exp
struct LogSumExp {
  double max_exp = -kInf;
  KahanSum scaled;
  long count = 0;
  void add(double x) {
    ++count;
    if (x == -kInf) return;
    if (x <= max_exp) {
      scaled.add(std::exp(x - max_exp));
    } else {
      if (max_exp == -kInf) {
        scaled = KahanSum{};
        scaled.add(1.0);
      } else {
        double rescale = std::exp(max_exp - x);
        scaled.sum *= rescale;
        scaled.carry *= rescale;
        scaled.add(1.0);
      }
      max_exp = x;
    }
  }
  double log_sum() const {
    if (max_exp == -kInf) return -kInf;
    if (max_exp == kInf) return kInf;  // p < 0 with an exactly annihilated vector
    return max_exp + std::log(scaled.sum);
  }
};

long long checked_pow(long long base, int exp, long long cap) {
  long long v = 1;
  for (int i = 0; i < exp; ++i) {
    if (v > cap / base) return cap + 1;
    v *= base;
  }
  return v;
}

// Depth-first walk over all index sequences, multiplying partial products on
// the left and rescaling to keep magnitudes representable. Per-depth buffers
// avoid allocating inside the walk (up to ~1e7 nodes).
struct ProductWalk {
  const FactorSet& fs;
  std::vector<Matrix> layer;
  const std::function<void(const Matrix&, double)>& leaf;

  ProductWalk(const FactorSet& f, int depth, const std::function<void(const Matrix&, double)>& l)
      : fs(f), layer(depth + 1, Matrix(f.dim(), f.dim())), leaf(l) {}

  void walk(int depth, int depth_left, double log_scale) {
    if (depth_left == 0) {
      leaf(layer[depth], log_scale);
      return;
    }
    for (int i = 0; i < fs.count(); ++i) {
      layer[depth + 1].noalias() = fs.factor(i) * layer[depth];
      double ls = log_scale;
      double mag = layer[depth + 1].cwiseAbs().maxCoeff();
      if (mag > 1e100 || (mag > 0 && mag < 1e-100)) {
        layer[depth + 1] /= mag;
        ls += std::log(mag);
      }
      walk(depth + 1, depth_left - 1, ls);
    }
  }
};

void enumerate_products(const FactorSet& fs, int depth, const Matrix& start,
                        const std::function<void(const Matrix&, double)>& leaf) {
  ProductWalk w(fs, depth, leaf);
  w.layer[0] = start;
  w.walk(0, depth, 0.0);
}

struct VectorWalk {
  const FactorSet& fs;
  std::vector<Vector> layer;
  const std::function<void(const Vector&, double)>& leaf;

  VectorWalk(const FactorSet& f, int depth, const std::function<void(const Vector&, double)>& l)
      : fs(f), layer(depth + 1, Vector(f.dim())), leaf(l) {}

  void walk(int depth, int depth_left, double log_scale) {
    if (depth_left == 0) {
      leaf(layer[depth], log_scale);
      return;
    }
    for (int i = 0; i < fs.count(); ++i) {
      layer[depth + 1].noalias() = fs.factor(i) * layer[depth];
      double ls = log_scale;
      double mag = layer[depth + 1].cwiseAbs().maxCoeff();
      if (mag > 1e100 || (mag > 0 && mag < 1e-100)) {
        layer[depth + 1] /= mag;
        ls += std::log(mag);
      }
      walk(depth + 1, depth_left - 1, ls);
    }
  }
};

void enumerate_vectors(const FactorSet& fs, int depth, const Vector& start,
                       const std::function<void(const Vector&, double)>& leaf) {
  VectorWalk w(fs, depth, leaf);
  w.layer[0] = start;
  w.walk(0, depth, 0.0);
}

std::vector<Vector> probe_directions(const FactorSet& fs, std::uint64_t seed) {
  const int n = fs.dim();
  std::vector<Vector> probes;
  for (int i = 0; i < n; ++i) probes.push_back(Vector::Unit(n, i));
  if (n > 1) {
    Eigen::JacobiSVD<Matrix> svd(fs.gd_factor, Eigen::ComputeFullV);
    probes.push_back(svd.matrixV().col(0));
    Rng rng(hash_combine(seed, 0xd17eULL));
    for (int k = 0; k < 8; ++k) probes.push_back(rng.unit_vector(n));
  }
  // drop near-duplicates
  std::vector<Vector> kept;
  for (const Vector& w : probes) {
    bool dup = false;
    for (const Vector& v : kept)
      if (std::abs(v.dot(w)) > 1.0 - 1e-12) {
        dup = true;
        break;
      }
    if (!dup) kept.push_back(w);
  }
  return kept;
}

}  // namespace

std::string to_string(LyapMethod m) {
  switch (m) {
    case LyapMethod::McNorm: return "mc-norm";
    case LyapMethod::McVector: return "mc-vector";
    case LyapMethod::ExactEnum: return "exact-enum";
  }
  return "mc-norm";
}

double mu(const Matrix& G, double eta) {
  if (!is_symmetric(G)) throw std::invalid_argument("mu: G must be symmetric");
  const int n = static_cast<int>(G.rows());
  Matrix gd = Matrix::Identity(n, n) - (eta / n) * G;
  return std::log(sym_spectral_radius(gd));
}

StabilityEquivalence mu_stability_equivalence(const Matrix& G, double eta) {
  if (!is_symmetric(G)) throw std::invalid_argument("mu_stability_equivalence: G not symmetric");
  StabilityEquivalence eq;
  eq.mu_value = mu(G, eta);
  eq.hessian_norm = sym_spectral_radius(G) / static_cast<double>(G.rows());
  eq.mu_negative = eq.mu_value < 0.0;
  eq.hessian_norm_lt_2_over_eta = eq.hessian_norm < 2.0 / eta;
  return eq;
}

double lambda_exact(const FactorSet& factors, int n, long long budget) {
  if (n < 1) throw std::invalid_argument("lambda_exact: n must be >= 1");
  long long total = checked_pow(factors.count(), n, budget);
  if (total > budget) throw BudgetExceeded(total, budget);

  KahanSum acc;
  Matrix id = Matrix::Identity(factors.dim(), factors.dim());
  std::function<void(const Matrix&, double)> leaf = [&](const Matrix& p, double log_scale) {
    double nrm = spectral_norm(p);
    acc.add(nrm == 0.0 ? -kInf : std::log(nrm) + log_scale);
  };
  enumerate_products(factors, n, id, leaf);
  return acc.sum / (static_cast<double>(total) * n);
}

LyapunovEstimate lambda_mc(const FactorSet& factors, int n, long trials, std::uint64_t seed,
                           LyapMethod method, int threads) {
  if (n < 1) throw std::invalid_argument("lambda_mc: n must be >= 1");
  if (trials < 2) throw std::invalid_argument("lambda_mc: trials must be >= 2");
  if (method == LyapMethod::ExactEnum) {
    LyapunovEstimate est;
    est.value = lambda_exact(factors, n);
    est.std_error = 0.0;
    est.n_steps = n;
    est.trials = 0;
    est.method = method;
    return est;
  }

  std::vector<double> values(trials);
  parallel_for(trials, threads, [&](long t) {
    SeedStream stream = SeedStream::for_trial(seed, static_cast<std::uint64_t>(t));
    if (method == LyapMethod::McNorm) {
      values[t] = product_log_norm(factors, stream, n) / n;
    } else {
      Rng rng(hash_combine(seed, hash_combine(0x77ecULL, static_cast<std::uint64_t>(t))));
      Vector w = rng.unit_vector(factors.dim());
      values[t] = vector_log_norm(factors, stream, n, w) / n;
    }
  });

  LyapunovEstimate est;
  est.n_steps = n;
  est.trials = trials;
  est.method = method;
  bool has_inf = std::any_of(values.begin(), values.end(),
                             [](double v) { return v == -kInf; });
  if (has_inf) {
    est.value = -kInf;
    est.minus_infinity = true;
    est.std_error = 0.0;
    return est;
  }
  auto [mean, se] = mean_and_stderr(values);
  est.value = mean;
  est.std_error = se;
  return est;
}

SpectrumEstimate oseledets_spectrum(const FactorSet& factors, int n, long trials,
                                    std::uint64_t seed, int threads) {
  if (n < 1) throw std::invalid_argument("oseledets_spectrum: n must be >= 1");
  if (trials < 2) throw std::invalid_argument("oseledets_spectrum: trials must be >= 2");
  const int dim = factors.dim();

  std::vector<std::vector<double>> per_slot(dim, std::vector<double>(trials));
  parallel_for(trials, threads, [&](long t) {
    SeedStream stream = SeedStream::for_trial(seed, static_cast<std::uint64_t>(t));
    Rng rng(hash_combine(seed, hash_combine(0x05edULL, static_cast<std::uint64_t>(t))));
    Matrix frame = dim == 1 ? Matrix::Ones(1, 1) : rng.orthonormal_frame(dim, dim);
    ProductSample s = sample_product(factors, stream, n, frame, kRenormInterval,
                                     CollapsePolicy::StickyMinusInf);
    for (int j = 0; j < dim; ++j) per_slot[j][t] = s.r_log_sums(j) / n;
  });

  SpectrumEstimate est;
  est.n_steps = n;
  est.trials = trials;
  std::vector<std::pair<double, double>> rows(dim);
  for (int j = 0; j < dim; ++j) {
    bool has_inf = std::any_of(per_slot[j].begin(), per_slot[j].end(),
                               [](double v) { return v == -kInf; });
    if (has_inf) {
      rows[j] = {-kInf, 0.0};
    } else {
      auto [mean, se] = mean_and_stderr(per_slot[j]);
      rows[j] = {mean, se};
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  for (auto& [v, se] : rows) {
    est.exponents.push_back(v);
    est.std_errors.push_back(se);
  }
  return est;
}

MomentEstimate moment_lyapunov(const FactorSet& factors, double p, int n, MomentMode mode,
                               long trials, std::uint64_t seed, long long budget) {
  if (n < 1) throw std::invalid_argument("moment_lyapunov: n must be >= 1");
  MomentEstimate best;
  best.p = p;
  best.n_steps = n;
  best.mode = mode;
  best.value = -kInf;

  const std::vector<Vector> probes = probe_directions(factors, seed);
  const double log_count = std::log(static_cast<double>(factors.count()));

  if (mode == MomentMode::ExactEnum) {
    long long total = checked_pow(factors.count(), n, budget);
    if (total > budget) throw BudgetExceeded(total, budget);
    for (const Vector& w : probes) {
      LogSumExp lse;
      std::function<void(const Vector&, double)> leaf = [&](const Vector& v, double log_scale) {
        double nv = v.norm();
        lse.add(nv == 0.0 ? (p > 0 ? -kInf : kInf) : p * (std::log(nv) + log_scale));
      };
      enumerate_vectors(factors, n, w, leaf);
      double val = (lse.log_sum() - n * log_count) / n;
      if (val > best.value) {
        best.value = val;
        best.std_error = 0.0;
      }
    }
    best.trials = 0;
    return best;
  }

  if (trials < 2) throw std::invalid_argument("moment_lyapunov: trials must be >= 2");
  for (const Vector& w : probes) {
    // y_t = p log||product w||; value = (1/n) (logmeanexp y); delta-method s.e.
    std::vector<double> ys(trials);
    for (long t = 0; t < trials; ++t) {
      SeedStream stream = SeedStream::for_trial(seed, static_cast<std::uint64_t>(t));
      double ln = vector_log_norm(factors, stream, n, w);
      ys[t] = ln == -kInf ? -kInf : p * ln;
    }
    double max_y = *std::max_element(ys.begin(), ys.end());
    if (max_y == -kInf) continue;
    std::vector<double> scaled(trials);
    for (long t = 0; t < trials; ++t)
      scaled[t] = ys[t] == -kInf ? 0.0 : std::exp(ys[t] - max_y);
    double mean_a = pairwise_sum(scaled) / trials;
    double val = (max_y + std::log(mean_a)) / n;
    std::vector<double> sq(trials);
    for (long t = 0; t < trials; ++t) {
      double d = scaled[t] - mean_a;
      sq[t] = d * d;
    }
    double sd = std::sqrt(pairwise_sum(sq) / (trials - 1));
    double se = sd / (mean_a * std::sqrt(static_cast<double>(trials))) / n;
    if (val > best.value) {
      best.value = val;
      best.std_error = se;
    }
  }
  best.trials = trials;
  return best;
}

std::string to_string(SecondMomentVerdict::Kind k) {
  switch (k) {
    case SecondMomentVerdict::Kind::Stable: return "stable";
    case SecondMomentVerdict::Kind::Unstable: return "unstable";
    case SecondMomentVerdict::Kind::Marginal: return "marginal";
  }
  return "marginal";
}

SecondMomentVerdict second_moment_verdict(const FactorSet& factors, int n, long trials,
                                          std::uint64_t seed, long long budget) {
  SecondMomentVerdict v;
  long long total = checked_pow(factors.count(), n, budget);
  MomentMode mode = total > budget ? MomentMode::Mc : MomentMode::ExactEnum;
  v.lambda2 = moment_lyapunov(factors, 2.0, n, mode, trials, seed, budget);
  v.lambda = lambda_mc(factors, n, trials, seed, LyapMethod::McVector);
  double tol = std::max(3.0 * v.lambda2.std_error, 1e-12);
  if (v.lambda2.value > tol)
    v.kind = SecondMomentVerdict::Kind::Unstable;
  else if (v.lambda2.value < -tol)
    v.kind = SecondMomentVerdict::Kind::Stable;
  else
    v.kind = SecondMomentVerdict::Kind::Marginal;
  v.as_stable_but_moment_unstable =
      v.lambda.value + 3.0 * v.lambda.std_error < 0.0 && v.lambda2.value > tol;
  return v;
}

}  // namespace sgdstab

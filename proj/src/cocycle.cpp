#include "sgdstab/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgdstab/linalg.hpp"

namespace sgdstab {

namespace {

void compute_bounds(FactorSet& fs) {
  double k1 = std::numeric_limits<double>::infinity();
  double k2 = 0.0;
  for (const Matrix& m : fs.sgd_factors) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    k2 = std::max(k2, sv(0));
    k1 = std::min(k1, sv(sv.size() - 1));
  }
  fs.k1 = k1;
  fs.k2 = k2;
}

}  // namespace

FactorSet make_factors(const Matrix& G, double eta) {
  if (!is_symmetric(G)) throw std::invalid_argument("make_factors: G must be symmetric");
  if (eta <= 0) throw std::invalid_argument("make_factors: eta must be positive");
  const int n = static_cast<int>(G.rows());
  FactorSet fs;
  fs.eta = eta;
  fs.gram = G;
  fs.sgd_factors.reserve(n);
  for (int i = 0; i < n; ++i) {
    Matrix m = Matrix::Identity(n, n);
    m.row(i) -= eta * G.row(i);
    fs.sgd_factors.push_back(std::move(m));
  }
  fs.gd_factor = Matrix::Identity(n, n) - (eta / n) * G;
  compute_bounds(fs);
  return fs;
}

FactorSet custom_factors(std::vector<Matrix> factors, double eta) {
  if (factors.empty()) throw std::invalid_argument("custom_factors: empty factor list");
  const auto rows = factors.front().rows();
  for (const Matrix& m : factors)
    if (m.rows() != rows || m.cols() != rows)
      throw std::invalid_argument("custom_factors: factors must be square, same size");
  FactorSet fs;
  fs.eta = eta;
  fs.gd_factor = Matrix::Zero(rows, rows);
  for (const Matrix& m : factors) fs.gd_factor += m;
  fs.gd_factor /= static_cast<double>(factors.size());
  fs.sgd_factors = std::move(factors);
  compute_bounds(fs);
  return fs;
}

Matrix minibatch_factor(const Matrix& G, double eta, const std::vector<int>& batch) {
  if (batch.empty()) throw std::invalid_argument("minibatch_factor: empty batch");
  const int n = static_cast<int>(G.rows());
  Matrix m = Matrix::Identity(n, n);
  const double scale = eta / static_cast<double>(batch.size());
  for (int i : batch) {
    if (i < 0 || i >= n) throw std::invalid_argument("minibatch_factor: index out of range");
    m.row(i) -= scale * G.row(i);
  }
  return m;
}

ProductSample sample_product(const FactorSet& factors, const SeedStream& stream, long n,
                             const Matrix& frame0, int renorm_interval,
                             CollapsePolicy on_collapse) {
  if (n < 1) throw std::invalid_argument("sample_product: n must be >= 1");
  const int k = static_cast<int>(frame0.cols());
  const int num = factors.count();

  Matrix frame = frame0;
  Vector r_log_sums = Vector::Zero(k);

  if (k == 1) {
    // single tracked direction: renormalize by the plain norm
    double log_norm = 0.0;
    Vector w = frame.col(0);
    for (long step = 1; step <= n; ++step) {
      w = factors.factor(stream.index_at(step, num)) * w;
      if (step % renorm_interval == 0 || step == n) {
        double nw = w.norm();
        if (nw == 0.0) {
          r_log_sums(0) = -std::numeric_limits<double>::infinity();
          ProductSample out;
          out.log_norm = -std::numeric_limits<double>::infinity();
          out.frame = Matrix::Zero(frame0.rows(), 1);
          out.r_log_sums = r_log_sums;
          return out;
        }
        log_norm += std::log(nw);
        w /= nw;
      }
    }
    ProductSample out;
    out.log_norm = log_norm;
    out.frame = w;
    r_log_sums(0) = log_norm;
    out.r_log_sums = r_log_sums;
    return out;
  }

  Vector r_diag;
  Matrix q;
  for (long step = 1; step <= n; ++step) {
    frame = factors.factor(stream.index_at(step, num)) * frame;
    if (step % renorm_interval == 0 || step == n) {
      qr_positive(frame, q, r_diag);
      for (int j = 0; j < k; ++j) {
        if (r_diag(j) <= 0.0 || !std::isfinite(r_diag(j))) {
          if (on_collapse == CollapsePolicy::Throw) throw FrameCollapse(step);
          r_log_sums(j) = -std::numeric_limits<double>::infinity();
        } else if (r_log_sums(j) != -std::numeric_limits<double>::infinity()) {
          r_log_sums(j) += std::log(r_diag(j));
        }
      }
      frame = q;
    }
  }
  ProductSample out;
  out.log_norm = r_log_sums(0);
  out.frame = frame;
  out.r_log_sums = r_log_sums;
  return out;
}

double product_log_norm(const FactorSet& factors, const SeedStream& stream, long n,
                        int renorm_interval) {
  if (n < 1) throw std::invalid_argument("product_log_norm: n must be >= 1");
  const int num = factors.count();
  Matrix p = Matrix::Identity(factors.dim(), factors.dim());
  double log_scale = 0.0;
  for (long step = 1; step <= n; ++step) {
    p = factors.factor(stream.index_at(step, num)) * p;
    if (step % renorm_interval == 0) {
      double s = p.cwiseAbs().maxCoeff();
      if (s == 0.0) return -std::numeric_limits<double>::infinity();
      p /= s;
      log_scale += std::log(s);
    }
  }
  double nrm = spectral_norm(p);
  if (nrm == 0.0) return -std::numeric_limits<double>::infinity();
  return log_scale + std::log(nrm);
}

double vector_log_norm(const FactorSet& factors, const SeedStream& stream, long n,
                       const Vector& w, int renorm_interval) {
  double w0 = w.norm();
  if (w0 == 0.0) throw std::invalid_argument("vector_log_norm: zero vector");
  Matrix frame(w.size(), 1);
  frame.col(0) = w / w0;
  ProductSample s = sample_product(factors, stream, n, frame, renorm_interval);
  return s.log_norm + std::log(w0);
}

}  // namespace sgdstab

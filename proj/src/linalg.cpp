#include "sgdstab/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace sgdstab {

double spectral_norm(const Matrix& m) {
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double min_singular_value(const Matrix& m) {
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

double sym_spectral_radius(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

double max_sym_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(m.rows() - 1);
}

double min_sym_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

void qr_positive(const Matrix& a, Matrix& q, Vector& r_diag) {
  const int k = static_cast<int>(a.cols());
  Eigen::HouseholderQR<Matrix> qr(a);
  q = qr.householderQ() * Matrix::Identity(a.rows(), k);
  Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  r_diag.resize(k);
  for (int j = 0; j < k; ++j) {
    r_diag(j) = r(j, j);
    if (r_diag(j) < 0) {
      r_diag(j) = -r_diag(j);
      q.col(j) = -q.col(j);
    }
  }
}

double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n == 1) return xs[0];
  if (n <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

MeanStdErr mean_and_stderr(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return {0.0, 0.0};
  double mean = pairwise_sum(xs) / static_cast<double>(n);
  if (n == 1) return {mean, 0.0};
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = xs[i] - mean;
    sq[i] = d * d;
  }
  double var = pairwise_sum(sq) / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

void parallel_for(long count, int threads, const std::function<void(long)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  int workers = std::min<long>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<long> next{0};
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        long i = next.fetch_add(1);
        if (i >= count) break;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace sgdstab

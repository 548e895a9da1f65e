#include "sgdstab/rng.hpp"

#include <cmath>

namespace sgdstab {

double Rng::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; u clamped away from 0 so log stays finite
  double u = next_double();
  if (u < 1e-300) u = 1e-300;
  double v = next_double();
  double r = std::sqrt(-2.0 * std::log(u));
  double a = 2.0 * M_PI * v;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

Vector Rng::normal_vector(int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = next_normal();
  return v;
}

Vector Rng::unit_vector(int n) {
  Vector v = normal_vector(n);
  double nv = v.norm();
  while (nv < 1e-12) {
    v = normal_vector(n);
    nv = v.norm();
  }
  return v / nv;
}

Vector Rng::ball_point(int n, double radius) {
  Vector dir = unit_vector(n);
  double u = next_double();
  return dir * (radius * std::pow(u, 1.0 / n));
}

Matrix Rng::orthonormal_frame(int n, int k) {
  Matrix g(n, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = next_normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  // fix signs so the frame is a deterministic function of g
  Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (int j = 0; j < k; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace sgdstab

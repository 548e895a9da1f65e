#include "sgdstab/projective.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "sgdstab/linalg.hpp"
#include "sgdstab/rng.hpp"

namespace sgdstab {

namespace {

SphereGrid make_circle_grid(int resolution) {
  SphereGrid g;
  g.ambient_dim = 2;
  g.nodes.reserve(resolution);
  for (int j = 0; j < resolution; ++j) {
    double a = 2.0 * M_PI * j / resolution;
    Vector v(2);
    v << std::cos(a), std::sin(a);
    g.nodes.push_back(v);
  }
  g.weights.assign(resolution, 1.0 / resolution);
  return g;
}

SphereGrid make_icosphere_grid(int resolution) {
  // icosahedron, then midpoint subdivision until the node count reaches the
  // requested resolution (12, 42, 162, 642, 2562, ...)
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vector> verts;
  auto add = [&](double a, double b, double c) {
    Vector v(3);
    v << a, b, c;
    verts.push_back(v / v.norm());
  };
  add(-1, phi, 0); add(1, phi, 0); add(-1, -phi, 0); add(1, -phi, 0);
  add(0, -1, phi); add(0, 1, phi); add(0, -1, -phi); add(0, 1, -phi);
  add(phi, 0, -1); add(phi, 0, 1); add(-phi, 0, -1); add(-phi, 0, 1);
  std::vector<std::array<int, 3>> tris = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

  while (static_cast<int>(verts.size()) < resolution) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vector m = verts[a] + verts[b];
      m /= m.norm();
      verts.push_back(m);
      int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      int a = mid(t[0], t[1]), b = mid(t[1], t[2]), c = mid(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    tris = std::move(next);
  }

  SphereGrid g;
  g.ambient_dim = 3;
  g.nodes = std::move(verts);
  g.triangles = std::move(tris);
  g.weights.assign(g.nodes.size(), 1.0 / g.nodes.size());
  g.node_triangles.resize(g.nodes.size());
  for (int t = 0; t < static_cast<int>(g.triangles.size()); ++t)
    for (int v : g.triangles[t]) g.node_triangles[v].push_back(t);
  return g;
}

struct Stencil {
  std::array<int, 3> idx = {0, 0, 0};
  std::array<double, 3> w = {0.0, 0.0, 0.0};
};

Stencil circle_stencil(const SphereGrid& grid, const Vector& dir) {
  const int res = grid.resolution();
  double a = std::atan2(dir(1), dir(0));
  if (a < 0) a += 2.0 * M_PI;
  double pos = a * res / (2.0 * M_PI);
  int j = static_cast<int>(std::floor(pos));
  if (j >= res) j -= res;
  double frac = pos - j;
  Stencil s;
  s.idx = {j, (j + 1) % res, 0};
  s.w = {1.0 - frac, frac, 0.0};
  return s;
}

Stencil sphere_stencil(const SphereGrid& grid, const Vector& dir) {
  // radial-projection barycentric coordinates; pick the triangle whose
  // coordinates are least negative, then clip and renormalize
  Stencil best;
  double best_min = -1e30;
  auto consider = [&](const std::array<int, 3>& t) {
    Eigen::Matrix3d basis;
    basis.col(0) = grid.nodes[t[0]];
    basis.col(1) = grid.nodes[t[1]];
    basis.col(2) = grid.nodes[t[2]];
    Eigen::Vector3d c = basis.partialPivLu().solve(Eigen::Vector3d(dir(0), dir(1), dir(2)));
    double sum = c.sum();
    if (sum <= 0) return false;  // antipodal side
    c /= sum;
    double mn = c.minCoeff();
    if (mn > best_min) {
      best_min = mn;
      best.idx = {t[0], t[1], t[2]};
      best.w = {c(0), c(1), c(2)};
    }
    return mn >= 0;  // strictly inside
  };

  // the containing triangle is incident to the nearest node except in
  // degenerate cases, so try those first and fall back to a full scan
  int nearest = 0;
  double best_dot = -2.0;
  for (int v = 0; v < grid.resolution(); ++v) {
    double d = grid.nodes[v].dot(dir);
    if (d > best_dot) {
      best_dot = d;
      nearest = v;
    }
  }
  bool inside = false;
  for (int t : grid.node_triangles[nearest]) {
    if (consider(grid.triangles[t])) {
      inside = true;
      break;
    }
  }
  if (!inside && best_min < -1e-9) {
    for (const auto& t : grid.triangles)
      if (consider(t)) break;
  }

  double total = 0.0;
  for (int j = 0; j < 3; ++j) {
    best.w[j] = std::max(0.0, best.w[j]);
    total += best.w[j];
  }
  for (int j = 0; j < 3; ++j) best.w[j] /= total;
  return best;
}

Stencil make_stencil(const SphereGrid& grid, const Vector& dir) {
  return grid.ambient_dim == 2 ? circle_stencil(grid, dir) : sphere_stencil(grid, dir);
}

}  // namespace

SphereGrid make_sphere_grid(int ambient_dim, int resolution) {
  if (resolution < 4) throw std::invalid_argument("make_sphere_grid: resolution too small");
  if (ambient_dim == 2) return make_circle_grid(resolution);
  if (ambient_dim == 3) return make_icosphere_grid(resolution);
  throw std::invalid_argument("make_sphere_grid: ambient dimension must be 2 or 3");
}

double interpolate(const SphereGrid& grid, const std::vector<double>& f, const Vector& dir) {
  Stencil s = make_stencil(grid, dir);
  double v = 0.0;
  const int terms = grid.ambient_dim == 2 ? 2 : 3;
  for (int j = 0; j < terms; ++j) v += s.w[j] * f[s.idx[j]];
  return v;
}

PqOperator::PqOperator(const SphereGrid& grid, const FactorSet& factors)
    : grid_(&grid), num_factors_(factors.count()) {
  if (grid.ambient_dim != factors.dim())
    throw std::invalid_argument("PqOperator: grid and factors dimensions differ");
  const int res = grid.resolution();
  stencil_size_ = grid.ambient_dim == 2 ? 2 : 3;
  log_norms_.resize(static_cast<std::size_t>(res) * num_factors_);
  stencil_idx_.resize(log_norms_.size());
  stencil_w_.resize(log_norms_.size());
  for (int s = 0; s < res; ++s) {
    for (int i = 0; i < num_factors_; ++i) {
      Vector img = factors.factor(i) * grid.nodes[s];
      double nrm = img.norm();
      if (nrm < 1e-14)
        throw SingularFactor("factor " + std::to_string(i) +
                             " annihilates a grid direction (singular factor)");
      Stencil st = make_stencil(grid, img / nrm);
      std::size_t at = static_cast<std::size_t>(s) * num_factors_ + i;
      log_norms_[at] = std::log(nrm);
      stencil_idx_[at] = st.idx;
      stencil_w_[at] = st.w;
    }
  }
}

std::vector<double> PqOperator::apply(double q, const std::vector<double>& f) const {
  const int res = grid_->resolution();
  if (static_cast<int>(f.size()) != res)
    throw std::invalid_argument("PqOperator::apply: f must be sampled on the grid");
  std::vector<double> out(res);
  for (int s = 0; s < res; ++s) {
    double acc = 0.0;
    for (int i = 0; i < num_factors_; ++i) {
      std::size_t at = static_cast<std::size_t>(s) * num_factors_ + i;
      double interp = 0.0;
      for (int j = 0; j < stencil_size_; ++j) interp += stencil_w_[at][j] * f[stencil_idx_[at][j]];
      acc += std::exp(q * log_norms_[at]) * interp;
    }
    out[s] = acc / num_factors_;
  }
  return out;
}

std::vector<double> apply_pq(const SphereGrid& grid, const FactorSet& factors, double q,
                             const std::vector<double>& f) {
  return PqOperator(grid, factors).apply(q, f);
}

namespace {

LeadingEigen power_iterate(const PqOperator& op, double q, double tol, int max_sweeps) {
  const int res = op.grid().resolution();
  std::vector<double> f(res, 1.0);
  LeadingEigen le;

  // a positive diagonal shift keeps the iteration aperiodic; without it the
  // Collatz-Wielandt interval can oscillate when subdominant eigenvalues are
  // negative or complex
  std::vector<double> g0 = op.apply(q, f);
  double shift = 0.0;
  for (double v : g0) shift = std::max(shift, v);

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    std::vector<double> g = op.apply(q, f);
    // Collatz-Wielandt interval [min g/f, max g/f] brackets r for a
    // positivity-preserving operator and a positive iterate
    double lo = 1e300, hi = -1e300;
    for (int s = 0; s < res; ++s) {
      double ratio = g[s] / f[s];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      g[s] += shift * f[s];
    }
    double mx = *std::max_element(g.begin(), g.end());
    for (double& v : g) v /= mx;
    f = std::move(g);
    le.sweeps = sweep;
    le.r = 0.5 * (lo + hi);
    le.residual = hi - lo;
    if (le.residual <= tol * std::max(1.0, std::abs(le.r))) break;
  }
  if (le.residual > tol * std::max(1.0, std::abs(le.r)))
    throw NoConvergence(le.residual, le.r);
  // one last unshifted normalization so the eigenfunction has max 1
  double mx = *std::max_element(f.begin(), f.end());
  for (double& v : f) v /= mx;
  le.eigenfunction = std::move(f);
  return le;
}

}  // namespace

LeadingEigen leading_eigen(const SphereGrid& grid, const FactorSet& factors, double q,
                           double tol, int max_sweeps) {
  if (tol <= 0) throw std::invalid_argument("leading_eigen: tol must be positive");
  PqOperator op(grid, factors);
  return power_iterate(op, q, tol, max_sweeps);
}

DriftScan build_drift_certificate(const SphereGrid& grid, const FactorSet& factors,
                                  const std::vector<double>& p_grid, const DriftOptions& opts) {
  DriftScan scan;
  if (!(opts.lambda_estimate > 0.0)) {
    scan.reason = "lambda estimate is not positive; drift certificates require an unstable minimum";
    return scan;
  }
  PqOperator op(grid, factors);
  std::vector<double> scan_grid;
  for (double p : p_grid)
    if (p > 0) scan_grid.push_back(p);
  std::sort(scan_grid.begin(), scan_grid.end());
  for (double p : scan_grid) {
    LeadingEigen le;
    try {
      le = power_iterate(op, -p, opts.power_tol, 20000);
    } catch (const NoConvergence& nc) {
      scan.r_curve.emplace_back(-p, nc.last_estimate);
      continue;
    }
    scan.r_curve.emplace_back(-p, le.r);
    if (le.r >= opts.certification_margin) continue;

    // node-level drift residual: P_{-p} f* vs gamma f*
    std::vector<double> lhs = op.apply(-p, le.eigenfunction);
    double max_rel = 0.0;
    for (int s = 0; s < grid.resolution(); ++s) {
      double rhs = le.r * le.eigenfunction[s];
      max_rel = std::max(max_rel, std::abs(lhs[s] - rhs) / rhs);
    }

    DriftCertificate cert;
    cert.p = p;
    cert.gamma = le.r;
    cert.f_star = le.eigenfunction;
    cert.resolution = grid.resolution();
    cert.c_minus = *std::min_element(cert.f_star.begin(), cert.f_star.end());
    cert.c_plus = *std::max_element(cert.f_star.begin(), cert.f_star.end());

    // off-grid empirical drift identity on sampled nonzero w
    Rng rng(hash_combine(opts.seed, 0xd51fULL));
    for (int t = 0; t < opts.sample_checks; ++t) {
      Vector w = rng.unit_vector(factors.dim()) * std::exp(2.0 * rng.next_double() - 1.0);
      double fw = drift_function(grid, cert, w);
      double mean = 0.0;
      for (int i = 0; i < factors.count(); ++i)
        mean += drift_function(grid, cert, factors.factor(i) * w);
      mean /= factors.count();
      max_rel = std::max(max_rel, std::abs(mean - cert.gamma * fw) / (cert.gamma * fw));
    }
    cert.max_relative_drift_error = max_rel;
    if (max_rel <= opts.drift_tol && cert.c_minus > 0.0) {
      scan.certificate = cert;
      return scan;
    }
  }
  scan.reason = scan.r_curve.empty()
                    ? "empty p grid"
                    : "no p in the grid certified (r(-p) or drift residual above margin)";
  return scan;
}

double drift_function(const SphereGrid& grid, const DriftCertificate& cert, const Vector& w) {
  double nw = w.norm();
  if (nw == 0.0) throw std::invalid_argument("drift_function: zero vector");
  return std::pow(nw, -cert.p) * interpolate(grid, cert.f_star, w / nw);
}

}  // namespace sgdstab

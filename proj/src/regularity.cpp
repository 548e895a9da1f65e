#include "sgdstab/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sgdstab/linalg.hpp"
#include "sgdstab/rng.hpp"

namespace sgdstab {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

RegularityReport check_regular(const Matrix& G, double eta) {
  if (!is_symmetric(G)) throw std::invalid_argument("check_regular: G must be symmetric");
  const int n = static_cast<int>(G.rows());
  RegularityReport rep;
  rep.zero_tol = 1e-10 * std::max(1e-300, G.cwiseAbs().maxCoeff());

  rep.diag_ok = true;
  for (int i = 0; i < n; ++i) {
    double m1 = std::abs(G(i, i) - 1.0 / eta);
    double m2 = std::abs(G(i, i) - 2.0 / eta);
    rep.margin_inv_eta.push_back(m1);
    rep.margin_two_eta.push_back(m2);
    if (m1 <= rep.zero_tol || m2 <= rep.zero_tol) rep.diag_ok = false;
  }

  UnionFind uf(n);
  double edge_margin = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = std::abs(G(i, j));
      if (v > rep.zero_tol) {
        uf.unite(i, j);
        edge_margin = edge_margin == 0.0 ? v : std::min(edge_margin, v);
      }
    }
  rep.edge_margin = edge_margin;

  std::vector<std::vector<int>> blocks(n);
  for (int i = 0; i < n; ++i) blocks[uf.find(i)].push_back(i);
  for (auto& b : blocks)
    if (!b.empty()) rep.components.push_back(std::move(b));
  std::sort(rep.components.begin(), rep.components.end());
  rep.connectivity_ok = rep.components.size() == 1;
  return rep;
}

std::optional<ContractionWitness> contraction_witness(const FactorSet& factors) {
  if (!factors.gram.has_value()) return std::nullopt;
  const Matrix& G = *factors.gram;
  const double eta = factors.eta;
  const int n = factors.dim();

  int expanding = -1;
  double best = 1.0;
  for (int i = 0; i < n; ++i) {
    double v = std::abs(1.0 - eta * G(i, i));
    if (v > best) {
      best = v;
      expanding = i;
    }
  }
  if (expanding < 0) return std::nullopt;

  // normalized powers of the expanding factor converge to the rank-1
  // spectral projector at geometric rate |mu_2/mu_1| = 1/|1 - eta G_ii|
  const Matrix& f = factors.factor(expanding);
  Matrix m = f / spectral_norm(f);
  ContractionWitness w;
  w.factor_index = expanding;
  constexpr int kMaxIters = 1000;
  for (int it = 1; it <= kMaxIters; ++it) {
    m = f * m;
    m /= spectral_norm(m);
    w.iterations = it;
    if (it % 8 == 0 || it == kMaxIters) {
      Eigen::JacobiSVD<Matrix> svd(m);
      const Vector& sv = svd.singularValues();
      w.rank_gap = n == 1 ? 0.0 : sv(1) / sv(0);
      if (w.rank_gap < 1e-8) break;
    }
  }
  if (n == 1) w.rank_gap = 0.0;
  w.limit = m;
  return w;
}

IrreducibilityProbe irreducibility_probe(const FactorSet& factors, int trials,
                                         std::uint64_t seed) {
  const int n = factors.dim();
  if (n < 2) throw std::invalid_argument("irreducibility_probe: needs N >= 2");
  if (trials < 1) throw std::invalid_argument("irreducibility_probe: trials must be >= 1");

  IrreducibilityProbe probe;
  probe.saturation_threshold = std::max(8, trials / 2);
  Rng rng(hash_combine(seed, 0x1337ULL));

  constexpr double kAngleTol = 1e-6;
  const int word_len = 12;

  bool all_saturated = true;
  for (int k = 1; k <= n - 1; ++k) {
    // starting subspaces: axis-aligned spans, eigenvector spans of each
    // factor, and a few random frames; an invariant family shows up as a
    // small stable orbit from at least one start
    std::vector<Matrix> starts;
    {
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      // all k-subsets of coordinate axes (n <= 64 design envelope, but k-subset
      // count only matters for tiny n used here)
      std::vector<int> pick(k);
      std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == k) {
          Matrix f = Matrix::Zero(n, k);
          for (int j = 0; j < k; ++j) f(pick[j], j) = 1.0;
          starts.push_back(f);
          return;
        }
        for (int i = start; i < n; ++i) {
          pick[depth] = i;
          rec(i + 1, depth + 1);
        }
      };
      if (n <= 12) rec(0, 0);
    }
    for (const Matrix& f : factors.sgd_factors) {
      Eigen::EigenSolver<Matrix> es(f);
      for (int c = 0; c + k <= n; ++c) {
        Matrix v(n, k);
        bool real_block = true;
        for (int j = 0; j < k; ++j) {
          if (std::abs(es.eigenvalues()(c + j).imag()) > 1e-12) {
            real_block = false;
            break;
          }
          v.col(j) = es.eigenvectors().col(c + j).real();
        }
        if (!real_block) continue;
        Eigen::HouseholderQR<Matrix> qr(v);
        Matrix q = qr.householderQ() * Matrix::Identity(n, k);
        starts.push_back(q);
      }
    }
    for (int r = 0; r < 4; ++r) starts.push_back(rng.orthonormal_frame(n, k));

    int min_count = -1;
    for (const Matrix& start : starts) {
      std::vector<Matrix> images;
      images.push_back(start);
      for (int t = 0; t < trials; ++t) {
        Matrix img = start;
        int len = 1 + rng.next_below(word_len);
        for (int s = 0; s < len; ++s) img = factors.factor(rng.next_below(factors.count())) * img;
        Eigen::HouseholderQR<Matrix> qr(img);
        Matrix q = qr.householderQ() * Matrix::Identity(n, k);
        bool fresh = true;
        for (const Matrix& seen : images) {
          // principal-angle separation via singular values of Q1^T Q2
          Eigen::JacobiSVD<Matrix> svd(seen.transpose() * q);
          double min_cos = svd.singularValues()(k - 1);
          if (std::acos(std::clamp(min_cos, -1.0, 1.0)) < kAngleTol) {
            fresh = false;
            break;
          }
        }
        if (fresh) images.push_back(q);
        if (static_cast<int>(images.size()) >= probe.saturation_threshold) break;
      }
      int count = static_cast<int>(images.size());
      if (min_count < 0 || count < min_count) min_count = count;
    }
    probe.min_distinct_per_dim.push_back(min_count);
    if (min_count < probe.saturation_threshold) all_saturated = false;
  }
  probe.saturated_all_dims = all_saturated;
  return probe;
}

}  // namespace sgdstab

#include "sgdstab/task.hpp"

#include <cmath>
#include <stdexcept>

#include "sgdstab/linalg.hpp"
#include "sgdstab/rng.hpp"

namespace sgdstab {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::RandomFeature: return "random-feature";
    case ModelKind::ShallowTanh: return "shallow-tanh";
  }
  return "linear";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "linear") return ModelKind::Linear;
  if (name == "random-feature") return ModelKind::RandomFeature;
  if (name == "shallow-tanh") return ModelKind::ShallowTanh;
  throw std::invalid_argument("unknown model kind: " + name);
}

namespace {

constexpr int kTanhInputDim = 2;  // d for the nonlinear kinds

double sech2(double u) {
  double c = std::cosh(u);
  return 1.0 / (c * c);
}

}  // namespace

double RegressionTask::value(const Vector& x, const Vector& y) const {
  switch (kind) {
    case ModelKind::Linear:
      return x.dot(y);
    case ModelKind::RandomFeature: {
      // F(x, y) = sum_k x_k tanh(w_k . y + b_k)
      Vector u = feature_weights * y + feature_bias;
      double s = 0.0;
      for (int k = 0; k < param_dim; ++k) s += x(k) * std::tanh(u(k));
      return s;
    }
    case ModelKind::ShallowTanh: {
      // parameters: [a (H), w (H*d row-major), b (H), c]
      const int H = hidden_width;
      const int d = input_dim;
      double s = x(param_dim - 1);  // bias c
      for (int h = 0; h < H; ++h) {
        double acc = x(H * (1 + d) + h);  // b_h
        for (int j = 0; j < d; ++j) acc += x(H + h * d + j) * y(j);
        s += x(h) * std::tanh(acc);
      }
      return s;
    }
  }
  return 0.0;
}

Vector RegressionTask::gradient(const Vector& x, const Vector& y) const {
  Vector g = Vector::Zero(param_dim);
  switch (kind) {
    case ModelKind::Linear:
      g = y;
      break;
    case ModelKind::RandomFeature: {
      Vector u = feature_weights * y + feature_bias;
      for (int k = 0; k < param_dim; ++k) g(k) = std::tanh(u(k));
      break;
    }
    case ModelKind::ShallowTanh: {
      const int H = hidden_width;
      const int d = input_dim;
      for (int h = 0; h < H; ++h) {
        double acc = x(H * (1 + d) + h);
        for (int j = 0; j < d; ++j) acc += x(H + h * d + j) * y(j);
        double t = std::tanh(acc);
        double sp = sech2(acc);
        g(h) = t;  // d/da_h
        for (int j = 0; j < d; ++j) g(H + h * d + j) = x(h) * sp * y(j);  // d/dw_hj
        g(H * (1 + d) + h) = x(h) * sp;  // d/db_h
      }
      g(param_dim - 1) = 1.0;  // d/dc
      break;
    }
  }
  return g;
}

double RegressionTask::residual(const Vector& x, int i) const {
  return value(x, inputs[i]) - targets(i);
}

Vector RegressionTask::residuals(const Vector& x) const {
  Vector r(sample_count);
  for (int i = 0; i < sample_count; ++i) r(i) = residual(x, i);
  return r;
}

double RegressionTask::loss(const Vector& x) const {
  return residuals(x).squaredNorm() / (2.0 * sample_count);
}

Vector RegressionTask::loss_gradient(const Vector& x) const {
  Vector g = Vector::Zero(param_dim);
  for (int i = 0; i < sample_count; ++i) g += residual(x, i) * gradient(x, inputs[i]);
  return g / sample_count;
}

Vector RegressionTask::individual_loss_gradient(const Vector& x, int i) const {
  return residual(x, i) * gradient(x, inputs[i]);
}

Matrix RegressionTask::gradient_matrix(const Vector& x) const {
  Matrix s(param_dim, sample_count);
  for (int i = 0; i < sample_count; ++i) s.col(i) = gradient(x, inputs[i]);
  return s;
}

RegressionTask build_task(ModelKind kind, int D, int N, std::uint64_t seed) {
  if (N >= D) throw std::invalid_argument("task requires N < D (overparameterized)");
  if (N < 1 || D < 1) throw std::invalid_argument("task requires positive D and N");

  RegressionTask task;
  task.kind = kind;
  task.param_dim = D;
  task.sample_count = N;
  task.seed = seed;

  Rng rng(hash_combine(seed, 0x7a5bULL));
  switch (kind) {
    case ModelKind::Linear:
      task.input_dim = D;
      break;
    case ModelKind::RandomFeature: {
      task.input_dim = kTanhInputDim;
      task.feature_weights = Matrix(D, task.input_dim);
      task.feature_bias = Vector(D);
      for (int k = 0; k < D; ++k) {
        for (int j = 0; j < task.input_dim; ++j) task.feature_weights(k, j) = rng.next_normal();
        task.feature_bias(k) = rng.next_normal();
      }
      break;
    }
    case ModelKind::ShallowTanh: {
      task.input_dim = kTanhInputDim;
      const int per_unit = task.input_dim + 2;
      if ((D - 1) % per_unit != 0)
        throw std::invalid_argument("shallow-tanh needs D = " + std::to_string(per_unit) +
                                    "*width + 1; got D = " + std::to_string(D));
      task.hidden_width = (D - 1) / per_unit;
      break;
    }
  }

  task.inputs.reserve(N);
  for (int i = 0; i < N; ++i) task.inputs.push_back(rng.normal_vector(task.input_dim));

  // targets from a fixed random teacher of the same architecture
  Vector teacher = rng.normal_vector(D);
  task.targets = Vector(N);
  for (int i = 0; i < N; ++i) task.targets(i) = task.value(teacher, task.inputs[i]);
  return task;
}

MinimumPoint minimum_at(const RegressionTask& task, const Vector& x) {
  MinimumPoint m;
  m.x_star = x;
  m.residuals = task.residuals(x);
  m.S = task.gradient_matrix(x);
  m.G = m.S.transpose() * m.S;
  m.loss_value = m.residuals.squaredNorm() / (2.0 * task.sample_count);
  return m;
}

MinimumPoint find_minimum(const RegressionTask& task, const Vector& init, double tol,
                          const FindMinOptions& opts) {
  if (tol <= 0) throw std::invalid_argument("find_minimum: tol must be positive");
  if (init.size() != task.param_dim)
    throw std::invalid_argument("find_minimum: init has wrong dimension");

  Vector x = init;
  double loss = task.loss(x);
  long iters = 0;
  if (loss <= tol) {
    MinimumPoint m = minimum_at(task, x);
    m.iterations = 0;
    return m;
  }

  // gradient descent with backtracking, to get into the Gauss-Newton basin
  double step = opts.gd_step_init;
  for (long k = 0; k < opts.gd_steps && loss > tol; ++k, ++iters) {
    Vector g = task.loss_gradient(x);
    double gn = g.squaredNorm();
    if (gn == 0.0) break;
    double s = step;
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      Vector cand = x - s * g;
      double cl = task.loss(cand);
      if (cl < loss - 1e-4 * s * gn) {
        x = cand;
        loss = cl;
        step = s * 1.5;
        moved = true;
        break;
      }
      s *= 0.5;
    }
    if (!moved) break;
  }

  // Gauss-Newton on the residual vector: minimum-norm correction
  // dx = -S (S^T S)^{-1} r, halved until the loss decreases. Polishes well
  // past tol so the returned point sits on M to near machine precision.
  const double polish_floor = std::min(tol * 1e-6, 1e-24);
  double best_loss = loss;
  Vector best_x = x;
  for (long k = 0; k < opts.gn_steps && loss > polish_floor; ++k, ++iters) {
    Vector r = task.residuals(x);
    Matrix S = task.gradient_matrix(x);
    Matrix G = S.transpose() * S;
    Eigen::LDLT<Matrix> ldlt(G);
    if (ldlt.info() != Eigen::Success) break;
    Vector c = ldlt.solve(r);
    Vector dx = -(S * c);
    double scale = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      Vector cand = x + scale * dx;
      double cl = task.loss(cand);
      if (cl < loss) {
        x = cand;
        loss = cl;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved) break;
    if (loss < best_loss) {
      best_loss = loss;
      best_x = x;
    }
  }

  if (loss > tol) throw NonConvergence(best_loss, iters);
  MinimumPoint m = minimum_at(task, x);
  m.iterations = iters;
  return m;
}

ManifoldCheck check_hypothesis_manifold(const Matrix& S) {
  Eigen::JacobiSVD<Matrix> svd(S);
  ManifoldCheck c;
  c.max_singular_value = svd.singularValues()(0);
  c.min_singular_value = svd.singularValues()(svd.singularValues().size() - 1);
  c.pass = c.min_singular_value > kRankTolRel * c.max_singular_value;
  return c;
}

}  // namespace sgdstab

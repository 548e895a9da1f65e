#include "sgdstab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgdstab/cocycle.hpp"
#include "sgdstab/linalg.hpp"
#include "sgdstab/lyapunov.hpp"

namespace sgdstab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// shared GD/SGD driver; step_grad(x, n) returns the update direction for step n
template <typename StepGrad>
Trajectory run_dynamics(const RegressionTask& task, const Vector& x0, double eta, long horizon,
                        const SimOptions& opts, StepGrad step_grad) {
  if (horizon < 0) throw std::invalid_argument("run: horizon must be >= 0");
  Trajectory traj;
  Vector x = x0;
  double loss = task.loss(x);
  traj.points.push_back(x);
  traj.losses.push_back(loss);

  auto done_converged = [&](double l) { return opts.converge_loss > 0 && l < opts.converge_loss; };
  auto done_escaped = [&](const Vector& p) {
    if (p.norm() > opts.overflow_norm) return true;
    return opts.escape_radius > 0 && opts.reference.size() == p.size() &&
           (p - opts.reference).norm() > opts.escape_radius;
  };

  if (done_converged(loss)) {
    traj.termination = Termination::Converged;
    traj.final_loss = loss;
    return traj;
  }

  for (long n = 1; n <= horizon; ++n) {
    x -= eta * step_grad(x, n);
    loss = task.loss(x);
    traj.steps_taken = n;
    bool conv = done_converged(loss);
    bool esc = done_escaped(x);
    if (n % opts.stride == 0 || conv || esc || n == horizon) {
      traj.points.push_back(x);
      traj.losses.push_back(loss);
    }
    if (esc) {
      traj.termination = Termination::Escaped;
      traj.final_loss = loss;
      return traj;
    }
    if (conv) {
      traj.termination = Termination::Converged;
      traj.final_loss = loss;
      return traj;
    }
  }
  traj.termination = Termination::Horizon;
  traj.final_loss = loss;
  return traj;
}

}  // namespace

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::Escaped: return "escaped";
    case Termination::Horizon: return "horizon";
  }
  return "horizon";
}

Trajectory run_gd(const RegressionTask& task, const Vector& x0, double eta, long horizon,
                  const SimOptions& opts) {
  return run_dynamics(task, x0, eta, horizon, opts,
                      [&](const Vector& x, long) { return task.loss_gradient(x); });
}

Trajectory run_sgd(const RegressionTask& task, const Vector& x0, double eta, long horizon,
                   const SeedStream& stream, const SimOptions& opts) {
  const int n_samples = task.sample_count;
  return run_dynamics(task, x0, eta, horizon, opts, [&](const Vector& x, long n) {
    return task.individual_loss_gradient(x, stream.index_at(n, n_samples));
  });
}

double distance_to_manifold(const RegressionTask& task, const MinimumPoint& minimum,
                            const Vector& x) {
  if (task.kind == ModelKind::Linear || task.kind == ModelKind::RandomFeature) {
    // constant S: the zero-loss set is affine and the distance is exact
    Vector r = task.residuals(x);
    Eigen::LDLT<Matrix> ldlt(minimum.G);
    return (minimum.S * ldlt.solve(r)).norm();
  }
  Eigen::JacobiSVD<Matrix> svd(minimum.S);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  return std::sqrt(2.0 * task.loss(x)) / smin;
}

EscapeReport escape_experiment(const RegressionTask& task, const MinimumPoint& minimum,
                               const EscapeConfig& cfg) {
  if (!(cfg.init_radius < cfg.ball_radius))
    throw std::invalid_argument("escape_experiment: init_radius must be < ball_radius");
  if (minimum.loss_value > kManifoldTol)
    throw std::invalid_argument("escape_experiment: x_star is not on the manifold");

  const int D = task.param_dim;
  const int N = task.sample_count;
  const bool exact_dist =
      task.kind == ModelKind::Linear || task.kind == ModelKind::RandomFeature;
  Eigen::LDLT<Matrix> gram_ldlt(minimum.G);
  double smin = 0.0;
  if (!exact_dist) {
    Eigen::JacobiSVD<Matrix> svd(minimum.S);
    smin = svd.singularValues()(svd.singularValues().size() - 1);
  }

  enum class Outcome { Stay, Escape, Undecided };
  std::vector<Outcome> outcomes(cfg.trials);
  std::vector<double> slopes(cfg.trials, kNaN);

  parallel_for(cfg.trials, cfg.threads, [&](long t) {
    Rng rng(hash_combine(cfg.seed, hash_combine(0xba11ULL, static_cast<std::uint64_t>(t))));
    const Vector x0 = minimum.x_star + rng.ball_point(D, cfg.init_radius);
    const SeedStream stream = SeedStream::for_trial(cfg.seed, static_cast<std::uint64_t>(t));

    auto log_dist = [&](const Vector& p) {
      double dist;
      if (exact_dist) {
        Vector r = task.residuals(p);
        dist = (minimum.S * gram_ldlt.solve(r)).norm();
      } else {
        dist = std::sqrt(2.0 * task.loss(p)) / smin;
      }
      if (dist <= 0 || !std::isfinite(dist)) return kNaN;
      return std::log(dist);
    };

    Vector x = x0;
    Outcome outcome = Outcome::Undecided;
    for (long n = 1; n <= cfg.horizon; ++n) {
      int idx = stream.index_at(n, N);
      x -= cfg.eta * task.individual_loss_gradient(x, idx);
      double off = (x - minimum.x_star).norm();
      if (off > cfg.ball_radius || !std::isfinite(off)) {
        outcome = Outcome::Escape;
        break;
      }
      if (task.loss(x) < cfg.converge_loss) {
        outcome = Outcome::Stay;
        break;
      }
    }
    outcomes[t] = outcome;

    // fixed-length growth window, rerun from the same init and stream
    if (cfg.growth_horizon > cfg.growth_burn_in && cfg.growth_burn_in >= 0) {
      Vector y = x0;
      double ld_burn = cfg.growth_burn_in == 0 ? log_dist(y) : kNaN;
      for (long n = 1; n <= cfg.growth_horizon; ++n) {
        y -= cfg.eta * task.individual_loss_gradient(y, stream.index_at(n, N));
        if (n == cfg.growth_burn_in) ld_burn = log_dist(y);
      }
      double ld_end = log_dist(y);
      if (std::isfinite(ld_burn) && std::isfinite(ld_end))
        slopes[t] = (ld_end - ld_burn) / static_cast<double>(cfg.growth_horizon - cfg.growth_burn_in);
    }
  });

  EscapeReport rep;
  rep.trials = cfg.trials;
  rep.eta = cfg.eta;
  rep.init_radius = cfg.init_radius;
  rep.ball_radius = cfg.ball_radius;
  rep.horizon = cfg.horizon;
  rep.exact_distance = exact_dist;
  for (long t = 0; t < cfg.trials; ++t) {
    switch (outcomes[t]) {
      case Outcome::Stay: ++rep.stay_and_converge_count; break;
      case Outcome::Escape: ++rep.escape_count; break;
      case Outcome::Undecided: ++rep.undecided_count; break;
    }
  }
  long decided = rep.stay_and_converge_count + rep.escape_count;
  rep.stay_fraction = decided > 0 ? static_cast<double>(rep.stay_and_converge_count) / decided : 0.0;

  std::vector<double> valid;
  valid.reserve(cfg.trials);
  for (double s : slopes)
    if (std::isfinite(s)) valid.push_back(s);
  if (valid.size() >= 2) {
    auto [mean, se] = mean_and_stderr(valid);
    rep.empirical_growth_rate = mean;
    rep.growth_rate_std_error = se;
  } else {
    rep.empirical_growth_rate = kNaN;
    rep.growth_rate_std_error = kNaN;
  }
  return rep;
}

SweepResult eta_sweep(const RegressionTask& task, const MinimumPoint& minimum,
                      const std::vector<double>& eta_grid, const SweepConfig& cfg) {
  if (eta_grid.empty()) throw std::invalid_argument("eta_sweep: empty grid");

  auto evaluate = [&](double eta, bool refined) {
    SweepRow row;
    row.eta = eta;
    row.refined = refined;
    row.mu_value = mu(minimum.G, eta);
    FactorSet fs = make_factors(minimum.G, eta);
    LyapunovEstimate le = lambda_mc(fs, cfg.lambda_n, cfg.lambda_trials, cfg.seed,
                                    LyapMethod::McVector, cfg.threads);
    row.lambda = le.value;
    row.lambda_se = le.std_error;
    if (cfg.run_escape) {
      EscapeConfig ec = cfg.escape_template;
      ec.eta = eta;
      ec.threads = cfg.threads;
      EscapeReport er = escape_experiment(task, minimum, ec);
      long decided = er.stay_and_converge_count + er.escape_count;
      row.escape_fraction =
          decided > 0 ? static_cast<double>(er.escape_count) / decided : kNaN;
      row.growth_rate = er.empirical_growth_rate;
    }
    return row;
  };

  SweepResult result;
  std::vector<double> grid = eta_grid;
  std::sort(grid.begin(), grid.end());
  for (double eta : grid) result.rows.push_back(evaluate(eta, false));

  // refine each sign change of lambda by bisection
  const std::size_t grid_count = result.rows.size();
  for (std::size_t i = 0; i + 1 < grid_count; ++i) {
    double lo = result.rows[i].eta, hi = result.rows[i + 1].eta;
    double flo = result.rows[i].lambda, fhi = result.rows[i + 1].lambda;
    if (flo == 0.0 || fhi == 0.0) continue;
    if ((flo < 0) == (fhi < 0)) continue;
    double width = hi - lo;
    for (int it = 0; it < cfg.bisect_iters && (hi - lo) > cfg.bisect_rel_tol * width; ++it) {
      double mid = 0.5 * (lo + hi);
      SweepRow row = evaluate(mid, true);
      result.rows.push_back(row);
      if (row.lambda == 0.0 && row.lambda_se == 0.0) {
        // deterministic boundary hit exactly
        lo = hi = mid;
        break;
      }
      // near the crossing the estimate may be indistinguishable from zero;
      // stop rather than pretend to resolve the sign
      if (std::abs(row.lambda) <= 2.0 * row.lambda_se) break;
      if ((row.lambda < 0) == (flo < 0)) {
        lo = mid;
        flo = row.lambda;
      } else {
        hi = mid;
        fhi = row.lambda;
      }
    }
    result.crossings.emplace_back(lo, hi);
  }
  return result;
}

}  // namespace sgdstab

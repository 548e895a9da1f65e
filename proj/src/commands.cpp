#include "sgdstab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sgdstab/linalg.hpp"

namespace sgdstab {

namespace {

namespace fs = std::filesystem;

struct Prepared {
  RegressionTask task;
  MinimumPoint minimum;
};

Prepared prepare(const ExperimentConfig& cfg) {
  Prepared p;
  p.task = build_task(cfg.kind, cfg.D, cfg.N, cfg.task_seed);
  Rng rng(hash_combine(cfg.task_seed, 0x1417ULL));
  Vector init = rng.normal_vector(cfg.D);
  p.minimum = find_minimum(p.task, init, kManifoldTol);
  return p;
}

void stamp(Json& j, const ExperimentConfig& cfg) {
  j["config_hash"] = config_hash(cfg);
  j["tool_version"] = kToolVersion;
  j["config"] = config_to_json(cfg);
}

void write_json(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

std::vector<double> default_p_grid() {
  std::vector<double> ps;
  for (double p = 0.05; p <= 1.0 + 1e-12; p += 0.05) ps.push_back(p);
  return ps;
}

}  // namespace

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  Json j = Json::parse(in);
  return config_from_json(j);
}

int cmd_analyze(const ExperimentConfig& cfg, bool verbose) {
  validate(cfg);
  Prepared p = prepare(cfg);
  const std::uint64_t seed = cfg.estimator_seed;

  Json out;
  stamp(out, cfg);
  out["task"] = task_to_json(p.task);
  out["minimum"] = minimum_to_json(p.minimum);

  ManifoldCheck mc = check_hypothesis_manifold(p.minimum.S);
  out["hypothesis_manifold"] = {{"pass", mc.pass},
                                {"min_singular_value", mc.min_singular_value},
                                {"max_singular_value", mc.max_singular_value}};

  StabilityEquivalence eq = mu_stability_equivalence(p.minimum.G, cfg.eta);
  out["mu"] = {{"value", eq.mu_value},
               {"mu_negative", eq.mu_negative},
               {"hessian_norm", eq.hessian_norm},
               {"hessian_norm_lt_2_over_eta", eq.hessian_norm_lt_2_over_eta}};

  FactorSet factors = make_factors(p.minimum.G, cfg.eta);
  {
    Json fj;
    fj["eta"] = cfg.eta;
    fj["K1"] = factors.k1;
    fj["K2"] = factors.k2;
    Json mats = Json::array();
    for (const Matrix& mat : factors.sgd_factors) {
      std::vector<double> row_major;
      for (Eigen::Index r = 0; r < mat.rows(); ++r)
        for (Eigen::Index c = 0; c < mat.cols(); ++c) row_major.push_back(mat(r, c));
      mats.push_back(row_major);
    }
    fj["sgd_factors"] = mats;
    std::vector<double> gd;
    for (Eigen::Index r = 0; r < factors.gd_factor.rows(); ++r)
      for (Eigen::Index c = 0; c < factors.gd_factor.cols(); ++c)
        gd.push_back(factors.gd_factor(r, c));
    fj["gd_factor"] = gd;
    out["factors"] = fj;
  }

  Json estimates = Json::array();
  CsvWriter csv({"quantity", "value", "std_error", "n", "trials", "method", "seed",
                 "config_hash", "tool_version"});
  const std::string hash = config_hash(cfg);
  auto push_estimate = [&](const std::string& name, const LyapunovEstimate& est) {
    estimates.push_back(estimate_to_json(name, est, seed));
    csv.add_row({name, est.minus_infinity ? "-inf" : CsvWriter::num(est.value),
                 CsvWriter::num(est.std_error), CsvWriter::num((long long)est.n_steps),
                 CsvWriter::num((long long)est.trials), to_string(est.method),
                 std::to_string(seed), hash, kToolVersion});
  };

  LyapunovEstimate mc_norm =
      lambda_mc(factors, cfg.n_steps, cfg.trials, seed, LyapMethod::McNorm, cfg.threads);
  push_estimate("lambda", mc_norm);
  LyapunovEstimate mc_vec =
      lambda_mc(factors, cfg.n_steps, cfg.trials, seed, LyapMethod::McVector, cfg.threads);
  push_estimate("lambda", mc_vec);
  if (cfg.with_exact) {
    // largest n whose enumeration fits the budget
    int n_exact = 0;
    long long total = 1;
    while (n_exact < cfg.n_steps) {
      if (total > cfg.enum_budget / cfg.N) break;
      total *= cfg.N;
      ++n_exact;
    }
    if (n_exact >= 1) {
      LyapunovEstimate ex;
      ex.value = lambda_exact(factors, n_exact, cfg.enum_budget);
      ex.method = LyapMethod::ExactEnum;
      ex.n_steps = n_exact;
      push_estimate("lambda", ex);
    }
  }

  if (cfg.with_spectrum) {
    SpectrumEstimate spec =
        oseledets_spectrum(factors, cfg.n_steps, cfg.trials, seed, cfg.threads);
    out["spectrum"] = spectrum_to_json(spec);
    for (std::size_t i = 0; i < spec.exponents.size(); ++i)
      csv.add_row({"lambda_" + std::to_string(i + 1), CsvWriter::num(spec.exponents[i]),
                   CsvWriter::num(spec.std_errors[i]), CsvWriter::num((long long)spec.n_steps),
                   CsvWriter::num((long long)spec.trials), "qr-spectrum", std::to_string(seed),
                   hash, kToolVersion});
  }

  if (cfg.with_moments) {
    Json moments = Json::array();
    long long total = 1;
    bool fits = true;
    for (int i = 0; i < cfg.n_steps && fits; ++i) {
      if (total > cfg.enum_budget / cfg.N) fits = false;
      else total *= cfg.N;
    }
    MomentMode mode = fits && cfg.with_exact ? MomentMode::ExactEnum : MomentMode::Mc;
    int n_mom = cfg.n_steps;
    if (mode == MomentMode::ExactEnum) {
      n_mom = 0;
      long long t2 = 1;
      while (n_mom < cfg.n_steps && t2 <= cfg.enum_budget / cfg.N) {
        t2 *= cfg.N;
        ++n_mom;
      }
    }
    for (double pval : cfg.moment_p_grid) {
      MomentEstimate me =
          moment_lyapunov(factors, pval, n_mom, mode, cfg.trials, seed, cfg.enum_budget);
      moments.push_back(moment_to_json(me, seed));
      csv.add_row({"Lambda_p(p=" + CsvWriter::num(pval) + ")", CsvWriter::num(me.value),
                   CsvWriter::num(me.std_error), CsvWriter::num((long long)me.n_steps),
                   CsvWriter::num((long long)me.trials),
                   me.mode == MomentMode::ExactEnum ? "exact-enum" : "mc", std::to_string(seed),
                   hash, kToolVersion});
    }
    out["moments"] = moments;
    SecondMomentVerdict v =
        second_moment_verdict(factors, n_mom, cfg.trials, seed, cfg.enum_budget);
    out["second_moment"] = {
        {"verdict", to_string(v.kind)},
        {"lambda2", v.lambda2.value},
        {"lambda2_std_error", v.lambda2.std_error},
        {"lambda", v.lambda.value},
        {"lambda_std_error", v.lambda.std_error},
        {"as_stable_but_moment_unstable", v.as_stable_but_moment_unstable}};
  }

  if (cfg.with_regularity) {
    RegularityReport rep = check_regular(p.minimum.G, cfg.eta);
    out["regularity"] = regularity_to_json(rep);
    out["contraction_witness"] = witness_to_json(contraction_witness(factors));
    if (cfg.N >= 2)
      out["irreducibility_probe"] = probe_to_json(irreducibility_probe(factors, 256, seed));
  }

  out["estimates"] = estimates;
  write_json(out_path(cfg, "analysis.json"), out);
  csv.write(out_path(cfg, "analysis.csv"));
  if (verbose) std::cout << "analyze: wrote " << out_path(cfg, "analysis.json") << "\n";
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, bool verbose) {
  validate(cfg);
  if (cfg.eta_grid.empty()) throw std::invalid_argument("sweep: eta_grid must be nonempty");
  Prepared p = prepare(cfg);

  SweepConfig sc;
  sc.lambda_n = cfg.n_steps;
  sc.lambda_trials = cfg.trials;
  sc.seed = cfg.estimator_seed;
  sc.threads = cfg.threads;
  sc.run_escape = cfg.sweep_escape;
  sc.escape_template.init_radius = cfg.init_radius;
  sc.escape_template.ball_radius = cfg.ball_radius;
  sc.escape_template.horizon = cfg.horizon;
  sc.escape_template.trials = cfg.escape_trials;
  sc.escape_template.seed = cfg.estimator_seed;
  sc.escape_template.converge_loss = cfg.converge_loss;

  SweepResult res = eta_sweep(p.task, p.minimum, cfg.eta_grid, sc);

  const std::string hash = config_hash(cfg);
  CsvWriter csv({"eta", "mu", "lambda", "lambda_se", "escape_fraction", "growth_rate",
                 "refined", "config_hash", "tool_version"});
  for (const SweepRow& row : res.rows)
    csv.add_row({CsvWriter::num(row.eta), CsvWriter::num(row.mu_value),
                 CsvWriter::num(row.lambda), CsvWriter::num(row.lambda_se),
                 CsvWriter::num(row.escape_fraction), CsvWriter::num(row.growth_rate),
                 row.refined ? "1" : "0", hash, kToolVersion});
  csv.write(out_path(cfg, "sweep.csv"));

  Json out;
  stamp(out, cfg);
  Json crossings = Json::array();
  for (auto [lo, hi] : res.crossings) crossings.push_back({{"eta_low", lo}, {"eta_high", hi}});
  out["crossings"] = crossings;
  out["rows"] = static_cast<long long>(res.rows.size());
  write_json(out_path(cfg, "sweep.json"), out);
  if (verbose) std::cout << "sweep: " << res.rows.size() << " rows, " << res.crossings.size()
                         << " crossing(s)\n";
  return kExitOk;
}

int cmd_certify(const ExperimentConfig& cfg, bool verbose) {
  validate(cfg);
  if (cfg.N != 2 && cfg.N != 3) {
    std::cerr << "certify: projective certification supports N in {2,3}; got N = " << cfg.N
              << "\n";
    return kExitUnsupported;
  }
  Prepared p = prepare(cfg);
  FactorSet factors = make_factors(p.minimum.G, cfg.eta);
  SphereGrid grid = make_sphere_grid(cfg.N, cfg.grid_resolution);

  LyapunovEstimate lam = lambda_mc(factors, cfg.n_steps, cfg.trials, cfg.estimator_seed,
                                   LyapMethod::McVector, cfg.threads);

  DriftOptions opts;
  opts.lambda_estimate = lam.value;
  opts.seed = cfg.estimator_seed;
  std::vector<double> p_grid = cfg.cert_p_grid.empty() ? default_p_grid() : cfg.cert_p_grid;
  DriftScan scan = build_drift_certificate(grid, factors, p_grid, opts);

  // r(q) around zero for the derivative check: d/dq log r|_0 = lambda
  double r_plus = leading_eigen(grid, factors, cfg.q_eps).r;
  double r_minus = leading_eigen(grid, factors, -cfg.q_eps).r;
  double slope = (std::log(r_plus) - std::log(r_minus)) / (2.0 * cfg.q_eps);

  const std::string hash = config_hash(cfg);
  CsvWriter csv({"q", "r_q", "config_hash", "tool_version"});
  std::vector<std::pair<double, double>> curve = scan.r_curve;
  curve.emplace_back(-cfg.q_eps, r_minus);
  curve.emplace_back(0.0, leading_eigen(grid, factors, 0.0).r);
  curve.emplace_back(cfg.q_eps, r_plus);
  std::sort(curve.begin(), curve.end());
  curve.erase(std::unique(curve.begin(), curve.end(),
                          [](const auto& a, const auto& b) { return a.first == b.first; }),
              curve.end());
  for (auto [q, r] : curve)
    csv.add_row({CsvWriter::num(q), CsvWriter::num(r), hash, kToolVersion});
  csv.write(out_path(cfg, "r_curve.csv"));

  Json out;
  stamp(out, cfg);
  out["lambda_estimate"] = estimate_to_json("lambda", lam, cfg.estimator_seed);
  out["certificate"] = certificate_to_json(scan);
  out["r_slope_at_zero"] = slope;
  out["resolution"] = grid.resolution();
  write_json(out_path(cfg, "certificate.json"), out);
  if (verbose)
    std::cout << "certify: " << (scan.certificate ? "certificate found" : scan.reason) << "\n";
  return kExitOk;
}

int cmd_simulate(const ExperimentConfig& cfg, bool verbose) {
  validate(cfg);
  Prepared p = prepare(cfg);

  EscapeConfig ec;
  ec.eta = cfg.eta;
  ec.init_radius = cfg.init_radius;
  ec.ball_radius = cfg.ball_radius;
  ec.horizon = cfg.horizon;
  ec.trials = cfg.escape_trials;
  ec.seed = cfg.estimator_seed;
  ec.converge_loss = cfg.converge_loss;
  ec.threads = cfg.threads;
  EscapeReport rep = escape_experiment(p.task, p.minimum, ec);

  Json out;
  stamp(out, cfg);
  out["escape"] = escape_to_json(rep);
  write_json(out_path(cfg, "escape.json"), out);

  const std::string hash = config_hash(cfg);
  CsvWriter csv({"class", "count", "fraction_of_decided", "config_hash", "tool_version"});
  long decided = rep.stay_and_converge_count + rep.escape_count;
  auto frac = [&](long c) {
    return decided > 0 ? CsvWriter::num(static_cast<double>(c) / decided) : "";
  };
  csv.add_row({"stay_and_converge", CsvWriter::num((long long)rep.stay_and_converge_count),
               frac(rep.stay_and_converge_count), hash, kToolVersion});
  csv.add_row({"escaped", CsvWriter::num((long long)rep.escape_count), frac(rep.escape_count),
               hash, kToolVersion});
  csv.add_row({"undecided", CsvWriter::num((long long)rep.undecided_count), "", hash,
               kToolVersion});
  csv.write(out_path(cfg, "escape.csv"));

  if (cfg.dump_trajectories) {
    // strided float64 dump of the first few trials, with a JSON side header
    const int n_dump = static_cast<int>(std::min<long>(8, cfg.escape_trials));
    std::ofstream bin(out_path(cfg, "trajectories.bin"), std::ios::binary);
    Json header;
    header["dtype"] = "float64";
    header["point_dim"] = cfg.D;
    Json counts = Json::array();
    for (int t = 0; t < n_dump; ++t) {
      Rng rng(hash_combine(cfg.estimator_seed,
                            hash_combine(0xba11ULL, static_cast<std::uint64_t>(t))));
      Vector x0 = p.minimum.x_star + rng.ball_point(cfg.D, cfg.init_radius);
      SimOptions so;
      so.converge_loss = cfg.converge_loss;
      so.escape_radius = cfg.ball_radius;
      so.reference = p.minimum.x_star;
      Trajectory traj = run_sgd(p.task, x0, cfg.eta, cfg.horizon,
                                SeedStream::for_trial(cfg.estimator_seed, t), so);
      for (const Vector& pt : traj.points)
        bin.write(reinterpret_cast<const char*>(pt.data()),
                  static_cast<std::streamsize>(sizeof(double) * pt.size()));
      counts.push_back(traj.points.size());
    }
    header["points_per_trial"] = counts;
    header["stride"] = SimOptions{}.stride;
    stamp(header, cfg);
    write_json(out_path(cfg, "trajectories.json"), header);
  }

  if (verbose)
    std::cout << "simulate: stay=" << rep.stay_and_converge_count
              << " escape=" << rep.escape_count << " undecided=" << rep.undecided_count << "\n";
  return kExitOk;
}

}  // namespace sgdstab

#include "sgdstab/jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace sgdstab {

namespace {

std::vector<double> to_vec(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> to_row_major(const Matrix& m) {
  std::vector<double> out;
  out.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

double json_num(const Json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig cfg;
  if (j.contains("task")) {
    const Json& t = j.at("task");
    if (t.contains("kind")) cfg.kind = model_kind_from_string(t.at("kind").get<std::string>());
    cfg.D = static_cast<int>(json_num(t, "D", cfg.D));
    cfg.N = static_cast<int>(json_num(t, "N", cfg.N));
    if (t.contains("seed")) cfg.task_seed = t.at("seed").get<std::uint64_t>();
  }
  if (j.contains("eta")) cfg.eta = j.at("eta").get<double>();
  if (j.contains("eta_grid")) cfg.eta_grid = j.at("eta_grid").get<std::vector<double>>();
  if (j.contains("estimators")) {
    const Json& e = j.at("estimators");
    cfg.n_steps = static_cast<int>(json_num(e, "n", cfg.n_steps));
    cfg.trials = static_cast<long>(json_num(e, "trials", static_cast<double>(cfg.trials)));
    if (e.contains("seed")) cfg.estimator_seed = e.at("seed").get<std::uint64_t>();
    if (e.contains("enum_budget")) cfg.enum_budget = e.at("enum_budget").get<long long>();
    if (e.contains("moment_p_grid"))
      cfg.moment_p_grid = e.at("moment_p_grid").get<std::vector<double>>();
    if (e.contains("with_exact")) cfg.with_exact = e.at("with_exact").get<bool>();
    if (e.contains("with_spectrum")) cfg.with_spectrum = e.at("with_spectrum").get<bool>();
    if (e.contains("with_moments")) cfg.with_moments = e.at("with_moments").get<bool>();
    if (e.contains("with_regularity")) cfg.with_regularity = e.at("with_regularity").get<bool>();
  }
  if (j.contains("escape")) {
    const Json& e = j.at("escape");
    cfg.init_radius = json_num(e, "init_radius", cfg.init_radius);
    cfg.ball_radius = json_num(e, "ball_radius", cfg.ball_radius);
    cfg.horizon = static_cast<long>(json_num(e, "horizon", static_cast<double>(cfg.horizon)));
    cfg.escape_trials =
        static_cast<long>(json_num(e, "trials", static_cast<double>(cfg.escape_trials)));
    cfg.converge_loss = json_num(e, "converge_loss", cfg.converge_loss);
    if (e.contains("dump_trajectories"))
      cfg.dump_trajectories = e.at("dump_trajectories").get<bool>();
    if (e.contains("sweep_escape")) cfg.sweep_escape = e.at("sweep_escape").get<bool>();
  }
  if (j.contains("certify")) {
    const Json& c = j.at("certify");
    cfg.grid_resolution = static_cast<int>(json_num(c, "resolution", cfg.grid_resolution));
    if (c.contains("p_grid")) cfg.cert_p_grid = c.at("p_grid").get<std::vector<double>>();
    cfg.q_eps = json_num(c, "q_eps", cfg.q_eps);
  }
  if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  return cfg;
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["task"] = {{"kind", to_string(cfg.kind)}, {"D", cfg.D}, {"N", cfg.N}, {"seed", cfg.task_seed}};
  j["eta"] = cfg.eta;
  if (!cfg.eta_grid.empty()) j["eta_grid"] = cfg.eta_grid;
  j["estimators"] = {{"n", cfg.n_steps},
                     {"trials", cfg.trials},
                     {"seed", cfg.estimator_seed},
                     {"enum_budget", cfg.enum_budget},
                     {"moment_p_grid", cfg.moment_p_grid},
                     {"with_exact", cfg.with_exact},
                     {"with_spectrum", cfg.with_spectrum},
                     {"with_moments", cfg.with_moments},
                     {"with_regularity", cfg.with_regularity}};
  j["escape"] = {{"init_radius", cfg.init_radius},
                 {"ball_radius", cfg.ball_radius},
                 {"horizon", cfg.horizon},
                 {"trials", cfg.escape_trials},
                 {"converge_loss", cfg.converge_loss},
                 {"dump_trajectories", cfg.dump_trajectories},
                 {"sweep_escape", cfg.sweep_escape}};
  j["certify"] = {{"resolution", cfg.grid_resolution}, {"q_eps", cfg.q_eps}};
  if (!cfg.cert_p_grid.empty()) j["certify"]["p_grid"] = cfg.cert_p_grid;
  j["out"] = cfg.out_dir;
  j["threads"] = cfg.threads;
  return j;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.N >= cfg.D)
    throw std::invalid_argument("config: task requires N < D (overparameterized)");
  if (cfg.N < 1 || cfg.D < 1) throw std::invalid_argument("config: D and N must be positive");
  if (cfg.eta <= 0) throw std::invalid_argument("config: eta must be positive");
  for (double e : cfg.eta_grid)
    if (e <= 0) throw std::invalid_argument("config: eta_grid entries must be positive");
  if (cfg.n_steps < 1 || cfg.trials < 2)
    throw std::invalid_argument("config: estimator budgets must be positive (n >= 1, trials >= 2)");
  if (cfg.threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (!(cfg.init_radius < cfg.ball_radius))
    throw std::invalid_argument("config: init_radius must be smaller than ball_radius");
  if (!cfg.with_exact && !cfg.with_spectrum && !cfg.with_moments && !cfg.with_regularity)
    throw std::invalid_argument("config: empty experiment selection");
}

std::string config_hash(const ExperimentConfig& cfg) {
  // output location and worker caps do not identify the experiment
  Json canonical = config_to_json(cfg);
  canonical.erase("out");
  canonical.erase("threads");
  std::string canon = canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

Json task_to_json(const RegressionTask& task) {
  Json j;
  j["kind"] = to_string(task.kind);
  j["D"] = task.param_dim;
  j["N"] = task.sample_count;
  j["d"] = task.input_dim;
  j["seed"] = task.seed;
  Json inputs = Json::array();
  for (const Vector& y : task.inputs) inputs.push_back(to_vec(y));
  j["inputs"] = inputs;
  j["targets"] = to_vec(task.targets);
  return j;
}

Json minimum_to_json(const MinimumPoint& m) {
  Json j;
  j["x_star"] = to_vec(m.x_star);
  j["residuals"] = to_vec(m.residuals);
  j["loss"] = m.loss_value;
  j["S"] = {{"rows", m.S.rows()}, {"cols", m.S.cols()}, {"data", to_row_major(m.S)}};
  j["G"] = {{"rows", m.G.rows()}, {"cols", m.G.cols()}, {"data", to_row_major(m.G)}};
  j["iterations"] = m.iterations;
  return j;
}

Json estimate_to_json(const std::string& quantity, const LyapunovEstimate& est,
                      std::uint64_t seed) {
  Json j;
  j["quantity"] = quantity;
  j["value"] = est.minus_infinity ? Json("-inf") : Json(est.value);
  j["std_error"] = est.std_error;
  j["n"] = est.n_steps;
  j["trials"] = est.trials;
  j["method"] = to_string(est.method);
  j["seed"] = seed;
  return j;
}

Json moment_to_json(const MomentEstimate& est, std::uint64_t seed) {
  Json j;
  j["quantity"] = "moment_lyapunov";
  j["p"] = est.p;
  if (std::isinf(est.value))
    j["value"] = est.value > 0 ? "inf" : "-inf";
  else
    j["value"] = est.value;
  j["std_error"] = est.std_error;
  j["n"] = est.n_steps;
  j["trials"] = est.trials;
  j["method"] = est.mode == MomentMode::ExactEnum ? "exact-enum" : "mc";
  j["seed"] = seed;
  return j;
}

Json spectrum_to_json(const SpectrumEstimate& est) {
  Json j;
  j["quantity"] = "oseledets_spectrum";
  Json vals = Json::array();
  for (double v : est.exponents) {
    if (std::isinf(v))
      vals.push_back(v > 0 ? "inf" : "-inf");
    else
      vals.push_back(v);
  }
  j["exponents"] = vals;
  j["std_errors"] = est.std_errors;
  j["n"] = est.n_steps;
  j["trials"] = est.trials;
  return j;
}

Json regularity_to_json(const RegularityReport& rep) {
  Json j;
  j["diag_ok"] = rep.diag_ok;
  j["connectivity_ok"] = rep.connectivity_ok;
  j["regular"] = rep.regular();
  j["margin_inv_eta"] = rep.margin_inv_eta;
  j["margin_two_eta"] = rep.margin_two_eta;
  // 1-based sample indices in the serialized partition
  Json comps = Json::array();
  for (const auto& block : rep.components) {
    std::vector<int> ids;
    for (int i : block) ids.push_back(i + 1);
    comps.push_back(ids);
  }
  j["components"] = comps;
  j["edge_margin"] = rep.edge_margin;
  j["zero_tol"] = rep.zero_tol;
  return j;
}

Json witness_to_json(const std::optional<ContractionWitness>& w) {
  Json j;
  if (!w.has_value()) {
    j["found"] = false;
    return j;
  }
  j["found"] = true;
  j["factor_index"] = w->factor_index;
  j["rank_gap"] = w->rank_gap;
  j["iterations"] = w->iterations;
  j["limit"] = to_row_major(w->limit);
  return j;
}

Json probe_to_json(const IrreducibilityProbe& p) {
  Json j;
  j["note"] = "heuristic evidence only; strong irreducibility is not machine-decidable";
  j["min_distinct_per_dim"] = p.min_distinct_per_dim;
  j["saturation_threshold"] = p.saturation_threshold;
  j["saturated_all_dims"] = p.saturated_all_dims;
  return j;
}

Json escape_to_json(const EscapeReport& rep) {
  Json j;
  j["trials"] = rep.trials;
  j["eta"] = rep.eta;
  j["init_radius"] = rep.init_radius;
  j["ball_radius"] = rep.ball_radius;
  j["horizon"] = rep.horizon;
  j["stay_and_converge_count"] = rep.stay_and_converge_count;
  j["escape_count"] = rep.escape_count;
  j["undecided_count"] = rep.undecided_count;
  j["stay_fraction"] = rep.stay_fraction;
  j["empirical_growth_rate"] = rep.empirical_growth_rate;
  j["growth_rate_std_error"] = rep.growth_rate_std_error;
  j["exact_distance"] = rep.exact_distance;
  j["init_measure"] = "uniform-ball (localized; not full Lebesgue support)";
  return j;
}

Json certificate_to_json(const DriftScan& scan) {
  Json j;
  Json curve = Json::array();
  for (auto [q, r] : scan.r_curve) curve.push_back({{"q", q}, {"r", r}});
  j["r_curve"] = curve;
  if (scan.certificate.has_value()) {
    const DriftCertificate& c = *scan.certificate;
    j["certified"] = true;
    j["p"] = c.p;
    j["gamma"] = c.gamma;
    j["max_relative_drift_error"] = c.max_relative_drift_error;
    j["C_minus"] = c.c_minus;
    j["C_plus"] = c.c_plus;
    j["resolution"] = c.resolution;
    j["f_star"] = c.f_star;
  } else {
    j["certified"] = false;
    j["reason"] = scan.reason;
  }
  return j;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

namespace {
std::string csv_field(const std::string& s) {
  bool quote = s.find_first_of(",\"\r\n") != std::string::npos;
  if (!quote) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}
}  // namespace

void CsvWriter::add_row(const std::vector<std::string>& fields) {
  if (fields.size() != header_.size())
    throw std::invalid_argument("CsvWriter: row width does not match header");
  rows_.push_back(fields);
}

void CsvWriter::write(const std::string& path) const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out += ',';
    out += csv_field(header_[i]);
  }
  out += "\r\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_field(row[i]);
    }
    out += "\r\n";
  }
  write_text_file(path, out);
}

std::string CsvWriter::num(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

std::string CsvWriter::num(long long v) { return std::to_string(v); }

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << contents;
}

}  // namespace sgdstab

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <thread>

#include "sta/ensembles.hpp"
#include "sta/foobi.hpp"
#include "sta/hmm.hpp"
#include "sta/io.hpp"
#include "sta/subspace_recovery.hpp"

namespace sta {

// One row per (trial, metric). Wall time is kept out of the CSV so that
// re-runs with the same master seed are byte-identical; it is reported in
// the JSON summary instead.
struct ResultRow {
  std::string kind;
  std::int64_t trial_id = 0;
  std::uint64_t seed = 0;
  std::string params;  // "k=v k=v" echo of the trial parameters
  std::string metric;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

inline const char* kCsvHeader = "kind,trial_id,seed,params,metric,value,threshold,pass";

inline std::string csv_line(const ResultRow& r) {
  std::ostringstream out;
  out << r.kind << ',' << r.trial_id << ',' << r.seed << ',' << r.params << ',' << r.metric << ','
      << format_double(r.value) << ',' << format_double(r.threshold) << ',' << (r.pass ? 1 : 0);
  return out.str();
}

// Wilson score interval for a binomial proportion at z = 1.96.
struct WilsonInterval {
  double lo = 0.0, hi = 1.0;
};

inline WilsonInterval wilson_interval(std::int64_t successes, std::int64_t total) {
  if (total <= 0) return {};
  const double z = 1.96, z2 = z * z;
  const double n = static_cast<double>(total);
  const double p = static_cast<double>(successes) / n;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = (z / denom) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// Deterministic trial fan-out: trial i always runs with seed
// derive(master, i) and the result lands in slot i, so the merged output is
// independent of thread count and schedule.
inline std::vector<std::vector<ResultRow>> run_trials(
    std::int64_t trials, std::uint64_t master_seed, int jobs,
    const std::function<std::vector<ResultRow>(std::int64_t, std::uint64_t)>& trial_fn) {
  std::vector<std::vector<ResultRow>> slots(trials);
  if (jobs < 1) jobs = 1;
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (int t = 0; t < jobs; ++t)
    workers.emplace_back([&, t]() {
      try {
        for (std::int64_t i = next.fetch_add(1); i < trials; i = next.fetch_add(1))
          slots[i] = trial_fn(i, Rng::derive(master_seed, static_cast<std::uint64_t>(i)));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return slots;
}

// sigma_k trials over the smoothed column-polynomial / monomial / projection
// ensembles. variant selects the matrix family; base vectors are identical
// copies when adversarial=1 (the worst case the smoothing must overcome).
inline std::vector<ResultRow> ensemble_trial(const Config& cfg, std::int64_t trial,
                                             std::uint64_t seed) {
  const int n = static_cast<int>(cfg.get_int("n", 8));
  const int ell = static_cast<int>(cfg.get_int("ell", 2));
  const double rho = cfg.get_double("rho", 0.1);
  const std::string variant = cfg.get_string("variant", "column_poly");
  const bool adversarial = cfg.get_int("adversarial", 1) != 0;
  Rng rng(Rng::derive(seed, 0x5eedbeef));

  std::vector<ResultRow> rows;
  ResultRow row;
  row.kind = "ensemble";
  row.trial_id = trial;
  row.seed = seed;

  if (variant == "column_poly") {
    const int k = static_cast<int>(cfg.get_int("k", 30));
    const std::int64_t D = sym_dim(n, ell);
    CoefficientMatrix U;
    U.n = n;
    U.ell = ell;
    U.entries = MatrixXd::Identity(D, D);
    std::vector<VectorXd> base;
    VectorXd shared = gaussian_vector(rng, n, 1.0);
    for (int i = 0; i < k; ++i) base.push_back(adversarial ? shared : gaussian_vector(rng, n, 1.0));
    const auto rep = trial_column_poly(U, base, {rho, n, seed}, cfg.get_double("c", 1e-3),
                                       cfg.get_double("delta", 0.1));
    row.params = rep.descriptor + " rho=" + format_double(rho);
    row.metric = "sigma_k";
    row.value = rep.sigma_observed;
    row.threshold = rep.threshold;
    row.pass = rep.pass;
  } else if (variant == "monomial") {
    const int k = static_cast<int>(cfg.get_int("k", 6));
    const int R = static_cast<int>(cfg.get_int("R", 10));
    MonomialSpec spec;
    spec.k = k;
    spec.ell = ell;
    for (int c = 0; c < R; ++c) {
      MultiIndex col(ell);
      for (int i = 0; i < ell; ++i) col[i] = rng.uniform_int(k);
      spec.columns.push_back(col);
    }
    std::sort(spec.columns.begin(), spec.columns.end());
    spec.columns.erase(std::unique(spec.columns.begin(), spec.columns.end()), spec.columns.end());
    std::vector<VectorXd> base;
    for (int i = 0; i < k; ++i) base.push_back(gaussian_vector(rng, n, 1.0));
    const auto rep = trial_monomial(spec, base, {rho, n, seed}, cfg.get_double("c", 1e-3));
    row.params = rep.descriptor + " rho=" + format_double(rho);
    row.metric = "sigma_R";
    row.value = rep.sigma_observed;
    row.threshold = rep.threshold;
    row.pass = rep.pass;
  } else if (variant == "sym_projection") {
    const int dim_s = static_cast<int>(cfg.get_int("dim_s", 4));
    const std::int64_t full = int_pow(n, ell);
    MatrixXd raw(full, dim_s);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = rng.gaussian();
    const Subspace S = Subspace::span_of(raw);
    const VectorXd x = gaussian_vector(rng, n, 1.0);
    const auto rep = trial_sym_projection(x, S, ell, {rho, n, seed}, cfg.get_double("c", 1e-2));
    row.params = rep.descriptor + " rho=" + format_double(rho);
    row.metric = "proj_orth";
    row.value = rep.sigma_observed;
    row.threshold = rep.threshold;
    row.pass = rep.pass;
  } else {
    throw std::runtime_error("ensemble: unknown variant '" + variant + "'");
  }
  rows.push_back(std::move(row));
  return rows;
}

inline std::vector<ResultRow> subspace_trial(const Config& cfg, std::int64_t trial,
                                             std::uint64_t seed) {
  const int n = static_cast<int>(cfg.get_int("n", 8));
  const int d = static_cast<int>(cfg.get_int("d", 4));
  const int m = static_cast<int>(cfg.get_int("m", 600));
  const double alpha = cfg.get_double("alpha", 0.35);
  const double rho = cfg.get_double("rho", 0.1);
  const double eps0 = cfg.get_double("eps0", 0.0);
  RecoveryParams params;
  params.ell = static_cast<int>(cfg.get_int("ell", 2));
  params.rho = rho;
  const double tol = cfg.get_double("sin_theta_tol", 1e-6);

  ResultRow row;
  row.kind = "subspace";
  row.trial_id = trial;
  row.seed = seed;
  const std::string base_params = "n=" + std::to_string(n) + " d=" + std::to_string(d) +
                                  " m=" + std::to_string(m) + " alpha=" + format_double(alpha) +
                                  " rho=" + format_double(rho) + " eps0=" + format_double(eps0);
  std::vector<ResultRow> rows;
  try {
    const auto inst = generate_instance(n, d, m, alpha, rho, eps0, seed);
    const auto res = recover(inst.points, params, d);
    row.params = base_params;
    row.metric = "sin_theta";
    row.value = evaluate(inst.T, res.T_hat);
    row.threshold = tol;
    row.pass = row.value <= tol;
    rows.push_back(row);
    int outliers = 0;
    for (int idx : res.selected)
      if (!inst.labels[idx]) ++outliers;
    row.metric = "outliers_selected";
    row.value = outliers;
    row.threshold = 0.0;
    row.pass = outliers == 0;
    rows.push_back(row);
  } catch (const RecoveryError& e) {
    row.params = base_params + " error=" + e.what();
    row.metric = "selected";
    row.value = e.selected;
    row.threshold = 0.0;
    row.pass = false;
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<ResultRow> foobi_trial(const Config& cfg, std::int64_t trial,
                                          std::uint64_t seed) {
  const int n = static_cast<int>(cfg.get_int("n", 4));
  const int ell = static_cast<int>(cfg.get_int("ell", 2));
  const int R = static_cast<int>(cfg.get_int("R", 5));
  const double noise = cfg.get_double("noise", 0.0);
  const double tol = cfg.get_double("error_tol", 1e-6);
  Rng rng(Rng::derive(seed, 0xf00b1));

  MatrixXd A(n, R);
  for (int j = 0; j < R; ++j) {
    VectorXd v = gaussian_vector(rng, n, 1.0);
    A.col(j) = v / v.norm();
  }
  DenseTensor T = DenseTensor::zeros(std::vector<int>(2 * ell, n));
  for (int j = 0; j < R; ++j) T.data += outer_power(A.col(j), 2 * ell);
  if (noise > 0.0) {
    VectorXd e(T.data.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = rng.gaussian();
    T.data += (noise / e.norm()) * e;
  }

  ResultRow row;
  row.kind = "foobi";
  row.trial_id = trial;
  row.seed = seed;
  const std::string base_params = "n=" + std::to_string(n) + " ell=" + std::to_string(ell) +
                                  " R=" + std::to_string(R) + " noise=" + format_double(noise);
  std::vector<ResultRow> rows;
  try {
    FoobiParams params;
    params.seed = Rng::derive(seed, 0xdec0);
    const auto comps = decompose(T, R, params);
    MatrixXd B(n, R);
    for (int j = 0; j < R; ++j) B.col(j) = comps[j];
    row.params = base_params;
    row.metric = "matched_error";
    row.value = match_components(A, B).error;
    row.threshold = tol;
    row.pass = row.value <= tol;
    rows.push_back(row);
  } catch (const FoobiError& e) {
    row.params = base_params + " error=" + e.what();
    row.metric = "matched_error";
    row.value = std::numeric_limits<double>::infinity();
    row.threshold = tol;
    row.pass = false;
    rows.push_back(row);
  }
  row.metric = "sigma_min_M_phi";
  row.params = base_params;
  row.value = sigma_min(build_M_phi(A, ell));
  row.threshold = cfg.get_double("m_phi_tol", 1e-6);
  row.pass = row.value > row.threshold;
  rows.push_back(row);
  return rows;
}

inline std::vector<ResultRow> hmm_trial(const Config& cfg, std::int64_t trial, std::uint64_t seed) {
  const int r = static_cast<int>(cfg.get_int("r", 4));
  const int n = static_cast<int>(cfg.get_int("n", 5));
  const int d = static_cast<int>(cfg.get_int("d", r));
  const int ell = static_cast<int>(cfg.get_int("ell", 1));
  const double rho = cfg.get_double("rho", 0.1);
  const double tol = cfg.get_double("error_tol", 1e-6);

  ResultRow row;
  row.kind = "hmm";
  row.trial_id = trial;
  row.seed = seed;
  const std::string base_params = "r=" + std::to_string(r) + " n=" + std::to_string(n) +
                                  " d=" + std::to_string(d) + " ell=" + std::to_string(ell) +
                                  " rho=" + format_double(rho);
  std::vector<ResultRow> rows;
  try {
    const HmmModel model = gen_model(r, n, d, rho, seed);
    const HmmRecovery rec = align_to(recover_exact(model, ell, Rng::derive(seed, 0x177)), model.O);
    row.params = base_params;
    row.metric = "O_err";
    row.value = (rec.O_hat - model.O).norm();
    row.threshold = tol;
    row.pass = row.value <= tol;
    rows.push_back(row);
    row.metric = "P_err";
    row.value = (rec.P_hat - model.P).norm();
    row.pass = row.value <= tol;
    rows.push_back(row);
  } catch (const std::runtime_error& e) {
    row.params = base_params + " error=" + e.what();
    row.metric = "O_err";
    row.value = std::numeric_limits<double>::infinity();
    row.threshold = tol;
    row.pass = false;
    rows.push_back(row);
  }
  return rows;
}

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  std::string csv;
  std::string summary_json;
  int exit_code = 0;  // 0 all pass, 1 threshold failure
};

// Runs `trials` independent trials of the named experiment and aggregates
// per-metric pass rates (Wilson intervals) and medians.
inline ExperimentOutput run_experiment(const std::string& kind, const Config& cfg,
                                       std::int64_t trials, std::uint64_t master_seed, int jobs) {
  std::function<std::vector<ResultRow>(std::int64_t, std::uint64_t)> fn;
  if (kind == "ensemble")
    fn = [&](std::int64_t i, std::uint64_t s) { return ensemble_trial(cfg, i, s); };
  else if (kind == "subspace")
    fn = [&](std::int64_t i, std::uint64_t s) { return subspace_trial(cfg, i, s); };
  else if (kind == "foobi")
    fn = [&](std::int64_t i, std::uint64_t s) { return foobi_trial(cfg, i, s); };
  else if (kind == "hmm")
    fn = [&](std::int64_t i, std::uint64_t s) { return hmm_trial(cfg, i, s); };
  else
    throw std::runtime_error("run_experiment: unknown kind '" + kind + "'");

  const auto start = std::chrono::steady_clock::now();
  const auto slots = run_trials(trials, master_seed, jobs, fn);
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ExperimentOutput out;
  for (const auto& slot : slots)
    for (const auto& row : slot) out.rows.push_back(row);

  std::ostringstream csv;
  csv << kCsvHeader << '\n';
  for (const auto& row : out.rows) csv << csv_line(row) << '\n';
  out.csv = csv.str();

  // per-metric aggregates
  std::map<std::string, std::vector<const ResultRow*>> by_metric;
  for (const auto& row : out.rows) by_metric[row.metric].push_back(&row);
  std::ostringstream js;
  js << "{\n  \"kind\": \"" << kind << "\",\n  \"trials\": " << trials
     << ",\n  \"master_seed\": " << master_seed << ",\n  \"wall_time_s\": " << wall_s
     << ",\n  \"metrics\": {";
  bool first = true;
  bool all_pass = true;
  for (const auto& [metric, rows] : by_metric) {
    std::int64_t passes = 0;
    std::vector<double> values;
    for (const auto* row : rows) {
      if (row->pass) ++passes;
      if (std::isfinite(row->value)) values.push_back(row->value);
    }
    if (passes < static_cast<std::int64_t>(rows.size())) all_pass = false;
    std::sort(values.begin(), values.end());
    const double median = values.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : values[values.size() / 2];
    const auto ci = wilson_interval(passes, static_cast<std::int64_t>(rows.size()));
    js << (first ? "" : ",") << "\n    \"" << metric << "\": {\"count\": " << rows.size()
       << ", \"pass\": " << passes << ", \"pass_rate_wilson\": [" << ci.lo << ", " << ci.hi
       << "], \"median\": " << median << "}";
    first = false;
  }
  js << "\n  },\n  \"all_pass\": " << (all_pass ? "true" : "false") << "\n}\n";
  out.summary_json = js.str();
  out.exit_code = all_pass ? 0 : 1;
  return out;
}

}  // namespace sta

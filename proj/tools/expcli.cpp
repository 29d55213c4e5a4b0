// Experiment runner: seeded Monte-Carlo batches over the library's four
// experiment families, with CSV rows and a JSON summary per run.
//
// Exit codes: 0 all thresholds pass, 1 threshold failure, 2 usage or
// configuration error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <thread>

#include "sta/experiment.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  long long seed = 1;
  long long trials = -1;  // -1: config value or default 20
  std::string out_dir;
  int jobs = 0;  // 0: hardware concurrency
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "config file (flat key = value lines)");
  cmd->add_option("--seed", opts.seed, "master seed");
  cmd->add_option("--trials", opts.trials, "number of trials");
  cmd->add_option("--out", opts.out_dir, "output directory for results.csv and summary.json");
  cmd->add_option("--jobs", opts.jobs, "worker threads (default: available cores)");
}

int run_kind(const std::string& kind, const CommonOpts& opts) {
  sta::Config cfg;
  if (!opts.config_path.empty()) cfg = sta::Config::load(opts.config_path);
  if (cfg.has("kind") && cfg.get_string("kind") != kind)
    throw std::runtime_error("config kind '" + cfg.get_string("kind") +
                             "' does not match subcommand '" + kind + "'");
  const long long trials = opts.trials >= 0 ? opts.trials : cfg.get_int("trials", 20);
  const auto seed = static_cast<std::uint64_t>(cfg.has("seed") && opts.seed == 1
                                                   ? cfg.get_int("seed")
                                                   : opts.seed);
  int jobs = opts.jobs > 0 ? opts.jobs : static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;

  const auto out = sta::run_experiment(kind, cfg, trials, seed, jobs);
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    const auto write = [&](const std::string& name, const std::string& content) {
      std::ofstream f(std::filesystem::path(opts.out_dir) / name, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write to " + opts.out_dir + "/" + name);
      f << content;
    };
    write("results.csv", out.csv);
    write("summary.json", out.summary_json);
  } else {
    std::cout << out.csv;
  }
  std::cout << out.summary_json;
  return out.exit_code;
}

// Fast smoke check of each module on tiny instances.
int run_selftest(std::uint64_t seed) {
  using namespace sta;
  int failures = 0;
  const auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << '\n';
    if (!ok) ++failures;
  };

  {
    Rng rng(seed);
    VectorXd v(3);
    for (int i = 0; i < 3; ++i) v[i] = rng.gaussian();
    const VectorXd sq = outer_power(v, 2);
    check("tensor: outer power norm", std::abs(sq.norm() - v.squaredNorm()) < 1e-12);
  }
  {
    Rng rng(Rng::derive(seed, 1));
    MatrixXd V(5, 2);
    for (Eigen::Index i = 0; i < V.size(); ++i) V(i) = rng.gaussian();
    const auto fit = bounded_l1_fit(V.col(0) + 0.5 * V.col(1), V);
    check("lp: exact combination", fit.residual < 1e-8);
  }
  {
    Rng rng(Rng::derive(seed, 2));
    MatrixXd A(3, 4);
    for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = rng.gaussian();
    for (int j = 0; j < 4; ++j) A.col(j) /= A.col(j).norm();
    DenseTensor T = DenseTensor::zeros({3, 3, 3, 3});
    for (int j = 0; j < 4; ++j) T.data += outer_power(A.col(j), 4);
    FoobiParams params;
    params.seed = Rng::derive(seed, 3);
    MatrixXd B(3, 4);
    const auto comps = decompose(T, 4, params);
    for (int j = 0; j < 4; ++j) B.col(j) = comps[j];
    check("foobi: noiseless n=3 R=4", match_components(A, B).error < 1e-6);
  }
  {
    const HmmModel model = gen_model(3, 4, 3, 0.1, Rng::derive(seed, 4));
    const auto rec = align_to(recover_exact(model, 1, Rng::derive(seed, 5)), model.O);
    check("hmm: exact recovery r=3 n=4",
          (rec.O_hat - model.O).norm() < 1e-6 && (rec.P_hat - model.P).norm() < 1e-6);
  }
  {
    const auto inst = generate_instance(6, 2, 120, 0.5, 0.1, 0.0, Rng::derive(seed, 6));
    RecoveryParams params;
    params.ell = 2;
    const auto res = recover(inst.points, params, 2);
    check("subspace: planted recovery", evaluate(inst.T, res.T_hat) < 1e-6);
  }
  std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smoothed-analysis experiment runner"};
  app.require_subcommand(1);

  std::map<std::string, CommonOpts> opts;
  for (const char* kind : {"ensemble", "subspace", "foobi", "hmm"}) {
    auto* cmd = app.add_subcommand(kind, std::string("run ") + kind + " trials");
    add_common(cmd, opts[kind]);
  }
  CommonOpts self_opts;
  auto* self = app.add_subcommand("selftest", "quick smoke test of every module");
  self->add_option("--seed", self_opts.seed, "master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (self->parsed()) return run_selftest(static_cast<std::uint64_t>(self_opts.seed));
    for (auto& [kind, o] : opts)
      if (app.get_subcommand(kind)->parsed()) return run_kind(kind, o);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

// Experiment CLI: seeded training runs with CSV output, cross-seed summary
// tables, plot-ready confidence bands, and the enumeration oracle suite.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "vrer/harness.hpp"
#include "vrer/oracle.hpp"

namespace fs = std::filesystem;
using namespace vrer;

namespace {

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunOptions {
  std::string config_path;
  std::string algo;
  std::string env;
  std::vector<uint64_t> seeds;
  int iters = -1;
  int n = -1;
  double c = -1.0;
  std::string rule;
  int buffer = -1;
  int n0 = -1;
  double lr = -1.0;
  std::string estimator;
  double clip_uf = -1.0;
  std::string out_dir = "runs";
};

train::TrainConfig build_config(const RunOptions& opt) {
  train::TrainConfig cfg;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw CLI::ValidationError("--config", "cannot read " + opt.config_path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    cfg = harness::config_from_json(text);
  }
  // Flags override file values.
  if (!opt.algo.empty()) cfg.algo = train::algo_from_name(opt.algo);
  if (!opt.env.empty()) cfg.env_id = opt.env;
  if (opt.iters >= 0) cfg.iterations = opt.iters;
  if (opt.n >= 0) cfg.n = opt.n;
  if (opt.c >= 0.0) cfg.selection.c = opt.c;
  if (!opt.rule.empty()) {
    if (opt.rule == "rule1") cfg.selection.rule = reuse::SelectionRule::rule1;
    else if (opt.rule == "rule2") cfg.selection.rule = reuse::SelectionRule::rule2;
    else if (opt.rule == "rule3") cfg.selection.rule = reuse::SelectionRule::rule3;
    else throw CLI::ValidationError("--rule", "expected rule1|rule2|rule3");
  }
  if (opt.buffer >= 0) cfg.buffer_capacity = opt.buffer;
  if (opt.n0 >= 0) cfg.selection.n0 = opt.n0;
  if (opt.lr >= 0.0) cfg.actor_opt.learning_rate = opt.lr;
  if (!opt.estimator.empty()) {
    if (opt.estimator == "pg") cfg.estimator.kind = gradients::EstimatorKind::pg;
    else if (opt.estimator == "ilr") cfg.estimator.kind = gradients::EstimatorKind::ilr;
    else if (opt.estimator == "mlr") cfg.estimator.kind = gradients::EstimatorKind::mlr;
    else if (opt.estimator == "clr") cfg.estimator.kind = gradients::EstimatorKind::clr;
    else throw CLI::ValidationError("--estimator", "expected pg|ilr|mlr|clr");
  }
  if (opt.clip_uf > 0.0) cfg.estimator.clip_threshold = opt.clip_uf;
  return cfg;
}

int cmd_run(const RunOptions& opt) {
  train::TrainConfig cfg = build_config(opt);
  std::vector<uint64_t> seeds = opt.seeds;
  if (seeds.empty()) seeds.push_back(cfg.seed);

  fs::create_directories(opt.out_dir);
  harness::RunManifest manifest{cfg, seeds, opt.out_dir, timestamp_utc()};
  harness::write_manifest((fs::path(opt.out_dir) / "manifest.json").string(), manifest);

  auto results = harness::run_seeds(cfg, seeds);
  for (size_t i = 0; i < seeds.size(); ++i) {
    fs::path csv = fs::path(opt.out_dir) / harness::seed_csv_name(seeds[i]);
    harness::write_run_csv(csv.string(), results[i].logs);
    std::cout << "wrote " << csv.string() << " (" << results[i].logs.size()
              << " rows)\n";
  }
  return 0;
}

std::vector<std::vector<harness::CsvRow>> load_run_dirs(
    const std::vector<std::string>& dirs) {
  std::vector<std::vector<harness::CsvRow>> runs;
  for (const auto& dir : dirs) {
    harness::RunManifest manifest =
        harness::read_manifest((fs::path(dir) / "manifest.json").string());
    for (uint64_t seed : manifest.seeds) {
      fs::path csv = fs::path(dir) / harness::seed_csv_name(seed);
      runs.push_back(harness::read_run_csv(csv.string()));
    }
  }
  if (runs.empty()) throw std::runtime_error("no runs found");
  return runs;
}

int cmd_summarize(const std::vector<std::string>& dirs, int window) {
  auto runs = load_run_dirs(dirs);
  harness::RunManifest manifest =
      harness::read_manifest((fs::path(dirs.front()) / "manifest.json").string());
  harness::Summary s = harness::summarize_runs(runs, window);
  std::cout << "algo,task,window,mean,standard_error,p5,p95\n";
  std::cout << train::algo_name(manifest.config.algo) << ','
            << manifest.config.env_id << ',' << window << ',' << s.mean << ','
            << s.standard_error << ',' << s.p5 << ',' << s.p95 << "\n";
  return 0;
}

int cmd_curves(const std::vector<std::string>& dirs, const std::string& out_path) {
  auto runs = load_run_dirs(dirs);
  std::vector<std::vector<double>> per_seed;
  for (const auto& rows : runs) {
    std::vector<double> series;
    series.reserve(rows.size());
    for (const auto& r : rows) series.push_back(r.mean_return);
    per_seed.push_back(std::move(series));
  }
  auto curve = harness::export_curves(per_seed);
  harness::write_curves_csv(out_path, curve);
  std::cout << "wrote " << out_path << " (" << curve.size() << " rows)\n";
  return 0;
}

// Compact oracle suite: exactness and unbiasedness checks on the enumerable
// chain MDP, printed one line per check.
int cmd_oracle() {
  int failures = 0;
  auto report = [&](const char* name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
    if (!ok) ++failures;
  };

  ChainMdpSpec spec;
  spec.n_states = 2;
  spec.n_actions = 2;
  spec.horizon = 2;
  spec.transition_probs = {
      {{0.7, 0.3}, {0.2, 0.8}},
      {{0.4, 0.6}, {0.9, 0.1}},
  };
  spec.rewards = {{0.2, 1.0}, {-0.4, 0.6}};
  spec.initial_dist = {0.6, 0.4};

  net::MlpConfig mc;
  mc.layer_sizes = {2, 4, 2};
  mc.activation = net::Activation::tanh;
  policy::Policy pol(mc, policy::PolicyKind::categorical(2));

  RngStream rng(7);
  net::Vec theta = pol.init_params(rng);
  double gamma = 0.99;

  // Probabilities over all trajectories sum to one.
  StatePolicy table = [&](int s) {
    net::Vec obs(2, 0.0);
    obs[s] = 1.0;
    return pol.action_probabilities(theta, obs);
  };
  double total = 0.0;
  for (const auto& t : enumerate_trajectories(spec, table, gamma))
    total += t.probability;
  report("trajectory probabilities sum to 1", std::abs(total - 1.0) < 1e-10,
         "total=" + std::to_string(total));

  // Enumeration gradient against central finite differences of the objective.
  net::Vec exact = oracle::chain_exact_gradient(spec, pol, theta, gamma);
  net::Vec fd = oracle::finite_difference_gradient(
      [&](const net::Vec& p) { return oracle::chain_objective(spec, pol, p, gamma); },
      theta, 1e-6);
  double worst = 0.0;
  for (size_t i = 0; i < exact.size(); ++i) {
    double denom = std::max(std::abs(fd[i]), 1e-8);
    worst = std::max(worst, std::abs(exact[i] - fd[i]) / denom);
  }
  report("enumeration gradient vs finite differences", worst < 1e-6,
         "max rel err=" + std::to_string(worst));

  // Monte-Carlo unbiasedness of PG on 50k sampled episodes.
  gradients::EstimatorConfig est;
  est.gamma = gamma;
  std::vector<gradients::Sample> samples;
  RngStream sample_rng(99);
  const int n_mc = 50000;
  samples.reserve(n_mc);
  for (int i = 0; i < n_mc; ++i)
    samples.push_back(oracle::sample_chain_episode(spec, pol, theta, sample_rng, 1));
  gradients::GradientEstimate pg = gradients::estimate_pg(pol, theta, samples, est);
  // Componentwise z-scores against the exact gradient.
  std::vector<net::Vec> grads;
  grads.reserve(n_mc);
  for (const auto& s : samples)
    grads.push_back(gradients::scenario_gradient(pol, theta, s, est));
  double max_z = 0.0;
  for (size_t c = 0; c < theta.size(); ++c) {
    std::vector<double> comp(n_mc);
    for (int i = 0; i < n_mc; ++i) comp[i] = grads[i][c];
    auto ms = oracle::mean_se(comp);
    if (ms.se > 0.0) max_z = std::max(max_z, std::abs(ms.mean - exact[c]) / ms.se);
  }
  report("PG estimator unbiased (3 SE componentwise)", max_z < 3.0,
         "max |z|=" + std::to_string(max_z));
  (void)pg;

  std::cout << (failures == 0 ? "oracle suite passed\n" : "oracle suite FAILED\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-reduction experience replay for policy gradients"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "train with one or more seeds");
  run->add_option("--config", run_opt.config_path, "JSON config file");
  run->add_option("--algo", run_opt.algo, "vpg|vpg-vrer|ppo|ppo-vrer");
  run->add_option("--env", run_opt.env, "cartpole|acrobot|invpend-cont|chain");
  run->add_option("--seed,--seeds", run_opt.seeds, "seeds (one run per seed)");
  run->add_option("--iters", run_opt.iters, "training iterations");
  run->add_option("--n", run_opt.n, "new samples per iteration");
  run->add_option("--c", run_opt.c, "selection constant c");
  run->add_option("--rule", run_opt.rule, "rule1|rule2|rule3");
  run->add_option("--buffer", run_opt.buffer, "replay buffer capacity");
  run->add_option("--n0", run_opt.n0, "subsample size per selected snapshot");
  run->add_option("--lr", run_opt.lr, "actor learning rate");
  run->add_option("--estimator", run_opt.estimator, "pg|ilr|mlr|clr");
  run->add_option("--clip-uf", run_opt.clip_uf, "CLR clipping threshold U_f");
  run->add_option("--out", run_opt.out_dir, "output directory");

  std::vector<std::string> summarize_dirs;
  int window = 1000;
  auto* summarize = app.add_subcommand("summarize", "pooled trailing-window table");
  summarize->add_option("dirs", summarize_dirs, "run directories")->required();
  summarize->add_option("--window", window, "trailing iterations per seed");

  std::vector<std::string> curve_dirs;
  std::string curves_out = "curves.csv";
  auto* curves = app.add_subcommand("curves", "per-iteration mean with 95% bands");
  curves->add_option("dirs", curve_dirs, "run directories")->required();
  curves->add_option("--out", curves_out, "output CSV path");

  app.add_subcommand("oracle", "run the enumeration oracle checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_opt);
    if (summarize->parsed()) return cmd_summarize(summarize_dirs, window);
    if (curves->parsed()) return cmd_curves(curve_dirs, curves_out);
    return cmd_oracle();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#include "vrer/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace vrer::harness {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw std::runtime_error("bad double field: " + s);
  return v;
}

long parse_long(const std::string& s) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw std::runtime_error("bad integer field: " + s);
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

CsvRow to_csv_row(const train::IterationLog& log) {
  CsvRow row;
  row.iteration = log.iteration;
  row.episodes = log.episodes;
  row.mean_return = log.mean_return;
  row.reuse_set_size = log.reuse_set_size;
  row.pg_var_trace = log.pg_var_trace;
  row.est_var_trace = log.est_var_trace;
  row.selected_count = static_cast<int>(log.selected_iterations.size());
  row.wall_ms = static_cast<long>(log.wall_ms);
  return row;
}

std::string run_csv_header() {
  return "iteration,episodes,mean_return,reuse_set_size,pg_var_trace,est_var_trace,"
         "selected_count,wall_ms";
}

void write_run_csv(const std::string& path,
                   const std::vector<train::IterationLog>& logs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << run_csv_header() << "\n";
  for (const auto& log : logs) {
    CsvRow r = to_csv_row(log);
    out << r.iteration << ',' << r.episodes << ',' << format_double(r.mean_return)
        << ',' << r.reuse_set_size << ',' << format_double(r.pg_var_trace) << ','
        << format_double(r.est_var_trace) << ',' << r.selected_count << ','
        << r.wall_ms << "\n";
  }
}

std::vector<CsvRow> read_run_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  if (line != run_csv_header()) throw std::runtime_error("unexpected csv header: " + path);

  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 8) throw std::runtime_error("bad csv row: " + line);
    CsvRow r;
    r.iteration = static_cast<int>(parse_long(f[0]));
    r.episodes = parse_long(f[1]);
    r.mean_return = parse_double(f[2]);
    r.reuse_set_size = static_cast<int>(parse_long(f[3]));
    r.pg_var_trace = parse_double(f[4]);
    r.est_var_trace = parse_double(f[5]);
    r.selected_count = static_cast<int>(parse_long(f[6]));
    r.wall_ms = parse_long(f[7]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> moving_average(std::span<const double> series, int width) {
  if (width < 1) throw std::invalid_argument("moving_average: width >= 1");
  std::vector<double> out(series.size(), 0.0);
  double acc = 0.0;
  for (size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    if (i >= static_cast<size_t>(width)) acc -= series[i - width];
    size_t used = std::min<size_t>(i + 1, static_cast<size_t>(width));
    out[i] = acc / static_cast<double>(used);
  }
  return out;
}

Summary summarize_values(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  Summary s;
  s.count = static_cast<int>(values.size());
  double m = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= m;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) {
      double d = v - s.mean;
      ss += d * d;
    }
    s.standard_error = std::sqrt(ss) / std::sqrt((m - 1.0) * m);
  }
  std::sort(values.begin(), values.end());
  auto nearest_rank = [&](double p) {
    size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * m));
    rank = std::clamp<size_t>(rank, 1, values.size());
    return values[rank - 1];
  };
  s.p5 = nearest_rank(5.0);
  s.p95 = nearest_rank(95.0);
  return s;
}

Summary summarize_runs(const std::vector<std::vector<CsvRow>>& runs, int window) {
  std::vector<double> pooled;
  for (const auto& rows : runs) {
    if (static_cast<size_t>(window) > rows.size())
      throw std::invalid_argument("summarize: window larger than available iterations");
    for (size_t i = rows.size() - window; i < rows.size(); ++i)
      pooled.push_back(rows[i].mean_return);
  }
  return summarize_values(std::move(pooled));
}

std::vector<CurvePoint> export_curves(const std::vector<std::vector<double>>& per_seed) {
  if (per_seed.empty()) throw std::invalid_argument("export_curves: no runs");
  size_t len = per_seed[0].size();
  for (const auto& s : per_seed)
    len = std::min(len, s.size());

  std::vector<CurvePoint> curve(len);
  std::vector<double> column(per_seed.size());
  for (size_t i = 0; i < len; ++i) {
    for (size_t r = 0; r < per_seed.size(); ++r) column[r] = per_seed[r][i];
    double mean = 0.0;
    for (double v : column) mean += v;
    mean /= static_cast<double>(column.size());
    double se = 0.0;
    if (column.size() > 1) {
      double ss = 0.0;
      for (double v : column) {
        double d = v - mean;
        ss += d * d;
      }
      double m = static_cast<double>(column.size());
      se = std::sqrt(ss) / std::sqrt((m - 1.0) * m);
    }
    curve[i] = {static_cast<int>(i + 1), mean, mean - 1.96 * se, mean + 1.96 * se};
  }
  return curve;
}

void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "iteration,mean,ci_low,ci_high\n";
  for (const auto& p : curve)
    out << p.iteration << ',' << format_double(p.mean) << ','
        << format_double(p.ci_low) << ',' << format_double(p.ci_high) << "\n";
}

namespace {

json config_to_json_obj(const train::TrainConfig& cfg) {
  json j;
  j["algo"] = train::algo_name(cfg.algo);
  j["env"] = cfg.env_id;
  j["iters"] = cfg.iterations;
  j["n"] = cfg.n;
  j["k_off"] = cfg.k_off;
  j["estimator"] = cfg.estimator.kind == gradients::EstimatorKind::pg    ? "pg"
                   : cfg.estimator.kind == gradients::EstimatorKind::ilr ? "ilr"
                   : cfg.estimator.kind == gradients::EstimatorKind::mlr ? "mlr"
                                                                         : "clr";
  j["advantage"] = cfg.estimator.advantage_mode == gradients::AdvantageMode::full_return
                       ? "full_return"
                   : cfg.estimator.advantage_mode == gradients::AdvantageMode::reward_to_go
                       ? "reward_to_go"
                       : "gae";
  j["gamma"] = cfg.estimator.gamma;
  j["lambda"] = cfg.estimator.gae_lambda;
  j["clip_uf"] = cfg.estimator.clip_threshold;
  j["rule"] = cfg.selection.rule == reuse::SelectionRule::rule1   ? "rule1"
              : cfg.selection.rule == reuse::SelectionRule::rule2 ? "rule2"
                                                                  : "rule3";
  j["c"] = cfg.selection.c;
  j["n0"] = cfg.selection.n0;
  j["resample"] = cfg.selection.resample;
  j["buffer"] = cfg.buffer_capacity;
  j["lr"] = cfg.actor_opt.learning_rate;
  j["optimizer"] = cfg.actor_opt.kind == net::OptKind::adam ? "adam" : "sgd";
  j["lr_schedule"] =
      cfg.actor_opt.schedule == net::LrSchedule::constant ? "constant" : "inverse_power";
  j["lr_power_q"] = cfg.actor_opt.power_q;
  j["critic_lr"] = cfg.critic_opt.learning_rate;
  j["seed"] = cfg.seed;
  j["entropy_coef"] = cfg.entropy_coef;
  j["ppo_clip"] = cfg.ppo_clip;
  j["minibatch"] = cfg.minibatch;
  j["n_envs"] = cfg.n_envs;
  j["max_episode_steps"] = cfg.max_episode_steps;
  j["normalize_advantages"] = cfg.normalize_advantages;
  j["gaussian_std"] = cfg.gaussian_std;
  j["hidden_units"] = cfg.hidden_units;
  return j;
}

void config_apply_json(train::TrainConfig& cfg, const json& j) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    if (key == "algo") cfg.algo = train::algo_from_name(v.get<std::string>());
    else if (key == "env") cfg.env_id = v.get<std::string>();
    else if (key == "iters") cfg.iterations = v.get<int>();
    else if (key == "n") cfg.n = v.get<int>();
    else if (key == "k_off") cfg.k_off = v.get<int>();
    else if (key == "estimator") {
      std::string s = v.get<std::string>();
      cfg.estimator.kind = s == "pg"    ? gradients::EstimatorKind::pg
                           : s == "ilr" ? gradients::EstimatorKind::ilr
                           : s == "mlr" ? gradients::EstimatorKind::mlr
                           : s == "clr" ? gradients::EstimatorKind::clr
                                        : throw std::invalid_argument("bad estimator: " + s);
    } else if (key == "advantage") {
      std::string s = v.get<std::string>();
      cfg.estimator.advantage_mode =
          s == "full_return"    ? gradients::AdvantageMode::full_return
          : s == "reward_to_go" ? gradients::AdvantageMode::reward_to_go
          : s == "gae"          ? gradients::AdvantageMode::gae
                                : throw std::invalid_argument("bad advantage: " + s);
    } else if (key == "gamma") cfg.estimator.gamma = v.get<double>();
    else if (key == "lambda") cfg.estimator.gae_lambda = v.get<double>();
    else if (key == "clip_uf") cfg.estimator.clip_threshold = v.get<double>();
    else if (key == "rule") {
      std::string s = v.get<std::string>();
      cfg.selection.rule = s == "rule1"   ? reuse::SelectionRule::rule1
                           : s == "rule2" ? reuse::SelectionRule::rule2
                           : s == "rule3" ? reuse::SelectionRule::rule3
                                          : throw std::invalid_argument("bad rule: " + s);
    } else if (key == "c") cfg.selection.c = v.get<double>();
    else if (key == "n0") cfg.selection.n0 = v.get<int>();
    else if (key == "resample") cfg.selection.resample = v.get<bool>();
    else if (key == "buffer") cfg.buffer_capacity = v.get<int>();
    else if (key == "lr") cfg.actor_opt.learning_rate = v.get<double>();
    else if (key == "optimizer") {
      std::string s = v.get<std::string>();
      cfg.actor_opt.kind = s == "adam"  ? net::OptKind::adam
                           : s == "sgd" ? net::OptKind::sgd
                                        : throw std::invalid_argument("bad optimizer: " + s);
    } else if (key == "lr_schedule") {
      std::string s = v.get<std::string>();
      cfg.actor_opt.schedule =
          s == "constant"        ? net::LrSchedule::constant
          : s == "inverse_power" ? net::LrSchedule::inverse_power
                                 : throw std::invalid_argument("bad lr_schedule: " + s);
    } else if (key == "lr_power_q") cfg.actor_opt.power_q = v.get<double>();
    else if (key == "critic_lr") cfg.critic_opt.learning_rate = v.get<double>();
    else if (key == "seed") cfg.seed = v.get<uint64_t>();
    else if (key == "entropy_coef") cfg.entropy_coef = v.get<double>();
    else if (key == "ppo_clip") cfg.ppo_clip = v.get<double>();
    else if (key == "minibatch") cfg.minibatch = v.get<int>();
    else if (key == "n_envs") cfg.n_envs = v.get<int>();
    else if (key == "max_episode_steps") cfg.max_episode_steps = v.get<int>();
    else if (key == "normalize_advantages") cfg.normalize_advantages = v.get<bool>();
    else if (key == "gaussian_std") cfg.gaussian_std = v.get<double>();
    else if (key == "hidden_units") cfg.hidden_units = v.get<int>();
    else throw std::invalid_argument("unknown config key: " + key);
  }
}

}  // namespace

train::TrainConfig config_from_json(const std::string& text) {
  train::TrainConfig cfg;
  config_apply_json(cfg, json::parse(text));
  return cfg;
}

std::string config_to_json(const train::TrainConfig& cfg) {
  return config_to_json_obj(cfg).dump(2);
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  json j;
  j["config"] = config_to_json_obj(manifest.config);
  j["seeds"] = manifest.seeds;
  j["output_dir"] = manifest.output_dir;
  j["created_at"] = manifest.created_at;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  json j = json::parse(in);
  RunManifest m;
  config_apply_json(m.config, j.at("config"));
  m.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  m.output_dir = j.at("output_dir").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  return m;
}

std::string seed_csv_name(uint64_t seed) {
  return "seed" + std::to_string(seed) + ".csv";
}

int worker_threads() {
  if (const char* env = std::getenv("VRER_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<train::RunResult> run_seeds(const train::TrainConfig& base,
                                        std::span<const uint64_t> seeds) {
  std::vector<train::RunResult> results(seeds.size());
  int workers = std::min<int>(worker_threads(), static_cast<int>(seeds.size()));
  if (workers <= 1) {
    for (size_t i = 0; i < seeds.size(); ++i) {
      train::TrainConfig cfg = base;
      cfg.seed = seeds[i];
      results[i] = train::run(cfg);
    }
    return results;
  }

  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= seeds.size()) return;
        try {
          train::TrainConfig cfg = base;
          cfg.seed = seeds[i];
          results[i] = train::run(cfg);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace vrer::harness

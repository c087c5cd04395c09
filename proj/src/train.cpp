#include "vrer/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vrer/variance.hpp"

namespace vrer::train {

using gradients::EstimatorConfig;
using gradients::EstimatorKind;
using gradients::GradientEstimate;
using gradients::Sample;
using gradients::SnapshotGroup;
using net::Vec;
using policy::Policy;

std::string algo_name(Algo a) {
  switch (a) {
    case Algo::vpg: return "vpg";
    case Algo::vpg_vrer: return "vpg-vrer";
    case Algo::ppo: return "ppo";
    case Algo::ppo_vrer: return "ppo-vrer";
  }
  return "vpg";
}

Algo algo_from_name(const std::string& name) {
  if (name == "vpg") return Algo::vpg;
  if (name == "vpg-vrer") return Algo::vpg_vrer;
  if (name == "ppo") return Algo::ppo;
  if (name == "ppo-vrer") return Algo::ppo_vrer;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

void TrainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations >= 1");
  if (n < 1) throw std::invalid_argument("TrainConfig: n >= 1");
  if (k_off < 1) throw std::invalid_argument("TrainConfig: k_off >= 1");
  if (ppo_clip <= 0.0 || ppo_clip >= 1.0)
    throw std::invalid_argument("TrainConfig: ppo_clip in (0,1)");
  if (n_envs < 1) throw std::invalid_argument("TrainConfig: n_envs >= 1");
  estimator.validate();
  if (algo == Algo::vpg_vrer || algo == Algo::ppo_vrer) {
    selection.validate();
    if (buffer_capacity < 0)
      throw std::invalid_argument("TrainConfig: buffer capacity >= 0");
  }
  if (algo == Algo::vpg_vrer) {
    if (selection.rule == reuse::SelectionRule::rule3)
      throw std::invalid_argument("TrainConfig: rule3 is step-based; vpg-vrer needs rule1/rule2");
    if (n < 2) throw std::invalid_argument("TrainConfig: rule1/rule2 need n >= 2");
    if (estimator.kind == EstimatorKind::pg)
      throw std::invalid_argument("TrainConfig: vpg-vrer needs an ilr/mlr/clr estimator");
  }
  if (algo == Algo::ppo_vrer && selection.rule != reuse::SelectionRule::rule3)
    throw std::invalid_argument("TrainConfig: rule1/rule2 are episode-based; ppo-vrer needs rule3");
}

namespace {

struct Streams {
  RngStream env;
  RngStream policy;
  RngStream subsample;
  RngStream shuffle;
  RngStream init;

  explicit Streams(uint64_t seed) {
    RngStream root(seed);
    env = root.split("env");
    policy = root.split("policy");
    subsample = root.split("subsample");
    shuffle = root.split("shuffle");
    init = root.split("init");
  }
};

Policy build_actor(const envs::EnvSpec& spec, const TrainConfig& cfg, bool ppo_style) {
  net::MlpConfig mc;
  mc.layer_sizes = {spec.obs_dim, cfg.hidden_units, cfg.hidden_units,
                    spec.action.is_discrete ? spec.action.n : spec.action.n};
  if (ppo_style) {
    mc.activation = net::Activation::tanh;
    mc.init = net::Init::orthogonal;
    mc.init_gain = std::sqrt(2.0);
  } else {
    mc.activation = spec.action.is_discrete ? net::Activation::relu
                                            : net::Activation::tanh;
    mc.init = net::Init::glorot_uniform;
  }
  policy::PolicyKind kind =
      spec.action.is_discrete
          ? policy::PolicyKind::categorical(spec.action.n)
          : policy::PolicyKind::gaussian(spec.action.n, cfg.gaussian_std);
  return Policy(mc, kind);
}

net::MlpConfig build_critic_config(const envs::EnvSpec& spec, const TrainConfig& cfg) {
  net::MlpConfig mc;
  mc.layer_sizes = {spec.obs_dim, cfg.hidden_units, cfg.hidden_units, 1};
  mc.activation = net::Activation::tanh;
  mc.init = net::Init::orthogonal;
  mc.init_gain = std::sqrt(2.0);
  return mc;
}

Sample collect_episode(envs::Env& env, const Policy& pol, const Vec& params,
                       RngStream& env_rng, RngStream& policy_rng, int iteration) {
  policy::Trajectory traj;
  double loglik = 0.0;
  Vec state = env.reset(env_rng);
  while (true) {
    auto [action, lp] = pol.sample_action(params, state, policy_rng);
    envs::StepResult sr = env.step(action);
    traj.push_back({std::move(state), std::move(action), sr.reward});
    loglik += lp;
    if (sr.terminated || sr.truncated) break;
    state = std::move(sr.next_state);
  }
  Sample s;
  s.data = gradients::EpisodeSample{std::move(traj)};
  s.origin_iteration = iteration;
  s.behavior_loglik = loglik;
  return s;
}

double mean_episode_return(std::span<const Sample> samples) {
  double total = 0.0;
  for (const Sample& s : samples) total += gradients::episode_return(s.episode());
  return total / static_cast<double>(samples.size());
}

GradientEstimate offline_estimate(const Policy& pol, const Vec& params,
                                  std::span<const SnapshotGroup> pool,
                                  int current_iteration, const EstimatorConfig& cfg) {
  switch (cfg.kind) {
    case EstimatorKind::ilr: return gradients::estimate_ilr(pol, params, pool, cfg);
    case EstimatorKind::clr: return gradients::estimate_clr(pol, params, pool, cfg);
    case EstimatorKind::mlr:
      return gradients::estimate_mlr(pol, params, pool, current_iteration, cfg);
    default:
      throw std::invalid_argument("offline_estimate: pg has no reuse form");
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
      .count();
}

}  // namespace

RunResult run_vpg(const TrainConfig& cfg) {
  cfg.validate();
  auto env = envs::make_env(cfg.env_id, cfg.max_episode_steps);
  Streams streams(cfg.seed);
  Policy pol = build_actor(env->spec(), cfg, false);
  Vec params = pol.init_params(streams.init);
  net::Optimizer opt(cfg.actor_opt, pol.param_count());

  EstimatorConfig est_cfg = cfg.estimator;
  est_cfg.kind = EstimatorKind::pg;

  RunResult result;
  long episodes = 0;
  for (int k = 1; k <= cfg.iterations; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<Sample> samples;
    samples.reserve(cfg.n);
    for (int j = 0; j < cfg.n; ++j)
      samples.push_back(collect_episode(*env, pol, params, streams.env,
                                        streams.policy, k));
    episodes += cfg.n;

    GradientEstimate est = gradients::estimate_pg(pol, params, samples, est_cfg);

    IterationLog log;
    log.iteration = k;
    log.episodes = episodes;
    log.mean_return = mean_episode_return(samples);
    log.reuse_set_size = 1;
    log.pg_var_trace = est.variance_trace;
    log.est_var_trace = est.variance_trace;
    log.selected_iterations = {k};
    if (opt.step(params, est.gradient, true) == net::StepStatus::rejected_nonfinite)
      ++log.rejected_steps;
    log.wall_ms = elapsed_ms(t0);
    result.logs.push_back(std::move(log));
    result.theta_history.push_back(params);
  }
  result.final_params = params;
  return result;
}

RunResult run_vpg_vrer(const TrainConfig& cfg) {
  cfg.validate();
  auto env = envs::make_env(cfg.env_id, cfg.max_episode_steps);
  Streams streams(cfg.seed);
  Policy pol = build_actor(env->spec(), cfg, false);
  Vec params = pol.init_params(streams.init);
  net::Optimizer opt(cfg.actor_opt, pol.param_count());
  reuse::ReplayBuffer buffer(cfg.buffer_capacity);

  EstimatorConfig pg_cfg = cfg.estimator;
  pg_cfg.kind = EstimatorKind::pg;

  RunResult result;
  long episodes = 0;
  for (int k = 1; k <= cfg.iterations; ++k) {
    auto t0 = std::chrono::steady_clock::now();

    // Step 1: generate n new episodes under theta_k and store them.
    reuse::GenerationRecord record;
    record.snapshot.iteration = k;
    record.snapshot.params = params;
    record.samples.reserve(cfg.n);
    for (int j = 0; j < cfg.n; ++j)
      record.samples.push_back(collect_episode(*env, pol, params, streams.env,
                                               streams.policy, k));
    episodes += cfg.n;
    buffer.insert(std::move(record));
    const reuse::GenerationRecord& current = buffer.entries().back();

    // Step 2: build the reuse set and the subsampled training pool.
    reuse::ReuseSet selected;
    if (cfg.selection.rule == reuse::SelectionRule::rule1) {
      selected = reuse::select_rule1(buffer, pol, params, current.samples, k,
                                     cfg.selection.c, cfg.estimator);
    } else {
      selected = reuse::select_rule2(buffer, pol, params, current.samples, k,
                                     cfg.selection.c, cfg.estimator);
    }
    std::vector<SnapshotGroup> pool =
        reuse::subsample_pool(buffer, selected, cfg.selection, streams.subsample);

    GradientEstimate pg_est =
        gradients::estimate_pg(pol, params, current.samples, pg_cfg);

    IterationLog log;
    log.iteration = k;
    log.episodes = episodes;
    log.mean_return = mean_episode_return(current.samples);
    log.reuse_set_size = static_cast<int>(selected.selected_iterations.size());
    log.selected_iterations = selected.selected_iterations;
    log.pg_var_trace = pg_est.variance_trace;
    log.disqualified_snapshots = selected.disqualified;

    // Step 3: K_off offline ascent steps, each on a mini-batch drawn from
    // the pool. The batch is drawn group-wise (whole snapshot strata) so the
    // estimator keeps its stratified form; the current iteration's group is
    // always kept so the mixture still contains the target.
    int group_cap = cfg.minibatch > 0
                        ? std::max(1, cfg.minibatch / std::max(1, cfg.selection.n0))
                        : 0;
    for (int h = 0; h < cfg.k_off; ++h) {
      std::vector<SnapshotGroup> batch;
      std::span<const SnapshotGroup> used(pool);
      if (group_cap > 0 && static_cast<int>(pool.size()) > group_cap) {
        // partial Fisher-Yates over the historical groups; current is last
        std::vector<size_t> idx(pool.size() - 1);
        std::iota(idx.begin(), idx.end(), size_t{0});
        for (int pick = 0; pick < group_cap - 1; ++pick) {
          size_t j = pick + streams.subsample.below(idx.size() - pick);
          std::swap(idx[pick], idx[j]);
        }
        idx.resize(group_cap - 1);
        std::sort(idx.begin(), idx.end());  // deterministic buffer order
        for (size_t i : idx) batch.push_back(pool[i]);
        batch.push_back(pool.back());
        used = batch;
      }
      GradientEstimate est = offline_estimate(pol, params, used, k, cfg.estimator);
      if (h == 0) {
        log.est_var_trace = est.variance_trace;
        log.max_weight = est.max_weight;
        log.max_weight_bound = static_cast<double>(est.n_groups);
      }
      if (est.n_groups == 0 ||
          opt.step(params, est.gradient, true) == net::StepStatus::rejected_nonfinite)
        ++log.rejected_steps;
    }

    log.wall_ms = elapsed_ms(t0);
    result.logs.push_back(std::move(log));
    result.theta_history.push_back(params);
  }
  result.final_params = params;
  return result;
}

namespace {

// One PPO rollout across the worker environments, env-major segments.
struct Rollout {
  std::vector<Sample> transitions;
  std::vector<double> returns;  // GAE advantage + rollout-time value
  int episodes_completed = 0;
  double completed_return_sum = 0.0;
};

struct PpoWorkers {
  std::vector<std::unique_ptr<envs::Env>> envs;
  std::vector<RngStream> env_rngs;
  std::vector<Vec> states;
  std::vector<double> partial_returns;
};

Rollout ppo_collect(PpoWorkers& w, const Policy& pol, const Vec& actor,
                    const net::MlpConfig& critic_cfg, const Vec& critic,
                    RngStream& policy_rng, const TrainConfig& cfg, int iteration) {
  int per_env = cfg.n / cfg.n_envs;
  Rollout out;
  out.transitions.reserve(static_cast<size_t>(per_env) * w.envs.size());
  out.returns.resize(static_cast<size_t>(per_env) * w.envs.size());

  net::ForwardTrace scratch;
  std::vector<double> seg_rewards(per_env), seg_values(per_env);
  std::vector<uint8_t> seg_done(per_env);

  for (size_t e = 0; e < w.envs.size(); ++e) {
    size_t base = out.transitions.size();
    for (int t = 0; t < per_env; ++t) {
      auto [action, lp] = pol.sample_action(actor, w.states[e], policy_rng);
      envs::StepResult sr = w.envs[e]->step(action);
      w.partial_returns[e] += sr.reward;

      gradients::TransitionSample tr;
      tr.state = w.states[e];
      tr.action = std::move(action);
      tr.reward = sr.reward;
      tr.next_state = sr.next_state;
      tr.done = sr.terminated || sr.truncated;
      Sample s;
      s.data = std::move(tr);
      s.origin_iteration = iteration;
      s.behavior_loglik = lp;
      out.transitions.push_back(std::move(s));

      seg_rewards[t] = sr.reward;
      seg_done[t] = (sr.terminated || sr.truncated) ? 1 : 0;
      if (seg_done[t]) {
        ++out.episodes_completed;
        out.completed_return_sum += w.partial_returns[e];
        w.partial_returns[e] = 0.0;
        w.states[e] = w.envs[e]->reset(w.env_rngs[e]);
      } else {
        w.states[e] = std::move(sr.next_state);
      }
    }

    for (int t = 0; t < per_env; ++t) {
      const auto& tr = out.transitions[base + t].transition();
      seg_values[t] = net::forward(critic_cfg, critic, tr.state, scratch)[0];
    }
    double bootstrap = 0.0;
    if (!seg_done[per_env - 1])
      bootstrap = net::forward(critic_cfg, critic, w.states[e], scratch)[0];

    Vec adv = gradients::gae_advantages(seg_rewards, seg_values, bootstrap, seg_done,
                                        cfg.estimator.gamma, cfg.estimator.gae_lambda);
    for (int t = 0; t < per_env; ++t) {
      out.transitions[base + t].transition().advantage = adv[t];
      out.returns[base + t] = adv[t] + seg_values[t];
    }
  }
  return out;
}

void normalize_advantages(std::vector<Sample>& transitions) {
  double mean = 0.0;
  for (const Sample& s : transitions) mean += s.transition().advantage;
  mean /= static_cast<double>(transitions.size());
  double var = 0.0;
  for (const Sample& s : transitions) {
    double d = s.transition().advantage - mean;
    var += d * d;
  }
  var /= static_cast<double>(transitions.size());
  double stddev = std::sqrt(var);
  for (Sample& s : transitions)
    s.transition().advantage = (s.transition().advantage - mean) / (stddev + 1e-8);
}

void fisher_yates(std::vector<int>& idx, RngStream& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(i)]);
}

double pg_trace_of_transitions(const Policy& pol, const Vec& params,
                               const std::vector<Sample>& transitions,
                               const EstimatorConfig& est) {
  std::vector<Vec> grads;
  grads.reserve(transitions.size());
  for (const Sample& s : transitions)
    grads.push_back(gradients::scenario_gradient(pol, params, s, est));
  return variance::sample_variance_trace(grads);
}

RunResult run_ppo_impl(const TrainConfig& cfg, bool use_vrer) {
  cfg.validate();
  if (cfg.n % cfg.n_envs != 0)
    throw std::invalid_argument("run_ppo: n must be divisible by n_envs");

  auto probe = envs::make_env(cfg.env_id, cfg.max_episode_steps);
  const envs::EnvSpec spec = probe->spec();

  Streams streams(cfg.seed);
  Policy pol = build_actor(spec, cfg, true);
  Vec actor = pol.init_params(streams.init);
  net::MlpConfig critic_cfg = build_critic_config(spec, cfg);
  RngStream critic_init = streams.init.split("critic");
  Vec critic = net::init_params(critic_cfg, critic_init);

  net::Optimizer actor_opt(cfg.actor_opt, pol.param_count());
  net::Optimizer critic_opt(cfg.critic_opt, critic_cfg.param_count());

  PpoWorkers workers;
  for (int e = 0; e < cfg.n_envs; ++e) {
    workers.envs.push_back(envs::make_env(cfg.env_id, cfg.max_episode_steps));
    workers.env_rngs.push_back(streams.env.split(static_cast<uint64_t>(e)));
    workers.states.push_back(workers.envs.back()->reset(workers.env_rngs.back()));
    workers.partial_returns.push_back(0.0);
  }

  reuse::ReplayBuffer buffer(cfg.buffer_capacity);
  double clip_uf = 1.0 + cfg.ppo_clip;  // replay ratio cap, PPO-consistent

  EstimatorConfig step_est = cfg.estimator;
  step_est.advantage_mode = gradients::AdvantageMode::gae;

  RunResult result;
  long episodes = 0;
  double last_mean_return = 0.0;
  net::ForwardTrace scratch;
  Vec one_cot(1);

  for (int k = 1; k <= cfg.iterations; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    Rollout roll = ppo_collect(workers, pol, actor, critic_cfg, critic,
                               streams.policy, cfg, k);
    episodes += roll.episodes_completed;
    if (roll.episodes_completed > 0)
      last_mean_return = roll.completed_return_sum / roll.episodes_completed;

    if (cfg.normalize_advantages) normalize_advantages(roll.transitions);

    IterationLog log;
    log.iteration = k;
    log.episodes = episodes;
    log.mean_return = last_mean_return;
    log.pg_var_trace = pg_trace_of_transitions(pol, actor, roll.transitions, step_est);
    log.est_var_trace = log.pg_var_trace;
    log.selected_iterations = {k};
    log.reuse_set_size = 1;

    // Historical replay pool (rule 3), current batch excluded.
    std::vector<const Sample*> replay;
    if (use_vrer) {
      reuse::GenerationRecord record;
      record.snapshot.iteration = k;
      record.snapshot.params = actor;
      record.samples = std::move(roll.transitions);
      buffer.insert(std::move(record));
      roll.transitions.clear();

      const auto& current = buffer.entries().back();
      reuse::ReuseSet selected =
          reuse::select_rule3(buffer, pol, actor, current.samples, k);
      log.reuse_set_size = static_cast<int>(selected.selected_iterations.size());
      log.selected_iterations = selected.selected_iterations;

      for (const auto& rec : buffer.entries()) {
        if (rec.snapshot.iteration == k) continue;
        bool in = false;
        for (int it : selected.selected_iterations)
          if (it == rec.snapshot.iteration) in = true;
        if (!in) continue;
        for (int j = 0; j < cfg.selection.n0; ++j) {
          size_t idx = static_cast<size_t>(streams.subsample.below(rec.samples.size()));
          replay.push_back(&rec.samples[idx]);
        }
      }
    }

    const std::vector<Sample>& batch =
        use_vrer ? buffer.entries().back().samples : roll.transitions;
    const std::vector<double>& targets = roll.returns;

    int mb_size = cfg.minibatch > 0 ? cfg.minibatch : cfg.n;
    std::vector<int> order(batch.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> replay_order(replay.size());
    std::iota(replay_order.begin(), replay_order.end(), 0);

    for (int epoch = 0; epoch < cfg.k_off; ++epoch) {
      fisher_yates(order, streams.shuffle);
      fisher_yates(replay_order, streams.shuffle);
      int n_minibatches = (static_cast<int>(order.size()) + mb_size - 1) / mb_size;

      for (int mb = 0; mb < n_minibatches; ++mb) {
        int lo = mb * mb_size;
        int hi = std::min<int>(lo + mb_size, static_cast<int>(order.size()));

        Vec actor_grad(actor.size(), 0.0);
        Vec critic_grad(critic.size(), 0.0);
        int actor_terms = 0;

        for (int i = lo; i < hi; ++i) {
          const Sample& s = batch[order[i]];
          const auto& tr = s.transition();
          double lp = pol.log_prob(actor, tr.state, tr.action);
          double ratio = std::exp(lp - s.behavior_loglik);
          bool clipped = (tr.advantage >= 0.0 && ratio > 1.0 + cfg.ppo_clip) ||
                         (tr.advantage < 0.0 && ratio < 1.0 - cfg.ppo_clip);
          if (!clipped)
            pol.score_accumulate(actor, tr.state, tr.action, actor_grad,
                                 ratio * tr.advantage);
          pol.entropy_accumulate(actor, tr.state, actor_grad, cfg.entropy_coef);
          ++actor_terms;

          double v = net::forward(critic_cfg, critic, tr.state, scratch)[0];
          one_cot[0] = v - targets[order[i]];
          net::backward_params_accumulate(critic_cfg, critic, scratch, one_cot,
                                          critic_grad);
        }

        // Replayed historical transitions: clipped per-transition ratios with
        // TD-residual advantages under the live critic.
        if (!replay.empty()) {
          int r_lo = mb * static_cast<int>(replay.size()) / n_minibatches;
          int r_hi = (mb + 1) * static_cast<int>(replay.size()) / n_minibatches;
          for (int i = r_lo; i < r_hi; ++i) {
            const Sample& s = *replay[replay_order[i]];
            const auto& tr = s.transition();
            double v = net::forward(critic_cfg, critic, tr.state, scratch)[0];
            double v_next = tr.done
                                ? 0.0
                                : net::forward(critic_cfg, critic, tr.next_state,
                                               scratch)[0];
            double adv = tr.reward + cfg.estimator.gamma * v_next - v;
            double lp = pol.log_prob(actor, tr.state, tr.action);
            double ratio = std::exp(lp - s.behavior_loglik);
            if (!std::isfinite(ratio)) continue;
            pol.score_accumulate(actor, tr.state, tr.action, actor_grad,
                                 std::min(ratio, clip_uf) * adv);
            ++actor_terms;
          }
        }

        if (actor_terms > 0) {
          for (double& g : actor_grad) g /= static_cast<double>(actor_terms);
          if (actor_opt.step(actor, actor_grad, true) ==
              net::StepStatus::rejected_nonfinite)
            ++log.rejected_steps;
        }
        int critic_terms = hi - lo;
        if (critic_terms > 0) {
          for (double& g : critic_grad) g /= static_cast<double>(critic_terms);
          if (critic_opt.step(critic, critic_grad, false) ==
              net::StepStatus::rejected_nonfinite)
            ++log.rejected_steps;
        }
      }
    }

    log.wall_ms = elapsed_ms(t0);
    result.logs.push_back(std::move(log));
    result.theta_history.push_back(actor);
  }
  result.final_params = actor;
  return result;
}

}  // namespace

RunResult run_ppo(const TrainConfig& cfg) { return run_ppo_impl(cfg, false); }

RunResult run_ppo_vrer(const TrainConfig& cfg) { return run_ppo_impl(cfg, true); }

RunResult run(const TrainConfig& cfg) {
  switch (cfg.algo) {
    case Algo::vpg: return run_vpg(cfg);
    case Algo::vpg_vrer: return run_vpg_vrer(cfg);
    case Algo::ppo: return run_ppo(cfg);
    case Algo::ppo_vrer: return run_ppo_vrer(cfg);
  }
  throw std::invalid_argument("run: bad algo");
}

FixedLrStudy fixed_lr_study(const TrainConfig& base) {
  TrainConfig cfg = base;
  cfg.env_id = "cartpole";
  cfg.actor_opt.kind = net::OptKind::sgd;
  cfg.actor_opt.schedule = net::LrSchedule::constant;
  if (cfg.max_episode_steps == 0) cfg.max_episode_steps = 100;
  cfg.selection.rule = reuse::SelectionRule::rule1;
  cfg.estimator.kind = EstimatorKind::mlr;

  FixedLrStudy study;
  TrainConfig vpg_cfg = cfg;
  vpg_cfg.algo = Algo::vpg;
  study.vpg = run_vpg(vpg_cfg);

  TrainConfig vrer_cfg = cfg;
  vrer_cfg.algo = Algo::vpg_vrer;
  study.vpg_vrer = run_vpg_vrer(vrer_cfg);
  return study;
}

}  // namespace vrer::train

#pragma once

#include <string>
#include <vector>

#include "vrer/envs.hpp"
#include "vrer/gradients.hpp"
#include "vrer/net.hpp"
#include "vrer/reuse.hpp"

namespace vrer::train {

enum class Algo { vpg, vpg_vrer, ppo, ppo_vrer };

std::string algo_name(Algo a);
Algo algo_from_name(const std::string& name);

struct TrainConfig {
  Algo algo = Algo::vpg;
  std::string env_id = "cartpole";
  int iterations = 2000;  // K
  int n = 4;              // new samples per iteration: episodes (VPG), transitions (PPO)
  int k_off = 1;          // offline optimization steps per iteration

  gradients::EstimatorConfig estimator;
  reuse::SelectionConfig selection;
  int buffer_capacity = 400;

  net::OptimizerConfig actor_opt{net::OptKind::adam, 0.005};
  net::OptimizerConfig critic_opt{net::OptKind::adam, 3e-4};

  uint64_t seed = 2021;
  double entropy_coef = 0.01;
  double ppo_clip = 0.2;
  int minibatch = 128;  // PPO minibatch size; 0 means the whole pool
  int n_envs = 4;
  int max_episode_steps = 0;  // 0 keeps the environment default
  bool normalize_advantages = true;
  double gaussian_std = 0.5;
  int hidden_units = 32;  // two hidden layers of this width

  void validate() const;
};

struct IterationLog {
  int iteration = 0;
  long episodes = 0;  // cumulative completed episodes
  double mean_return = 0.0;
  int reuse_set_size = 1;
  double pg_var_trace = 0.0;
  double est_var_trace = 0.0;
  std::vector<int> selected_iterations;
  double wall_ms = 0.0;

  // diagnostics kept out of the CSV schema
  double max_weight = 0.0;        // largest likelihood-ratio weight applied
  double max_weight_bound = 1.0;  // |U_k| at the time (MLR bound)
  int rejected_steps = 0;
  int disqualified_snapshots = 0;
};

struct RunResult {
  std::vector<IterationLog> logs;
  net::Vec final_params;
  // Actor parameter vector after every iteration; used by the degenerate
  // equivalence checks. theta_history[k] is the value entering iteration k+1.
  std::vector<net::Vec> theta_history;
};

RunResult run_vpg(const TrainConfig& config);
RunResult run_vpg_vrer(const TrainConfig& config);
RunResult run_ppo(const TrainConfig& config);
RunResult run_ppo_vrer(const TrainConfig& config);

// Dispatch on config.algo.
RunResult run(const TrainConfig& config);

struct FixedLrStudy {
  RunResult vpg;
  RunResult vpg_vrer;
};

// Side-by-side constant-learning-rate comparison: plain SGD, short horizon
// (episode cap 100), rule 1 selection with the MLR estimator.
FixedLrStudy fixed_lr_study(const TrainConfig& base);

}  // namespace vrer::train

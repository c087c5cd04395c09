#pragma once

#include <span>
#include <variant>
#include <vector>

#include "vrer/policy.hpp"

namespace vrer::gradients {

using net::Vec;
using policy::Policy;
using policy::PolicySnapshot;
using policy::Trajectory;

// --- samples ---

struct EpisodeSample {
  Trajectory steps;
};

struct TransitionSample {
  Vec state;
  Action action;
  double reward = 0.0;
  Vec next_state;
  bool done = false;
  // Advantage under the iteration's critic; set by the trainer before the
  // sample is fed to an estimator.
  double advantage = 0.0;
};

// Unified reuse unit: a full trajectory or a single state-action transition,
// with its log-likelihood under the policy that generated it cached at
// generation time (sum of per-step log pi for episodes, log pi for
// transitions; transition-density terms cancel in every ratio we form).
struct Sample {
  std::variant<EpisodeSample, TransitionSample> data;
  int origin_iteration = 0;
  double behavior_loglik = 0.0;

  bool is_episode() const { return std::holds_alternative<EpisodeSample>(data); }
  const Trajectory& episode() const { return std::get<EpisodeSample>(data).steps; }
  const TransitionSample& transition() const { return std::get<TransitionSample>(data); }
  TransitionSample& transition() { return std::get<TransitionSample>(data); }
};

enum class EstimatorKind { pg, ilr, mlr, clr };
enum class AdvantageMode { full_return, reward_to_go, gae };

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::pg;
  AdvantageMode advantage_mode = AdvantageMode::full_return;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_threshold = 2.0;  // U_f, clr only, must exceed 1

  void validate() const;
};

// --- returns / advantages ---

// Per-step scalar weights for an episode: full_return repeats the total
// discounted return at every step, reward_to_go uses the tail sums.
// gae needs a critic and is served by gae_advantages instead.
Vec episode_step_weights(const Trajectory& traj, const EstimatorConfig& cfg);

// Undiscounted episode return (what training curves report).
double episode_return(const Trajectory& traj);

// Standard lambda-weighted TD-residual advantages over one rollout segment.
// values has one entry per reward; bootstrap_value is V(s_{T+1}) and is
// ignored past terminal steps (terminated[t] true cuts the recursion).
Vec gae_advantages(std::span<const double> rewards, std::span<const double> values,
                   double bootstrap_value, std::span<const uint8_t> terminated,
                   double gamma, double lambda);

// --- scenario gradients ---

// Per-sample gradient term g_k(x): sum_t w_t * score(s_t, a_t) for episodes
// (w from episode_step_weights) or advantage * score(s, a) for transitions.
// Accumulates into grad scaled by `scale`.
void scenario_gradient_accumulate(const Policy& pol, const Vec& params,
                                  const Sample& sample, const EstimatorConfig& cfg,
                                  double scale, Vec& grad);
Vec scenario_gradient(const Policy& pol, const Vec& params, const Sample& sample,
                      const EstimatorConfig& cfg);

// Likelihood ratio rho_k / rho_i reduced to policy terms: exp of the target
// log-likelihood under `params` minus the cached behavioral log-likelihood.
// Overflow propagates as +inf; callers treat non-finite as disqualifying.
double likelihood_ratio(const Policy& pol, const Vec& params, const Sample& sample);

// --- estimators ---

struct SnapshotGroup {
  const PolicySnapshot* snapshot = nullptr;
  std::vector<const Sample*> samples;
};

struct GradientEstimate {
  Vec gradient;
  EstimatorKind kind = EstimatorKind::pg;
  int n_groups = 0;
  int n_per_group = 0;
  // Replication-level sample variance trace of the estimator terms
  // (the PG form when there is a single group).
  double variance_trace = 0.0;
  double max_weight = 0.0;      // largest likelihood-ratio weight applied
  int skipped_groups = 0;       // groups dropped for non-finite ratios
};

// Baseline on-policy estimator: mean scenario gradient over the new samples.
GradientEstimate estimate_pg(const Policy& pol, const Vec& params,
                             std::span<const Sample> new_samples,
                             const EstimatorConfig& cfg);

// Average individual-likelihood-ratio estimator over snapshot groups.
// g_k is always evaluated under `params` (the current policy).
GradientEstimate estimate_ilr(const Policy& pol, const Vec& params,
                              std::span<const SnapshotGroup> groups,
                              const EstimatorConfig& cfg);

// Clipped variant: each ratio replaced by min(ratio, U_f).
GradientEstimate estimate_clr(const Policy& pol, const Vec& params,
                              std::span<const SnapshotGroup> groups,
                              const EstimatorConfig& cfg);

// Mixture-likelihood-ratio estimator. The mixture is over the groups'
// snapshots, so the current iteration's group must be present
// (current_iteration names it); weights then obey f(x) <= |U_k|.
GradientEstimate estimate_mlr(const Policy& pol, const Vec& params,
                              std::span<const SnapshotGroup> groups,
                              int current_iteration, const EstimatorConfig& cfg);

}  // namespace vrer::gradients

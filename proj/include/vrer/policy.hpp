#pragma once

#include <span>
#include <utility>
#include <vector>

#include "vrer/action.hpp"
#include "vrer/net.hpp"
#include "vrer/rng.hpp"

namespace vrer::policy {

using net::Vec;

// One environment step as recorded in a trajectory.
struct TimeStep {
  Vec state;
  Action action;
  double reward = 0.0;
};

using Trajectory = std::vector<TimeStep>;

struct PolicyKind {
  enum class Type { categorical, gaussian };
  Type type = Type::categorical;
  int action_dim = 2;      // number of actions (categorical) or dims (gaussian)
  double fixed_std = 0.5;  // gaussian only, state-independent

  static PolicyKind categorical(int m) { return {Type::categorical, m, 0.0}; }
  static PolicyKind gaussian(int dim, double std) {
    return {Type::gaussian, dim, std};
  }
};

// Frozen parameters of a visited behavioral policy.
struct PolicySnapshot {
  int iteration = 0;
  Vec params;
};

// Stochastic policy over an MLP backbone. The object itself is an immutable
// description (architecture + distribution family); parameters are passed
// into each operation so snapshots can be re-evaluated at any time.
class Policy {
 public:
  Policy(net::MlpConfig net_config, PolicyKind kind);

  const net::MlpConfig& net_config() const { return net_; }
  const PolicyKind& kind() const { return kind_; }
  int param_count() const { return net_.param_count(); }

  Vec init_params(RngStream& rng) const { return net::init_params(net_, rng); }

  // Draws an action and returns log pi(a|s), bit-identical to what
  // log_prob would report for the same (state, action).
  std::pair<Action, double> sample_action(const Vec& params,
                                          std::span<const double> state,
                                          RngStream& rng) const;

  double log_prob(const Vec& params, std::span<const double> state,
                  const Action& action) const;

  // Exact score function grad_theta log pi(a|s).
  Vec score(const Vec& params, std::span<const double> state,
            const Action& action) const;
  // grad += scale * score(s, a)
  void score_accumulate(const Vec& params, std::span<const double> state,
                        const Action& action, Vec& grad, double scale = 1.0) const;

  // Sum over steps of log pi(a_t|s_t). Transition and initial-state terms
  // are excluded; they cancel in every likelihood ratio formed downstream.
  double trajectory_log_likelihood(const Vec& params, const Trajectory& traj) const;

  // Distribution entropy at a state; grad += scale * d entropy / d theta.
  // Constant for fixed-std gaussians, so nothing is accumulated there.
  double entropy_accumulate(const Vec& params, std::span<const double> state,
                            Vec& grad, double scale) const;

  // Action probabilities (categorical only), stability-shifted softmax.
  Vec action_probabilities(const Vec& params, std::span<const double> state) const;

 private:
  // Log-softmax of logits at index a, with max-subtraction.
  static double log_softmax_at(const Vec& logits, int a);
  double gaussian_log_prob(const Vec& mean, const Vec& action) const;

  net::MlpConfig net_;
  PolicyKind kind_;
};

}  // namespace vrer::policy

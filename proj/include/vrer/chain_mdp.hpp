#pragma once

#include <functional>
#include <vector>

namespace vrer {

// Tiny enumerable MDP used as an exact-gradient oracle substrate.
struct ChainMdpSpec {
  int n_states = 2;
  int n_actions = 2;
  int horizon = 2;
  // transition_probs[s][a][s'], rewards[s][a], initial_dist[s]
  std::vector<std::vector<std::vector<double>>> transition_probs;
  std::vector<std::vector<double>> rewards;
  std::vector<double> initial_dist;

  void validate() const;  // rows sum to 1 +- 1e-12, sizes consistent

  // Deterministic two-state chain where one action is strictly better;
  // used as the default for the "chain" environment id.
  static ChainMdpSpec default_spec();
};

// One enumerated trajectory: visited states s_1..s_{H+1} and actions a_1..a_H.
struct EnumeratedTrajectory {
  std::vector<int> states;
  std::vector<int> actions;
  double probability = 0.0;
  double discounted_return = 0.0;
};

// Action probabilities for a given state index.
using StatePolicy = std::function<std::vector<double>(int state)>;

// Exhaustive trajectory list with exact probabilities per the trajectory
// density (initial x prod pi x transition) and discounted returns.
// Refuses when the trajectory count would exceed 10^6.
std::vector<EnumeratedTrajectory> enumerate_trajectories(const ChainMdpSpec& spec,
                                                         const StatePolicy& policy,
                                                         double gamma = 1.0);

// Exact objective mu(theta) = sum_tau P(tau) R(tau) over the enumeration.
double enumerate_objective(const ChainMdpSpec& spec, const StatePolicy& policy,
                           double gamma = 1.0);

}  // namespace vrer

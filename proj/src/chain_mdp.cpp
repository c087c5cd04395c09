#include "vrer/chain_mdp.hpp"

#include <cmath>
#include <stdexcept>

namespace vrer {

void ChainMdpSpec::validate() const {
  if (n_states < 1 || n_actions < 1 || horizon < 1)
    throw std::invalid_argument("ChainMdpSpec: dimensions must be positive");
  auto check_row = [](const std::vector<double>& row, const char* what) {
    double sum = 0.0;
    for (double p : row) {
      if (p < 0.0) throw std::invalid_argument(std::string(what) + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument(std::string(what) + ": row does not sum to 1");
  };
  if (static_cast<int>(initial_dist.size()) != n_states)
    throw std::invalid_argument("ChainMdpSpec: initial_dist size");
  check_row(initial_dist, "initial_dist");
  if (static_cast<int>(transition_probs.size()) != n_states ||
      static_cast<int>(rewards.size()) != n_states)
    throw std::invalid_argument("ChainMdpSpec: table sizes");
  for (int s = 0; s < n_states; ++s) {
    if (static_cast<int>(transition_probs[s].size()) != n_actions ||
        static_cast<int>(rewards[s].size()) != n_actions)
      throw std::invalid_argument("ChainMdpSpec: table sizes");
    for (int a = 0; a < n_actions; ++a) {
      if (static_cast<int>(transition_probs[s][a].size()) != n_states)
        throw std::invalid_argument("ChainMdpSpec: transition row size");
      check_row(transition_probs[s][a], "transition_probs");
    }
  }
}

ChainMdpSpec ChainMdpSpec::default_spec() {
  ChainMdpSpec spec;
  spec.n_states = 2;
  spec.n_actions = 2;
  spec.horizon = 4;
  // action 0 stays, action 1 moves to the other state and pays 1
  spec.transition_probs = {
      {{1.0, 0.0}, {0.0, 1.0}},
      {{0.0, 1.0}, {1.0, 0.0}},
  };
  spec.rewards = {{0.0, 1.0}, {0.0, 1.0}};
  spec.initial_dist = {1.0, 0.0};
  return spec;
}

std::vector<EnumeratedTrajectory> enumerate_trajectories(const ChainMdpSpec& spec,
                                                         const StatePolicy& policy,
                                                         double gamma) {
  spec.validate();
  double count = 0.0;
  for (int s = 0; s < spec.n_states; ++s)
    if (spec.initial_dist[s] > 0.0) count += 1.0;
  count *= std::pow(static_cast<double>(spec.n_states * spec.n_actions),
                    static_cast<double>(spec.horizon));
  if (count > 1e6)
    throw std::invalid_argument("enumerate_trajectories: state space too large");

  std::vector<std::vector<double>> probs(spec.n_states);
  for (int s = 0; s < spec.n_states; ++s) {
    probs[s] = policy(s);
    if (static_cast<int>(probs[s].size()) != spec.n_actions)
      throw std::invalid_argument("enumerate_trajectories: policy size mismatch");
  }

  std::vector<EnumeratedTrajectory> out;
  EnumeratedTrajectory cur;

  std::function<void(int, int, double, double)> recurse =
      [&](int t, int state, double prob, double ret) {
        if (prob == 0.0) return;
        if (t == spec.horizon) {
          cur.probability = prob;
          cur.discounted_return = ret;
          out.push_back(cur);
          return;
        }
        for (int a = 0; a < spec.n_actions; ++a) {
          double pa = probs[state][a];
          if (pa == 0.0) continue;
          double r = spec.rewards[state][a];
          cur.actions.push_back(a);
          for (int ns = 0; ns < spec.n_states; ++ns) {
            double pt = spec.transition_probs[state][a][ns];
            if (pt == 0.0) continue;
            cur.states.push_back(ns);
            recurse(t + 1, ns, prob * pa * pt, ret + std::pow(gamma, t) * r);
            cur.states.pop_back();
          }
          cur.actions.pop_back();
        }
      };

  for (int s0 = 0; s0 < spec.n_states; ++s0) {
    if (spec.initial_dist[s0] == 0.0) continue;
    cur.states.assign(1, s0);
    cur.actions.clear();
    recurse(0, s0, spec.initial_dist[s0], 0.0);
  }
  return out;
}

double enumerate_objective(const ChainMdpSpec& spec, const StatePolicy& policy,
                           double gamma) {
  double mu = 0.0;
  for (const auto& traj : enumerate_trajectories(spec, policy, gamma))
    mu += traj.probability * traj.discounted_return;
  return mu;
}

}  // namespace vrer

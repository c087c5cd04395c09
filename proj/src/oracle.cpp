#include "vrer/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace vrer::oracle {

Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                               const Vec& params, double h) {
  Vec grad(params.size(), 0.0);
  Vec p = params;
  for (size_t i = 0; i < params.size(); ++i) {
    double orig = p[i];
    p[i] = orig + h;
    double fp = f(p);
    p[i] = orig - h;
    double fm = f(p);
    p[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

namespace {

Vec one_hot(int s, int n) {
  Vec v(n, 0.0);
  v[s] = 1.0;
  return v;
}

StatePolicy policy_table(const ChainMdpSpec& spec, const policy::Policy& pol,
                         const Vec& params) {
  std::vector<std::vector<double>> table(spec.n_states);
  for (int s = 0; s < spec.n_states; ++s)
    table[s] = pol.action_probabilities(params, one_hot(s, spec.n_states));
  return [table](int s) { return table[s]; };
}

policy::Trajectory to_trajectory(const ChainMdpSpec& spec,
                                 const EnumeratedTrajectory& traj) {
  policy::Trajectory steps;
  steps.reserve(traj.actions.size());
  for (size_t t = 0; t < traj.actions.size(); ++t) {
    policy::TimeStep ts;
    ts.state = one_hot(traj.states[t], spec.n_states);
    ts.action = Action{traj.actions[t]};
    ts.reward = spec.rewards[traj.states[t]][traj.actions[t]];
    steps.push_back(std::move(ts));
  }
  return steps;
}

}  // namespace

double chain_objective(const ChainMdpSpec& spec, const policy::Policy& pol,
                       const Vec& params, double gamma) {
  return enumerate_objective(spec, policy_table(spec, pol, params), gamma);
}

Vec chain_exact_gradient(const ChainMdpSpec& spec, const policy::Policy& pol,
                         const Vec& params, double gamma) {
  auto trajectories = enumerate_trajectories(spec, policy_table(spec, pol, params), gamma);
  Vec grad(params.size(), 0.0);
  for (const auto& traj : trajectories) {
    double weight = traj.probability * traj.discounted_return;
    if (weight == 0.0) continue;
    for (size_t t = 0; t < traj.actions.size(); ++t)
      pol.score_accumulate(params, one_hot(traj.states[t], spec.n_states),
                           Action{traj.actions[t]}, grad, weight);
  }
  return grad;
}

gradients::Sample chain_sample(const ChainMdpSpec& spec, const policy::Policy& pol,
                               const Vec& behavior_params,
                               const EnumeratedTrajectory& traj,
                               int origin_iteration) {
  gradients::Sample s;
  gradients::EpisodeSample ep{to_trajectory(spec, traj)};
  s.behavior_loglik = pol.trajectory_log_likelihood(behavior_params, ep.steps);
  s.data = std::move(ep);
  s.origin_iteration = origin_iteration;
  return s;
}

gradients::Sample sample_chain_episode(const ChainMdpSpec& spec,
                                       const policy::Policy& pol,
                                       const Vec& behavior_params, RngStream& rng,
                                       int origin_iteration) {
  policy::Trajectory traj;
  double loglik = 0.0;
  int state = rng.categorical(spec.initial_dist);
  for (int t = 0; t < spec.horizon; ++t) {
    Vec obs = one_hot(state, spec.n_states);
    auto [action, lp] = pol.sample_action(behavior_params, obs, rng);
    int a = discrete(action);
    loglik += lp;
    traj.push_back({std::move(obs), action, spec.rewards[state][a]});
    state = rng.categorical(spec.transition_probs[state][a]);
  }
  gradients::Sample s;
  s.data = gradients::EpisodeSample{std::move(traj)};
  s.origin_iteration = origin_iteration;
  s.behavior_loglik = loglik;
  return s;
}

MeanSe mean_se(std::span<const double> xs) {
  MeanSe out;
  size_t m = xs.size();
  if (m == 0) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(m);
  if (m < 2) return out;
  double ss = 0.0;
  for (double x : xs) {
    double d = x - out.mean;
    ss += d * d;
  }
  out.se = std::sqrt(ss) / std::sqrt(static_cast<double>(m - 1) * static_cast<double>(m));
  return out;
}

double bootstrap_mean_quantile(std::span<const double> xs, double quantile,
                               int resamples, RngStream& rng) {
  std::vector<double> means(resamples);
  for (int r = 0; r < resamples; ++r) {
    double acc = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) acc += xs[rng.below(xs.size())];
    means[r] = acc / static_cast<double>(xs.size());
  }
  std::sort(means.begin(), means.end());
  double pos = quantile * static_cast<double>(resamples - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min<size_t>(lo + 1, means.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return means[lo] * (1.0 - frac) + means[hi] * frac;
}

}  // namespace vrer::oracle

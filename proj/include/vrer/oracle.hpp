#pragma once

#include <functional>
#include <vector>

#include "vrer/chain_mdp.hpp"
#include "vrer/gradients.hpp"
#include "vrer/policy.hpp"

namespace vrer::oracle {

using net::Vec;

// Central finite differences of a scalar function of the parameter vector.
Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                               const Vec& params, double h);

// Exact objective mu(theta) on an enumerable MDP under a categorical policy
// over one-hot state features.
double chain_objective(const ChainMdpSpec& spec, const policy::Policy& pol,
                       const Vec& params, double gamma);

// Exact policy gradient via full enumeration:
//   sum_tau P(tau) R(tau) sum_t score(s_t, a_t).
Vec chain_exact_gradient(const ChainMdpSpec& spec, const policy::Policy& pol,
                         const Vec& params, double gamma);

// An enumerated trajectory converted to the sample format, with its
// log-likelihood under the given behavioral parameters cached.
gradients::Sample chain_sample(const ChainMdpSpec& spec, const policy::Policy& pol,
                               const Vec& behavior_params,
                               const EnumeratedTrajectory& traj, int origin_iteration);

// Draws one trajectory by simulating the chain under the policy.
gradients::Sample sample_chain_episode(const ChainMdpSpec& spec,
                                       const policy::Policy& pol,
                                       const Vec& behavior_params, RngStream& rng,
                                       int origin_iteration);

// Mean and standard error of a scalar sample.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(std::span<const double> xs);

// Percentile bootstrap over scalar observations; returns the requested
// lower quantile of resampled means.
double bootstrap_mean_quantile(std::span<const double> xs, double quantile,
                               int resamples, RngStream& rng);

}  // namespace vrer::oracle

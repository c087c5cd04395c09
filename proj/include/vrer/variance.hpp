#pragma once

#include <span>
#include <vector>

namespace vrer::variance {

using Vec = std::vector<double>;

struct VarianceTrace {
  double trace = 0.0;
  int n_used = 0;
};

// (1/(n-1)) sum_j ||v_j - mean||^2: the trace of the sample covariance.
// Only the trace is ever formed; the d x d matrix never materializes.
double sample_variance_trace(std::span<const Vec> vectors);

// Trace estimate for the on-policy PG estimator from the new samples'
// scenario gradients.
VarianceTrace pg_variance_trace(std::span<const Vec> scenario_gradients);

// Trace estimate for one snapshot's ILR estimator from its ratio-weighted
// scenario gradients f * g; the centering term is their mean, which is the
// snapshot's ILR estimate.
VarianceTrace ilr_variance_trace(std::span<const Vec> weighted_gradients);

}  // namespace vrer::variance

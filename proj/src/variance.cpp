#include "vrer/variance.hpp"

#include <stdexcept>

namespace vrer::variance {

double sample_variance_trace(std::span<const Vec> vectors) {
  size_t n = vectors.size();
  if (n < 2) throw std::invalid_argument("variance trace: need at least 2 vectors");
  size_t d = vectors[0].size();
  for (const Vec& v : vectors)
    if (v.size() != d) throw std::invalid_argument("variance trace: length mismatch");

  Vec mean(d, 0.0);
  for (const Vec& v : vectors)
    for (size_t c = 0; c < d; ++c) mean[c] += v[c];
  for (double& m : mean) m /= static_cast<double>(n);

  double trace = 0.0;
  for (const Vec& v : vectors) {
    double norm2 = 0.0;
    for (size_t c = 0; c < d; ++c) {
      double dev = v[c] - mean[c];
      norm2 += dev * dev;
    }
    trace += norm2;
  }
  return trace / static_cast<double>(n - 1);
}

VarianceTrace pg_variance_trace(std::span<const Vec> scenario_gradients) {
  return {sample_variance_trace(scenario_gradients),
          static_cast<int>(scenario_gradients.size())};
}

VarianceTrace ilr_variance_trace(std::span<const Vec> weighted_gradients) {
  return {sample_variance_trace(weighted_gradients),
          static_cast<int>(weighted_gradients.size())};
}

}  // namespace vrer::variance

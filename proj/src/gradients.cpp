#include "vrer/gradients.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace vrer::gradients {

void EstimatorConfig::validate() const {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw std::invalid_argument("EstimatorConfig: gamma must be in (0,1)");
  if (gae_lambda < 0.0 || gae_lambda > 1.0)
    throw std::invalid_argument("EstimatorConfig: lambda must be in [0,1]");
  if (kind == EstimatorKind::clr && clip_threshold <= 1.0)
    throw std::invalid_argument("EstimatorConfig: clip threshold U_f must exceed 1");
}

Vec episode_step_weights(const Trajectory& traj, const EstimatorConfig& cfg) {
  if (traj.empty()) throw std::invalid_argument("episode_step_weights: empty episode");
  if (cfg.advantage_mode == AdvantageMode::gae)
    throw std::invalid_argument("episode_step_weights: gae needs a critic");

  size_t h = traj.size();
  Vec weights(h, 0.0);
  if (cfg.advantage_mode == AdvantageMode::full_return) {
    double total = 0.0;
    double discount = 1.0;
    for (size_t t = 0; t < h; ++t) {
      total += discount * traj[t].reward;
      discount *= cfg.gamma;
    }
    for (double& w : weights) w = total;
  } else {
    double tail = 0.0;
    for (size_t t = h; t-- > 0;) {
      tail = traj[t].reward + cfg.gamma * tail;
      weights[t] = tail;
    }
  }
  return weights;
}

double episode_return(const Trajectory& traj) {
  double total = 0.0;
  for (const auto& ts : traj) total += ts.reward;
  return total;
}

Vec gae_advantages(std::span<const double> rewards, std::span<const double> values,
                   double bootstrap_value, std::span<const uint8_t> terminated,
                   double gamma, double lambda) {
  size_t n = rewards.size();
  if (values.size() != n || terminated.size() != n)
    throw std::invalid_argument("gae_advantages: length mismatch");
  Vec adv(n, 0.0);
  double running = 0.0;
  for (size_t t = n; t-- > 0;) {
    double next_value = (t + 1 < n) ? values[t + 1] : bootstrap_value;
    double not_done = terminated[t] ? 0.0 : 1.0;
    double delta = rewards[t] + gamma * next_value * not_done - values[t];
    running = delta + gamma * lambda * not_done * running;
    adv[t] = running;
  }
  return adv;
}

void scenario_gradient_accumulate(const Policy& pol, const Vec& params,
                                  const Sample& sample, const EstimatorConfig& cfg,
                                  double scale, Vec& grad) {
  if (sample.is_episode()) {
    const Trajectory& traj = sample.episode();
    Vec weights = episode_step_weights(traj, cfg);
    for (size_t t = 0; t < traj.size(); ++t)
      pol.score_accumulate(params, traj[t].state, traj[t].action, grad,
                           weights[t] * scale);
  } else {
    const TransitionSample& tr = sample.transition();
    pol.score_accumulate(params, tr.state, tr.action, grad, tr.advantage * scale);
  }
}

Vec scenario_gradient(const Policy& pol, const Vec& params, const Sample& sample,
                      const EstimatorConfig& cfg) {
  Vec grad(params.size(), 0.0);
  scenario_gradient_accumulate(pol, params, sample, cfg, 1.0, grad);
  return grad;
}

double likelihood_ratio(const Policy& pol, const Vec& params, const Sample& sample) {
  double target = sample.is_episode()
                      ? pol.trajectory_log_likelihood(params, sample.episode())
                      : pol.log_prob(params, sample.transition().state,
                                     sample.transition().action);
  return std::exp(target - sample.behavior_loglik);
}

namespace {

// Shared accumulation for all four estimators. weight_fn yields the
// likelihood-ratio weight of sample j in group i; groups whose weights are
// not all finite are dropped from the estimate. Replications are reduced in
// group order so results are bitwise reproducible.
GradientEstimate weighted_estimate(
    const Policy& pol, const Vec& params, std::span<const SnapshotGroup> groups,
    const EstimatorConfig& cfg, EstimatorKind kind,
    const std::function<double(size_t, size_t, const Sample&)>& weight_fn) {
  if (groups.empty()) throw std::invalid_argument("estimate: empty reuse set");
  size_t n = groups[0].samples.size();
  if (n == 0) throw std::invalid_argument("estimate: empty sample group");
  for (const auto& g : groups)
    if (g.samples.size() != n)
      throw std::invalid_argument("estimate: groups must have equal sample counts");

  size_t d = params.size();
  GradientEstimate est;
  est.kind = kind;
  est.n_per_group = static_cast<int>(n);

  // lambda_j = sum over kept groups of w_ij * g(x_ij)
  std::vector<Vec> lambda(n, Vec(d, 0.0));
  std::vector<double> w(n);
  int kept = 0;

  for (size_t i = 0; i < groups.size(); ++i) {
    bool ok = true;
    for (size_t j = 0; j < n; ++j) {
      w[j] = weight_fn(i, j, *groups[i].samples[j]);
      if (!std::isfinite(w[j])) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++est.skipped_groups;
      continue;
    }
    for (size_t j = 0; j < n; ++j) {
      scenario_gradient_accumulate(pol, params, *groups[i].samples[j], cfg, w[j],
                                   lambda[j]);
      est.max_weight = std::max(est.max_weight, w[j]);
    }
    ++kept;
  }

  est.n_groups = kept;
  est.gradient.assign(d, 0.0);
  if (kept == 0) return est;  // caller rejects; nothing finite to average

  double denom = static_cast<double>(kept) * static_cast<double>(n);
  for (size_t j = 0; j < n; ++j)
    for (size_t c = 0; c < d; ++c) est.gradient[c] += lambda[j][c];
  for (size_t c = 0; c < d; ++c) est.gradient[c] /= denom;

  // Replication-level variance: rep_j = lambda_j / kept, centered at their
  // mean; reduces to the classical PG sample variance when kept == 1.
  if (n >= 2) {
    double gk = static_cast<double>(kept);
    double trace = 0.0;
    for (size_t j = 0; j < n; ++j) {
      double norm2 = 0.0;
      for (size_t c = 0; c < d; ++c) {
        double dev = lambda[j][c] / gk - est.gradient[c];
        norm2 += dev * dev;
      }
      trace += norm2;
    }
    est.variance_trace = trace / static_cast<double>(n - 1);
  }
  return est;
}

}  // namespace

GradientEstimate estimate_pg(const Policy& pol, const Vec& params,
                             std::span<const Sample> new_samples,
                             const EstimatorConfig& cfg) {
  if (new_samples.empty()) throw std::invalid_argument("estimate_pg: empty sample set");
  SnapshotGroup group;
  group.samples.reserve(new_samples.size());
  for (const Sample& s : new_samples) group.samples.push_back(&s);
  std::span<const SnapshotGroup> groups(&group, 1);
  return weighted_estimate(pol, params, groups, cfg, EstimatorKind::pg,
                           [](size_t, size_t, const Sample&) { return 1.0; });
}

GradientEstimate estimate_ilr(const Policy& pol, const Vec& params,
                              std::span<const SnapshotGroup> groups,
                              const EstimatorConfig& cfg) {
  return weighted_estimate(pol, params, groups, cfg, EstimatorKind::ilr,
                           [&](size_t, size_t, const Sample& s) {
                             return likelihood_ratio(pol, params, s);
                           });
}

GradientEstimate estimate_clr(const Policy& pol, const Vec& params,
                              std::span<const SnapshotGroup> groups,
                              const EstimatorConfig& cfg) {
  double uf = cfg.clip_threshold;
  if (uf <= 1.0) throw std::invalid_argument("estimate_clr: U_f must exceed 1");
  return weighted_estimate(pol, params, groups, cfg, EstimatorKind::clr,
                           [&](size_t, size_t, const Sample& s) {
                             return std::min(likelihood_ratio(pol, params, s), uf);
                           });
}

GradientEstimate estimate_mlr(const Policy& pol, const Vec& params,
                              std::span<const SnapshotGroup> groups,
                              int current_iteration, const EstimatorConfig& cfg) {
  bool has_current = false;
  for (const auto& g : groups)
    if (g.snapshot && g.snapshot->iteration == current_iteration) has_current = true;
  if (!has_current)
    throw std::invalid_argument("estimate_mlr: current policy missing from reuse set");

  double size_u = static_cast<double>(groups.size());
  auto mixture_weight = [&](size_t gi, size_t, const Sample& s) {
    double target = s.is_episode()
                        ? pol.trajectory_log_likelihood(params, s.episode())
                        : pol.log_prob(params, s.transition().state,
                                       s.transition().action);
    // Mixture components: cached log-likelihood under the sample's own
    // snapshot, recomputed under every other one.
    double max_l = -std::numeric_limits<double>::infinity();
    std::vector<double> logliks(groups.size());
    for (size_t j = 0; j < groups.size(); ++j) {
      double l;
      if (j == gi) {
        l = s.behavior_loglik;
      } else if (s.is_episode()) {
        l = pol.trajectory_log_likelihood(groups[j].snapshot->params, s.episode());
      } else {
        l = pol.log_prob(groups[j].snapshot->params, s.transition().state,
                         s.transition().action);
      }
      logliks[j] = l;
      max_l = std::max(max_l, l);
    }
    double sum = 0.0;
    for (double l : logliks) sum += std::exp(l - max_l);
    double lse = max_l + std::log(sum);
    // f = |U| * exp(target - lse); the exponent is <= 0 whenever the target
    // density is one of the mixture components, so f <= |U| holds exactly.
    return size_u * std::exp(target - lse);
  };
  return weighted_estimate(pol, params, groups, cfg, EstimatorKind::mlr,
                           mixture_weight);
}

}  // namespace vrer::gradients

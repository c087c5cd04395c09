#include "vrer/reuse.hpp"

#include <cmath>
#include <stdexcept>

#include "vrer/variance.hpp"

namespace vrer::reuse {

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 0) throw std::invalid_argument("ReplayBuffer: negative capacity");
}

void ReplayBuffer::insert(GenerationRecord record) {
  if (!entries_.empty() &&
      record.snapshot.iteration <= entries_.back().snapshot.iteration)
    throw std::invalid_argument("ReplayBuffer: out-of-order insertion");
  entries_.push_back(std::move(record));
  if (capacity_ > 0)
    while (entries_.size() > static_cast<size_t>(capacity_)) entries_.pop_front();
}

void SelectionConfig::validate() const {
  if (rule != SelectionRule::rule3 && c <= 1.0)
    throw std::invalid_argument("SelectionConfig: c must exceed 1");
  if (n0 < 1) throw std::invalid_argument("SelectionConfig: n0 must be positive");
}

namespace {

void require_episode_samples(std::span<const Sample> samples, const char* rule) {
  for (const Sample& s : samples)
    if (!s.is_episode())
      throw std::invalid_argument(std::string(rule) + ": episode-based reuse only");
}

// theta_k - theta_i dotted with a score vector.
double nu_dot(const Vec& params, const Vec& snapshot_params, const Vec& score) {
  double acc = 0.0;
  for (size_t c = 0; c < params.size(); ++c)
    acc += (params[c] - snapshot_params[c]) * score[c];
  return acc;
}

}  // namespace

ReuseSet select_rule1(const ReplayBuffer& buffer, const Policy& pol, const Vec& params,
                      std::span<const Sample> new_samples, int current_iteration,
                      double c, const gradients::EstimatorConfig& est) {
  if (new_samples.size() < 2)
    throw std::invalid_argument("select_rule1: need at least 2 new samples");
  require_episode_samples(new_samples, "select_rule1");

  std::vector<Vec> new_grads;
  new_grads.reserve(new_samples.size());
  for (const Sample& s : new_samples)
    new_grads.push_back(gradients::scenario_gradient(pol, params, s, est));
  double pg_trace = variance::sample_variance_trace(new_grads);

  ReuseSet out;
  std::vector<Vec> weighted;
  for (const GenerationRecord& rec : buffer.entries()) {
    if (rec.snapshot.iteration == current_iteration) {
      out.selected_iterations.push_back(rec.snapshot.iteration);
      continue;
    }
    weighted.clear();
    bool finite = true;
    for (const Sample& s : rec.samples) {
      double w = gradients::likelihood_ratio(pol, params, s);
      if (!std::isfinite(w)) {
        finite = false;
        break;
      }
      Vec g(params.size(), 0.0);
      gradients::scenario_gradient_accumulate(pol, params, s, est, w, g);
      weighted.push_back(std::move(g));
    }
    if (!finite) {
      ++out.disqualified;
      continue;
    }
    if (weighted.size() < 2) continue;  // variance undefined, skip
    double ilr_trace = variance::sample_variance_trace(weighted);
    if (ilr_trace <= c * pg_trace)
      out.selected_iterations.push_back(rec.snapshot.iteration);
  }
  return out;
}

ReuseSet select_rule2(const ReplayBuffer& buffer, const Policy& pol, const Vec& params,
                      std::span<const Sample> new_samples, int current_iteration,
                      double c, const gradients::EstimatorConfig& est) {
  size_t n = new_samples.size();
  if (n < 2) throw std::invalid_argument("select_rule2: need at least 2 new samples");
  require_episode_samples(new_samples, "select_rule2");

  // Scores and scenario gradients of the new samples are computed once and
  // reused for every candidate snapshot.
  std::vector<Vec> scores(n);
  std::vector<Vec> grads(n);
  for (size_t j = 0; j < n; ++j) {
    scores[j].assign(params.size(), 0.0);
    for (const auto& ts : new_samples[j].episode())
      pol.score_accumulate(params, ts.state, ts.action, scores[j]);
    grads[j] = gradients::scenario_gradient(pol, params, new_samples[j], est);
  }

  size_t d = params.size();
  Vec mean_grad(d, 0.0);
  for (const Vec& g : grads)
    for (size_t k = 0; k < d; ++k) mean_grad[k] += g[k];
  for (double& v : mean_grad) v /= static_cast<double>(n);

  double mean_norm2 = 0.0;
  for (double v : mean_grad) mean_norm2 += v * v;

  std::vector<double> grad_norm2(n, 0.0);
  double denom = 0.0;  // sum_j ||g_j - mean||^2
  for (size_t j = 0; j < n; ++j) {
    double dev2 = 0.0;
    for (size_t k = 0; k < d; ++k) {
      grad_norm2[j] += grads[j][k] * grads[j][k];
      double dev = grads[j][k] - mean_grad[k];
      dev2 += dev * dev;
    }
    denom += dev2;
  }

  ReuseSet out;
  for (const GenerationRecord& rec : buffer.entries()) {
    if (rec.snapshot.iteration == current_iteration) {
      out.selected_iterations.push_back(rec.snapshot.iteration);
      continue;
    }
    bool all_zero = true;
    double numer = 0.0;
    bool finite = true;
    for (size_t j = 0; j < n; ++j) {
      double nu = nu_dot(params, rec.snapshot.params, scores[j]);
      if (nu != 0.0) all_zero = false;
      double inflation = std::exp(nu + nu * nu);
      if (!std::isfinite(inflation)) {
        finite = false;
        break;
      }
      numer += inflation * grad_norm2[j];
    }
    if (!finite) {
      ++out.disqualified;
      continue;
    }
    // nu identically zero means the approximated ratio collapses to 1,
    // which passes for any c > 1, whatever the denominator.
    if (all_zero) {
      out.selected_iterations.push_back(rec.snapshot.iteration);
      continue;
    }
    if (denom <= 0.0) continue;  // degenerate spread: keep current only
    numer -= static_cast<double>(n) * mean_norm2;
    if (numer <= c * denom)
      out.selected_iterations.push_back(rec.snapshot.iteration);
  }
  return out;
}

ReuseSet select_rule3(const ReplayBuffer& buffer, const Policy& pol, const Vec& params,
                      std::span<const Sample> new_samples, int current_iteration) {
  if (new_samples.empty())
    throw std::invalid_argument("select_rule3: need new samples");
  for (const Sample& s : new_samples)
    if (s.is_episode())
      throw std::invalid_argument("select_rule3: step-based reuse only");

  // nu_bar is linear in the score, so averaging scores first gives the
  // mean of nu over the batch with a single dot product per candidate.
  Vec mean_score(params.size(), 0.0);
  for (const Sample& s : new_samples)
    pol.score_accumulate(params, s.transition().state, s.transition().action,
                         mean_score);
  for (double& v : mean_score) v /= static_cast<double>(new_samples.size());

  ReuseSet out;
  for (const GenerationRecord& rec : buffer.entries()) {
    if (rec.snapshot.iteration == current_iteration) {
      out.selected_iterations.push_back(rec.snapshot.iteration);
      continue;
    }
    double nu = nu_dot(params, rec.snapshot.params, mean_score);
    // exp(nu + nu^2) <= 1 compared in log space; boundary inclusive.
    if (nu + nu * nu <= 0.0)
      out.selected_iterations.push_back(rec.snapshot.iteration);
  }
  return out;
}

std::vector<SnapshotGroup> subsample_pool(const ReplayBuffer& buffer,
                                          const ReuseSet& selected,
                                          const SelectionConfig& cfg, RngStream& rng) {
  std::vector<SnapshotGroup> pool;
  pool.reserve(selected.selected_iterations.size());
  for (const GenerationRecord& rec : buffer.entries()) {
    bool in = false;
    for (int it : selected.selected_iterations)
      if (it == rec.snapshot.iteration) in = true;
    if (!in) continue;
    if (rec.samples.empty())
      throw std::invalid_argument("subsample_pool: selected snapshot has no samples");

    SnapshotGroup group;
    group.snapshot = &rec.snapshot;
    if (!cfg.resample) {
      for (const Sample& s : rec.samples) group.samples.push_back(&s);
    } else {
      group.samples.reserve(cfg.n0);
      for (int j = 0; j < cfg.n0; ++j) {
        size_t idx = static_cast<size_t>(rng.below(rec.samples.size()));
        group.samples.push_back(&rec.samples[idx]);
      }
    }
    pool.push_back(std::move(group));
  }
  return pool;
}

}  // namespace vrer::reuse

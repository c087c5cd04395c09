#include "vrer/policy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vrer::policy {

namespace {
// Per-thread scratch keeps the hot paths allocation-free.
thread_local net::ForwardTrace tls_trace;
thread_local Vec tls_cot;
}  // namespace

Policy::Policy(net::MlpConfig net_config, PolicyKind kind)
    : net_(std::move(net_config)), kind_(kind) {
  net_.validate();
  if (net_.output_dim() != kind_.action_dim)
    throw std::invalid_argument("Policy: net output dim must match action dim");
  if (kind_.type == PolicyKind::Type::gaussian && kind_.fixed_std <= 0.0)
    throw std::invalid_argument("Policy: gaussian std must be positive");
  if (kind_.type == PolicyKind::Type::categorical && kind_.action_dim < 2)
    throw std::invalid_argument("Policy: categorical needs >= 2 actions");
}

double Policy::log_softmax_at(const Vec& logits, int a) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  return logits[a] - m - std::log(sum);
}

std::pair<Action, double> Policy::sample_action(const Vec& params,
                                                std::span<const double> state,
                                                RngStream& rng) const {
  const Vec& out = net::forward(net_, params, state, tls_trace);
  for (double v : out)
    if (!std::isfinite(v)) throw std::runtime_error("sample_action: non-finite net output");

  if (kind_.type == PolicyKind::Type::categorical) {
    double m = out[0];
    for (double v : out) m = std::max(m, v);
    Vec probs(out.size());
    double sum = 0.0;
    for (size_t i = 0; i < out.size(); ++i) {
      probs[i] = std::exp(out[i] - m);
      sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    int a = rng.categorical(probs);
    return {Action{a}, log_softmax_at(out, a)};
  }

  Vec a(out.size());
  for (size_t i = 0; i < out.size(); ++i)
    a[i] = out[i] + kind_.fixed_std * rng.normal();
  // Evaluate through log_prob so the returned value matches it bit for bit.
  double lp = gaussian_log_prob(out, a);
  return {Action{std::move(a)}, lp};
}

double Policy::gaussian_log_prob(const Vec& mean, const Vec& action) const {
  double var = kind_.fixed_std * kind_.fixed_std;
  double lp = 0.0;
  for (size_t i = 0; i < action.size(); ++i) {
    double d = action[i] - mean[i];
    lp += -0.5 * d * d / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
  }
  return lp;
}

double Policy::log_prob(const Vec& params, std::span<const double> state,
                        const Action& action) const {
  const Vec& out = net::forward(net_, params, state, tls_trace);

  if (kind_.type == PolicyKind::Type::categorical) {
    int a = discrete(action);
    if (a < 0 || a >= kind_.action_dim)
      throw std::out_of_range("log_prob: action index out of range");
    return log_softmax_at(out, a);
  }

  const Vec& a = continuous(action);
  if (static_cast<int>(a.size()) != kind_.action_dim)
    throw std::invalid_argument("log_prob: action dimension mismatch");
  return gaussian_log_prob(out, a);
}

void Policy::score_accumulate(const Vec& params, std::span<const double> state,
                              const Action& action, Vec& grad, double scale) const {
  const Vec& out = net::forward(net_, params, state, tls_trace);
  tls_cot.resize(out.size());

  if (kind_.type == PolicyKind::Type::categorical) {
    int a = discrete(action);
    if (a < 0 || a >= kind_.action_dim)
      throw std::out_of_range("score: action index out of range");
    // d log softmax / d logits = onehot(a) - softmax(logits)
    double m = out[0];
    for (double v : out) m = std::max(m, v);
    double sum = 0.0;
    for (size_t i = 0; i < out.size(); ++i) {
      tls_cot[i] = std::exp(out[i] - m);
      sum += tls_cot[i];
    }
    for (size_t i = 0; i < out.size(); ++i) tls_cot[i] = -scale * tls_cot[i] / sum;
    tls_cot[a] += scale;
  } else {
    const Vec& a = continuous(action);
    if (static_cast<int>(a.size()) != kind_.action_dim)
      throw std::invalid_argument("score: action dimension mismatch");
    double var = kind_.fixed_std * kind_.fixed_std;
    for (size_t i = 0; i < a.size(); ++i) tls_cot[i] = scale * (a[i] - out[i]) / var;
  }

  net::backward_params_accumulate(net_, params, tls_trace, tls_cot, grad);
}

Vec Policy::score(const Vec& params, std::span<const double> state,
                  const Action& action) const {
  Vec grad(params.size(), 0.0);
  score_accumulate(params, state, action, grad);
  return grad;
}

double Policy::trajectory_log_likelihood(const Vec& params,
                                         const Trajectory& traj) const {
  double total = 0.0;
  for (const TimeStep& ts : traj) total += log_prob(params, ts.state, ts.action);
  return total;
}

double Policy::entropy_accumulate(const Vec& params, std::span<const double> state,
                                  Vec& grad, double scale) const {
  if (kind_.type == PolicyKind::Type::gaussian) {
    double var = kind_.fixed_std * kind_.fixed_std;
    return 0.5 * kind_.action_dim * std::log(2.0 * std::numbers::pi * std::numbers::e * var);
  }

  const Vec& out = net::forward(net_, params, state, tls_trace);
  double m = out[0];
  for (double v : out) m = std::max(m, v);
  double sum = 0.0;
  tls_cot.resize(out.size());
  for (size_t i = 0; i < out.size(); ++i) {
    tls_cot[i] = std::exp(out[i] - m);  // unnormalized probs, reused below
    sum += tls_cot[i];
  }
  double entropy = 0.0;
  for (size_t i = 0; i < out.size(); ++i) {
    double p = tls_cot[i] / sum;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  // dH/dlogit_j = -p_j (log p_j + H)
  for (size_t i = 0; i < out.size(); ++i) {
    double p = tls_cot[i] / sum;
    double logp = p > 0.0 ? std::log(p) : 0.0;
    tls_cot[i] = scale * (-p * (logp + entropy));
  }
  net::backward_params_accumulate(net_, params, tls_trace, tls_cot, grad);
  return entropy;
}

Vec Policy::action_probabilities(const Vec& params,
                                 std::span<const double> state) const {
  if (kind_.type != PolicyKind::Type::categorical)
    throw std::logic_error("action_probabilities: categorical policies only");
  Vec out = net::forward(net_, params, state);
  double m = out[0];
  for (double v : out) m = std::max(m, v);
  double sum = 0.0;
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(out[i] - m);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

}  // namespace vrer::policy

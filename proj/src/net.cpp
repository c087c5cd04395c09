#include "vrer/net.hpp"

#include <cmath>
#include <stdexcept>

namespace vrer::net {

namespace {

double apply_act(Activation a, double x) {
  return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative expressed through the pre-activation value.
double act_grad(Activation a, double pre) {
  if (a == Activation::relu) return pre > 0.0 ? 1.0 : 0.0;
  double t = std::tanh(pre);
  return 1.0 - t * t;
}

}  // namespace

void MlpConfig::validate() const {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("MlpConfig: need at least input and output layer");
  for (int s : layer_sizes)
    if (s < 1) throw std::invalid_argument("MlpConfig: layer sizes must be >= 1");
}

int MlpConfig::param_count() const {
  int total = 0;
  for (int l = 0; l < num_layers(); ++l)
    total += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return total;
}

int MlpConfig::layer_offset(int l) const {
  int off = 0;
  for (int i = 0; i < l; ++i)
    off += layer_sizes[i] * layer_sizes[i + 1] + layer_sizes[i + 1];
  return off;
}

Vec init_params(const MlpConfig& cfg, RngStream& rng) {
  cfg.validate();
  Vec params(static_cast<size_t>(cfg.param_count()), 0.0);
  for (int l = 0; l < cfg.num_layers(); ++l) {
    int in = cfg.layer_sizes[l];
    int out = cfg.layer_sizes[l + 1];
    double* w = params.data() + cfg.layer_offset(l);
    if (cfg.init == Init::glorot_uniform) {
      double limit = std::sqrt(6.0 / (in + out));
      for (int i = 0; i < out * in; ++i) w[i] = rng.uniform(-limit, limit);
    } else {
      // Orthogonal rows scaled by gain, from a Gaussian matrix via
      // modified Gram-Schmidt. When out > in only the first `in` rows can
      // be mutually orthogonal; the rest end up as unit-norm directions.
      std::vector<Vec> rows(out, Vec(in));
      for (auto& r : rows)
        for (double& x : r) x = rng.normal();
      for (int i = 0; i < out; ++i) {
        for (int j = 0; j < i && j < in; ++j) {
          double dot = 0.0;
          for (int k = 0; k < in; ++k) dot += rows[i][k] * rows[j][k];
          for (int k = 0; k < in; ++k) rows[i][k] -= dot * rows[j][k];
        }
        double norm = 0.0;
        for (int k = 0; k < in; ++k) norm += rows[i][k] * rows[i][k];
        norm = std::sqrt(norm);
        if (norm > 1e-12)
          for (int k = 0; k < in; ++k) rows[i][k] /= norm;
      }
      for (int i = 0; i < out; ++i)
        for (int j = 0; j < in; ++j) w[i * in + j] = cfg.init_gain * rows[i][j];
    }
    // biases stay zero
  }
  return params;
}

Vec forward(const MlpConfig& cfg, const Vec& params, std::span<const double> input) {
  ForwardTrace trace;
  return forward(cfg, params, input, trace);
}

const Vec& forward(const MlpConfig& cfg, const Vec& params,
                   std::span<const double> input, ForwardTrace& trace) {
  if (static_cast<int>(input.size()) != cfg.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  if (static_cast<int>(params.size()) != cfg.param_count())
    throw std::invalid_argument("forward: parameter count mismatch");

  int n_layers = cfg.num_layers();
  trace.inputs.resize(n_layers);
  trace.preacts.resize(n_layers);

  trace.inputs[0].assign(input.begin(), input.end());
  for (int l = 0; l < n_layers; ++l) {
    int in = cfg.layer_sizes[l];
    int out = cfg.layer_sizes[l + 1];
    const double* w = params.data() + cfg.layer_offset(l);
    const double* b = w + out * in;
    const double* x = trace.inputs[l].data();

    Vec& pre = trace.preacts[l];
    pre.resize(out);
    for (int i = 0; i < out; ++i) {
      const double* wrow = w + i * in;
      double acc = b[i];
      for (int j = 0; j < in; ++j) acc += wrow[j] * x[j];
      pre[i] = acc;
    }
    if (l + 1 < n_layers) {
      Vec& next = trace.inputs[l + 1];
      next.resize(out);
      for (int i = 0; i < out; ++i) next[i] = apply_act(cfg.activation, pre[i]);
    }
  }
  return trace.preacts.back();  // linear output layer
}

void backward_params_accumulate(const MlpConfig& cfg, const Vec& params,
                                const ForwardTrace& trace,
                                std::span<const double> cotangent, Vec& grad) {
  if (static_cast<int>(cotangent.size()) != cfg.output_dim())
    throw std::invalid_argument("backward: cotangent dimension mismatch");
  if (grad.size() != params.size())
    throw std::invalid_argument("backward: grad buffer size mismatch");

  int n_layers = cfg.num_layers();
  // delta = dL/d(preact of current layer), walked from output to input.
  Vec delta(cotangent.begin(), cotangent.end());
  Vec prev_delta;

  for (int l = n_layers - 1; l >= 0; --l) {
    int in = cfg.layer_sizes[l];
    int out = cfg.layer_sizes[l + 1];
    const double* w = params.data() + cfg.layer_offset(l);
    const double* x = trace.inputs[l].data();
    double* gw = grad.data() + cfg.layer_offset(l);
    double* gb = gw + out * in;

    for (int i = 0; i < out; ++i) {
      double d = delta[i];
      if (d != 0.0) {
        double* grow = gw + i * in;
        for (int j = 0; j < in; ++j) grow[j] += d * x[j];
      }
      gb[i] += d;
    }

    if (l > 0) {
      prev_delta.assign(in, 0.0);
      for (int i = 0; i < out; ++i) {
        double d = delta[i];
        if (d == 0.0) continue;
        const double* wrow = w + i * in;
        for (int j = 0; j < in; ++j) prev_delta[j] += d * wrow[j];
      }
      const Vec& pre_below = trace.preacts[l - 1];
      for (int j = 0; j < in; ++j)
        prev_delta[j] *= act_grad(cfg.activation, pre_below[j]);
      delta.swap(prev_delta);
    }
  }
}

Vec backward_params(const MlpConfig& cfg, const Vec& params, const ForwardTrace& trace,
                    std::span<const double> cotangent) {
  Vec grad(params.size(), 0.0);
  backward_params_accumulate(cfg, params, trace, cotangent, grad);
  return grad;
}

Optimizer::Optimizer(OptimizerConfig cfg, int param_count) : cfg_(cfg) {
  if (cfg_.kind == OptKind::adam) {
    first_moment_.assign(static_cast<size_t>(param_count), 0.0);
    second_moment_.assign(static_cast<size_t>(param_count), 0.0);
  }
}

double Optimizer::current_learning_rate() const {
  if (cfg_.schedule == LrSchedule::constant) return cfg_.learning_rate;
  double k = static_cast<double>(step_count_ + 1);
  return cfg_.learning_rate / std::pow(k, 1.0 / cfg_.power_q);
}

StepStatus Optimizer::step(Vec& params, const Vec& grad, bool ascend) {
  if (grad.size() != params.size())
    throw std::invalid_argument("optimizer step: size mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) return StepStatus::rejected_nonfinite;

  double lr = current_learning_rate();
  ++step_count_;
  double sign = ascend ? 1.0 : -1.0;

  if (cfg_.kind == OptKind::sgd) {
    for (size_t i = 0; i < params.size(); ++i) params[i] += sign * lr * grad[i];
    return StepStatus::applied;
  }

  double t = static_cast<double>(step_count_);
  double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    double g = grad[i];
    first_moment_[i] = cfg_.beta1 * first_moment_[i] + (1.0 - cfg_.beta1) * g;
    second_moment_[i] = cfg_.beta2 * second_moment_[i] + (1.0 - cfg_.beta2) * g * g;
    double m_hat = first_moment_[i] / bc1;
    double v_hat = second_moment_[i] / bc2;
    params[i] += sign * lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
  }
  return StepStatus::applied;
}

}  // namespace vrer::net

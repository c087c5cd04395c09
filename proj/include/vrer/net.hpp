#pragma once

#include <span>
#include <vector>

#include "vrer/rng.hpp"

namespace vrer::net {

using Vec = std::vector<double>;

enum class Activation { relu, tanh };
enum class Init { glorot_uniform, orthogonal };

// Feed-forward MLP: affine + activation on hidden layers, linear output.
// Parameters live in one flat vector, laid out layer by layer as the
// row-major weight matrix (out x in) followed by the bias vector.
struct MlpConfig {
  std::vector<int> layer_sizes;  // input, hidden..., output
  Activation activation = Activation::relu;
  Init init = Init::glorot_uniform;
  double init_gain = 1.0;  // orthogonal only

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int param_count() const;
  // Offset of layer l's weights within the flat vector; biases follow.
  int layer_offset(int l) const;

  void validate() const;
};

Vec init_params(const MlpConfig& cfg, RngStream& rng);

// Reusable per-evaluation scratch: inputs to each layer plus pre-activations.
struct ForwardTrace {
  std::vector<Vec> inputs;   // inputs[l] = input to layer l (size layer_sizes[l])
  std::vector<Vec> preacts;  // preacts[l] = W x + b of layer l
};

Vec forward(const MlpConfig& cfg, const Vec& params, std::span<const double> input);

// Allocation-free when the trace is reused; the output lives in
// trace.preacts.back() and the returned reference is valid until the next
// call with the same trace.
const Vec& forward(const MlpConfig& cfg, const Vec& params,
                   std::span<const double> input, ForwardTrace& trace);

// Gradient of cotangent . output with respect to the flat parameters,
// accumulated into grad (which must be zero-filled or carry a running sum).
// Requires the trace of the matching forward call.
void backward_params_accumulate(const MlpConfig& cfg, const Vec& params,
                                const ForwardTrace& trace,
                                std::span<const double> cotangent, Vec& grad);

Vec backward_params(const MlpConfig& cfg, const Vec& params, const ForwardTrace& trace,
                    std::span<const double> cotangent);

// --- optimizers ---

enum class OptKind { sgd, adam };
enum class LrSchedule { constant, inverse_power };

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double learning_rate = 3e-4;
  LrSchedule schedule = LrSchedule::constant;
  double power_q = 2.0;  // eta_k = eta_1 / k^(1/q)
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class StepStatus { applied, rejected_nonfinite };

class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, int param_count);

  // In-place update; ascend selects gradient ascent. A gradient with any
  // non-finite component is rejected and the state is left untouched.
  StepStatus step(Vec& params, const Vec& grad, bool ascend);

  int step_count() const { return step_count_; }
  double current_learning_rate() const;  // rate the next step will use

 private:
  OptimizerConfig cfg_;
  int step_count_ = 0;
  Vec first_moment_;
  Vec second_moment_;
};

}  // namespace vrer::net

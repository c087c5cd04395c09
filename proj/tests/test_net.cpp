#include "doctest.h"
#include "vrer/net.hpp"
#include "vrer/oracle.hpp"

#include <cmath>

using namespace vrer;
using net::Vec;

namespace {

net::MlpConfig small_config() {
  net::MlpConfig cfg;
  cfg.layer_sizes = {3, 5, 2};
  cfg.activation = net::Activation::tanh;
  return cfg;
}

// Naive re-computation of the forward pass, written independently of the
// library loops (explicit matrix-vector products over the flat layout).
Vec naive_forward(const net::MlpConfig& cfg, const Vec& params, const Vec& input) {
  Vec x = input;
  int offset = 0;
  for (int l = 0; l + 1 < static_cast<int>(cfg.layer_sizes.size()); ++l) {
    int in = cfg.layer_sizes[l];
    int out = cfg.layer_sizes[l + 1];
    Vec y(out, 0.0);
    for (int i = 0; i < out; ++i) {
      double acc = params[offset + out * in + i];  // bias
      for (int j = 0; j < in; ++j) acc += params[offset + i * in + j] * x[j];
      y[i] = acc;
    }
    offset += out * in + out;
    bool last = (l + 2 == static_cast<int>(cfg.layer_sizes.size()));
    if (!last)
      for (double& v : y)
        v = cfg.activation == net::Activation::tanh ? std::tanh(v) : std::max(v, 0.0);
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("all-zero params give zero output") {
  net::MlpConfig cfg = small_config();
  Vec params(cfg.param_count(), 0.0);
  Vec out = net::forward(cfg, params, Vec{0.3, -1.2, 0.7});
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("identity stack reproduces tanh of the input") {
  net::MlpConfig cfg;
  cfg.layer_sizes = {3, 3, 3};
  cfg.activation = net::Activation::tanh;
  Vec params(cfg.param_count(), 0.0);
  for (int l = 0; l < 2; ++l) {
    int off = cfg.layer_offset(l);
    for (int i = 0; i < 3; ++i) params[off + i * 3 + i] = 1.0;
  }
  Vec in{0.5, -0.25, 2.0};
  Vec out = net::forward(cfg, params, in);
  for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(std::tanh(in[i])).epsilon(1e-12));
}

TEST_CASE("forward matches an independent re-computation") {
  net::MlpConfig cfg = small_config();
  RngStream rng(101);
  Vec params = net::init_params(cfg, rng);
  Vec in{0.4, -0.9, 1.3};
  Vec out = net::forward(cfg, params, in);
  Vec expect = naive_forward(cfg, params, in);
  REQUIRE(out.size() == expect.size());
  for (size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("zero cotangent gives zero gradient") {
  net::MlpConfig cfg = small_config();
  RngStream rng(3);
  Vec params = net::init_params(cfg, rng);
  net::ForwardTrace trace;
  net::forward(cfg, params, Vec{1.0, 2.0, 3.0}, trace);
  Vec grad = net::backward_params(cfg, params, trace, Vec{0.0, 0.0});
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("single linear layer gradient is the input for the selected row") {
  net::MlpConfig cfg;
  cfg.layer_sizes = {3, 2};
  RngStream rng(5);
  Vec params = net::init_params(cfg, rng);
  Vec in{0.7, -0.2, 1.5};
  net::ForwardTrace trace;
  net::forward(cfg, params, in, trace);
  Vec grad = net::backward_params(cfg, params, trace, Vec{1.0, 0.0});
  // w row 0 sees the input, row 1 nothing; bias picks up the cotangent
  CHECK(grad[0] == doctest::Approx(0.7));
  CHECK(grad[1] == doctest::Approx(-0.2));
  CHECK(grad[2] == doctest::Approx(1.5));
  for (int i = 3; i < 6; ++i) CHECK(grad[i] == 0.0);
  CHECK(grad[6] == doctest::Approx(1.0));
  CHECK(grad[7] == 0.0);
}

TEST_CASE("analytic gradient agrees with central finite differences") {
  RngStream rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    net::MlpConfig cfg;
    int in_dim = 1 + static_cast<int>(rng.below(4));
    int hidden = 1 + static_cast<int>(rng.below(6));
    int out_dim = 1 + static_cast<int>(rng.below(3));
    cfg.layer_sizes = {in_dim, hidden, out_dim};
    cfg.activation = rng.uniform() < 0.5 ? net::Activation::tanh : net::Activation::relu;
    Vec params = net::init_params(cfg, rng);
    Vec input(in_dim), cot(out_dim);
    for (double& v : input) v = rng.normal();
    for (double& v : cot) v = rng.normal();

    net::ForwardTrace trace;
    net::forward(cfg, params, input, trace);
    Vec analytic = net::backward_params(cfg, params, trace, cot);

    Vec fd = oracle::finite_difference_gradient(
        [&](const Vec& p) {
          Vec out = net::forward(cfg, p, input);
          double acc = 0.0;
          for (int i = 0; i < out_dim; ++i) acc += cot[i] * out[i];
          return acc;
        },
        params, 1e-5);

    for (size_t i = 0; i < params.size(); ++i) {
      if (std::abs(analytic[i]) <= 1e-8 && std::abs(fd[i]) <= 1e-8) continue;
      double rel = std::abs(analytic[i] - fd[i]) /
                   std::max(std::abs(analytic[i]), std::abs(fd[i]));
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("optimizer: zero gradient leaves params unchanged") {
  net::OptimizerConfig oc;
  oc.kind = net::OptKind::adam;
  oc.learning_rate = 0.1;
  net::Optimizer opt(oc, 3);
  Vec params{1.0, 2.0, 3.0};
  Vec before = params;
  CHECK(opt.step(params, Vec{0.0, 0.0, 0.0}, true) == net::StepStatus::applied);
  CHECK(params == before);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam first step magnitude is about the learning rate") {
  net::OptimizerConfig oc;
  oc.kind = net::OptKind::adam;
  oc.learning_rate = 0.01;
  net::Optimizer opt(oc, 1);
  Vec params{0.0};
  opt.step(params, Vec{0.37}, true);
  // bias-corrected first step: |d theta| = lr * |g| / (|g| + eps)
  CHECK(std::abs(params[0]) == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("adam first step is invariant to gradient scale away from eps") {
  auto first_step = [](double g) {
    net::OptimizerConfig oc;
    oc.kind = net::OptKind::adam;
    oc.learning_rate = 0.01;
    net::Optimizer opt(oc, 1);
    Vec params{0.0};
    opt.step(params, Vec{g}, true);
    return std::abs(params[0]);
  };
  double a = first_step(0.5), b = first_step(5.0);
  CHECK(std::abs(a - b) / a < 1e-6);
}

TEST_CASE("sgd step and inverse power schedule") {
  net::OptimizerConfig oc;
  oc.kind = net::OptKind::sgd;
  oc.learning_rate = 0.005;
  oc.schedule = net::LrSchedule::inverse_power;
  oc.power_q = 2.0;
  net::Optimizer opt(oc, 1);
  Vec params{0.0};
  opt.step(params, Vec{1.0}, true);
  CHECK(params[0] == doctest::Approx(0.005));  // eta_1 = eta / 1^(1/2)
  opt.step(params, Vec{1.0}, true);
  CHECK(params[0] == doctest::Approx(0.005 + 0.005 / std::sqrt(2.0)));
  // descent direction flips the sign
  net::Optimizer opt2(oc, 1);
  Vec params2{0.0};
  opt2.step(params2, Vec{1.0}, false);
  CHECK(params2[0] == doctest::Approx(-0.005));
}

TEST_CASE("non-finite gradients are rejected") {
  net::OptimizerConfig oc;
  oc.kind = net::OptKind::adam;
  net::Optimizer opt(oc, 2);
  Vec params{1.0, 1.0};
  Vec before = params;
  CHECK(opt.step(params, Vec{1.0, std::nan("")}, true) ==
        net::StepStatus::rejected_nonfinite);
  CHECK(params == before);
  CHECK(opt.step_count() == 0);
  CHECK(opt.step(params, Vec{1.0, std::numeric_limits<double>::infinity()}, true) ==
        net::StepStatus::rejected_nonfinite);
  CHECK(params == before);
}

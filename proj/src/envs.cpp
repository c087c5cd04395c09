#include "vrer/envs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vrer::envs {

namespace {

constexpr double kPi = std::numbers::pi;

// Gym cart-pole constants.
constexpr double kGravity = 9.8;
constexpr double kMassCart = 1.0;
constexpr double kMassPole = 0.1;
constexpr double kTotalMass = kMassCart + kMassPole;
constexpr double kLength = 0.5;  // half the pole's length
constexpr double kPoleMassLength = kMassPole * kLength;
constexpr double kForceMag = 10.0;
constexpr double kTau = 0.02;  // seconds between state updates
constexpr double kThetaThreshold = 12.0 * 2.0 * kPi / 360.0;
constexpr double kXThreshold = 2.4;

}  // namespace

Vec Env::reset(RngStream& rng) {
  steps_ = 0;
  done_ = false;
  return do_reset(rng);
}

Vec Env::reset(uint64_t seed) {
  RngStream stream(seed);
  return reset(stream);
}

StepResult Env::step(const Action& action) {
  if (done_) throw std::logic_error("Env::step: episode already finished");
  StepResult result = do_step(action);
  ++steps_;
  if (steps_ >= spec_.max_steps) result.truncated = true;
  done_ = result.terminated || result.truncated;
  return result;
}

CartPole::CartPole(int max_steps) : Env({}) {
  spec_.obs_dim = 4;
  spec_.action = {true, 2, 0.0, 0.0};
  spec_.max_steps = max_steps;
  spec_.solved_threshold = 195.0;
  state_.assign(4, 0.0);
}

Vec CartPole::do_reset(RngStream& rng) {
  for (double& x : state_) x = rng.uniform(-0.05, 0.05);
  return state_;
}

double CartPole::force_for(const Action& action) const {
  return discrete(action) == 1 ? kForceMag : -kForceMag;
}

StepResult CartPole::do_step(const Action& action) {
  double x = state_[0], x_dot = state_[1], theta = state_[2], theta_dot = state_[3];

  double force = force_for(action);
  double costheta = std::cos(theta);
  double sintheta = std::sin(theta);

  double temp = (force + kPoleMassLength * theta_dot * theta_dot * sintheta) / kTotalMass;
  double thetaacc = (kGravity * sintheta - costheta * temp) /
                    (kLength * (4.0 / 3.0 - kMassPole * costheta * costheta / kTotalMass));
  double xacc = temp - kPoleMassLength * thetaacc * costheta / kTotalMass;

  state_[0] = x + kTau * x_dot;
  state_[1] = x_dot + kTau * xacc;
  state_[2] = theta + kTau * theta_dot;
  state_[3] = theta_dot + kTau * thetaacc;

  StepResult result;
  result.next_state = state_;
  result.reward = 1.0;
  result.terminated = std::abs(state_[0]) > kXThreshold ||
                      std::abs(state_[2]) > kThetaThreshold;
  return result;
}

ContinuousCartPole::ContinuousCartPole(int max_steps) : CartPole(max_steps) {
  spec_.action = {false, 1, -1.0, 1.0};
  spec_.solved_threshold.reset();
}

double ContinuousCartPole::force_for(const Action& action) const {
  double a = continuous(action)[0];
  a = std::clamp(a, -1.0, 1.0);
  return kForceMag * a;
}

Acrobot::Acrobot(int max_steps) : Env({}) {
  spec_.obs_dim = 6;
  spec_.action = {true, 3, 0.0, 0.0};
  spec_.max_steps = max_steps;
}

Vec Acrobot::observation() const {
  return {std::cos(theta1_), std::sin(theta1_), std::cos(theta2_),
          std::sin(theta2_), omega1_, omega2_};
}

Vec Acrobot::do_reset(RngStream& rng) {
  theta1_ = rng.uniform(-0.1, 0.1);
  theta2_ = rng.uniform(-0.1, 0.1);
  omega1_ = rng.uniform(-0.1, 0.1);
  omega2_ = rng.uniform(-0.1, 0.1);
  return observation();
}

StepResult Acrobot::do_step(const Action& action) {
  int a = discrete(action);
  if (a < 0 || a > 2) throw std::invalid_argument("Acrobot: action out of range");
  double torque = static_cast<double>(a - 1);  // {-1, 0, +1}

  // Book dynamics (Sutton & Barto); two links of unit mass and length,
  // actuated joint between them.
  constexpr double m1 = 1.0, m2 = 1.0, l1 = 1.0, lc1 = 0.5, lc2 = 0.5;
  constexpr double i1 = 1.0, i2 = 1.0, g = 9.8;

  auto dsdt = [&](const std::array<double, 4>& s) {
    double t1 = s[0], t2 = s[1], w1 = s[2], w2 = s[3];
    double d1 = m1 * lc1 * lc1 +
                m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(t2)) + i1 + i2;
    double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(t2)) + i2;
    double phi2 = m2 * lc2 * g * std::cos(t1 + t2 - kPi / 2.0);
    double phi1 = -m2 * l1 * lc2 * w2 * w2 * std::sin(t2) -
                  2.0 * m2 * l1 * lc2 * w2 * w1 * std::sin(t2) +
                  (m1 * lc1 + m2 * l1) * g * std::cos(t1 - kPi / 2.0) + phi2;
    double ddw2 = (torque + d2 / d1 * phi1 -
                   m2 * l1 * lc2 * w1 * w1 * std::sin(t2) - phi2) /
                  (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    double ddw1 = -(d2 * ddw2 + phi1) / d1;
    return std::array<double, 4>{w1, w2, ddw1, ddw2};
  };

  // One RK4 step over dt = 0.2.
  constexpr double dt = 0.2;
  std::array<double, 4> s{theta1_, theta2_, omega1_, omega2_};
  auto k1 = dsdt(s);
  std::array<double, 4> s2, s3, s4;
  for (int i = 0; i < 4; ++i) s2[i] = s[i] + dt / 2.0 * k1[i];
  auto k2 = dsdt(s2);
  for (int i = 0; i < 4; ++i) s3[i] = s[i] + dt / 2.0 * k2[i];
  auto k3 = dsdt(s3);
  for (int i = 0; i < 4; ++i) s4[i] = s[i] + dt * k3[i];
  auto k4 = dsdt(s4);
  for (int i = 0; i < 4; ++i)
    s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

  auto wrap = [](double x) {
    while (x > kPi) x -= 2.0 * kPi;
    while (x < -kPi) x += 2.0 * kPi;
    return x;
  };
  theta1_ = wrap(s[0]);
  theta2_ = wrap(s[1]);
  omega1_ = std::clamp(s[2], -4.0 * kPi, 4.0 * kPi);
  omega2_ = std::clamp(s[3], -9.0 * kPi, 9.0 * kPi);

  StepResult result;
  result.next_state = observation();
  result.terminated = -std::cos(theta1_) - std::cos(theta2_ + theta1_) > 1.0;
  result.reward = result.terminated ? 0.0 : -1.0;
  return result;
}

ChainMdpEnv::ChainMdpEnv(ChainMdpSpec spec) : Env({}), chain_(std::move(spec)) {
  chain_.validate();
  spec_.obs_dim = chain_.n_states;
  spec_.action = {true, chain_.n_actions, 0.0, 0.0};
  spec_.max_steps = chain_.horizon;
}

Vec ChainMdpEnv::one_hot(int s) const {
  Vec obs(chain_.n_states, 0.0);
  obs[s] = 1.0;
  return obs;
}

Vec ChainMdpEnv::do_reset(RngStream& rng) {
  episode_rng_ = rng.split(rng.next_u64());
  state_ = episode_rng_.categorical(chain_.initial_dist);
  return one_hot(state_);
}

StepResult ChainMdpEnv::do_step(const Action& action) {
  int a = discrete(action);
  if (a < 0 || a >= chain_.n_actions)
    throw std::invalid_argument("ChainMdpEnv: action out of range");

  StepResult result;
  result.reward = chain_.rewards[state_][a];
  state_ = episode_rng_.categorical(chain_.transition_probs[state_][a]);
  result.next_state = one_hot(state_);
  result.terminated = steps_ + 1 >= chain_.horizon;
  return result;
}

std::unique_ptr<Env> make_env(const std::string& id, int max_steps_override) {
  std::unique_ptr<Env> env;
  if (id == "cartpole") {
    env = std::make_unique<CartPole>(max_steps_override > 0 ? max_steps_override : 200);
  } else if (id == "acrobot") {
    env = std::make_unique<Acrobot>(max_steps_override > 0 ? max_steps_override : 500);
  } else if (id == "invpend-cont") {
    env = std::make_unique<ContinuousCartPole>(max_steps_override > 0 ? max_steps_override
                                                                      : 1000);
  } else if (id == "chain") {
    env = std::make_unique<ChainMdpEnv>(ChainMdpSpec::default_spec());
  } else {
    throw std::invalid_argument("make_env: unknown environment id '" + id + "'");
  }
  return env;
}

}  // namespace vrer::envs

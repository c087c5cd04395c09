#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vrer/action.hpp"
#include "vrer/chain_mdp.hpp"
#include "vrer/rng.hpp"

namespace vrer::envs {

using Vec = std::vector<double>;

struct ActionSpace {
  bool is_discrete = true;
  int n = 2;            // discrete: number of actions; continuous: dims
  double low = -1.0;    // continuous only
  double high = 1.0;
};

struct EnvSpec {
  int obs_dim = 0;
  ActionSpace action;
  int max_steps = 1;
  std::optional<double> solved_threshold;
};

struct StepResult {
  Vec next_state;
  double reward = 0.0;
  bool terminated = false;  // reached a terminal physical condition
  bool truncated = false;   // hit the step limit
};

class Env {
 public:
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }
  bool done() const { return done_; }
  int steps_taken() const { return steps_; }

  // Draws the initial state from the given stream. Identical stream state
  // gives an identical initial state.
  Vec reset(RngStream& rng);
  Vec reset(uint64_t seed);

  // Advances one step. Stepping a finished episode is a usage error.
  StepResult step(const Action& action);

 protected:
  explicit Env(EnvSpec spec) : spec_(std::move(spec)) {}
  virtual Vec do_reset(RngStream& rng) = 0;
  virtual StepResult do_step(const Action& action) = 0;

  EnvSpec spec_;
  bool done_ = true;
  int steps_ = 0;
};

// ids: cartpole, acrobot, invpend-cont, chain
std::unique_ptr<Env> make_env(const std::string& id, int max_steps_override = 0);

// Gym-style cart-pole, explicit Euler, reward 1 per step.
class CartPole : public Env {
 public:
  explicit CartPole(int max_steps = 200);
  // Pins (x, x_dot, theta, theta_dot) mid-episode; test hook.
  void set_state(const Vec& state) { state_ = state; }
 protected:
  Vec do_reset(RngStream& rng) override;
  StepResult do_step(const Action& action) override;
  virtual double force_for(const Action& action) const;
  Vec state_;
};

// Continuous-force cart-pole standing in for the inverted pendulum task:
// force = 10 * clip(a, -1, 1), 1000-step cap.
class ContinuousCartPole : public CartPole {
 public:
  explicit ContinuousCartPole(int max_steps = 1000);
 protected:
  double force_for(const Action& action) const override;
};

// Two-link underactuated arm, RK4 with the book dynamics, torques {-1,0,+1}.
class Acrobot : public Env {
 public:
  explicit Acrobot(int max_steps = 500);
 protected:
  Vec do_reset(RngStream& rng) override;
  StepResult do_step(const Action& action) override;
 private:
  Vec observation() const;
  double theta1_ = 0.0, theta2_ = 0.0, omega1_ = 0.0, omega2_ = 0.0;
};

// Finite-horizon tabular MDP with one-hot observations; the enumeration
// oracle lives in chain_mdp.hpp.
class ChainMdpEnv : public Env {
 public:
  explicit ChainMdpEnv(ChainMdpSpec spec);
  const ChainMdpSpec& chain_spec() const { return chain_; }
  int current_state() const { return state_; }
 protected:
  Vec do_reset(RngStream& rng) override;
  StepResult do_step(const Action& action) override;
 private:
  Vec one_hot(int s) const;
  ChainMdpSpec chain_;
  int state_ = 0;
  RngStream episode_rng_;
};

}  // namespace vrer::envs

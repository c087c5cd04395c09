#include "doctest.h"
#include "vrer/reuse.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

using namespace vrer;
using gradients::EstimatorConfig;
using gradients::Sample;
using net::Vec;
using reuse::GenerationRecord;
using reuse::ReplayBuffer;

namespace {

// Linear gaussian policy over a 1-d state: mean = w x + b, fixed std 1.
// Scores and ratios have closed forms, which keeps the rule fixtures exact.
policy::Policy line_policy() {
  net::MlpConfig cfg;
  cfg.layer_sizes = {1, 1};
  return policy::Policy(cfg, policy::PolicyKind::gaussian(1, 1.0));
}

Sample episode1(const policy::Policy& pol, const Vec& behavior, double state,
                double action, double reward, int iter) {
  policy::Trajectory traj;
  traj.push_back({Vec{state}, Action{Vec{action}}, reward});
  Sample s;
  s.behavior_loglik = pol.trajectory_log_likelihood(behavior, traj);
  s.data = gradients::EpisodeSample{std::move(traj)};
  s.origin_iteration = iter;
  return s;
}

Sample transition1(const policy::Policy& pol, const Vec& behavior, double state,
                   double action, int iter) {
  gradients::TransitionSample tr;
  tr.state = {state};
  tr.action = Action{Vec{action}};
  tr.reward = 0.0;
  tr.next_state = {state};
  tr.done = false;
  Sample s;
  s.behavior_loglik = pol.log_prob(behavior, tr.state, tr.action);
  s.data = std::move(tr);
  s.origin_iteration = iter;
  return s;
}

EstimatorConfig est_cfg() {
  EstimatorConfig est;
  est.gamma = 0.99;
  est.advantage_mode = gradients::AdvantageMode::full_return;
  return est;
}

}  // namespace

TEST_CASE("buffer evicts the oldest record") {
  policy::Policy pol = line_policy();
  ReplayBuffer buf(2);
  for (int k = 1; k <= 3; ++k) {
    GenerationRecord rec;
    rec.snapshot = {k, Vec{0.0, 0.0}};
    rec.samples.push_back(episode1(pol, rec.snapshot.params, 1.0, 0.5, 1.0, k));
    buf.insert(std::move(rec));
  }
  REQUIRE(buf.size() == 2);
  CHECK(buf.entry(0).snapshot.iteration == 2);
  CHECK(buf.entry(1).snapshot.iteration == 3);
}

TEST_CASE("buffer rejects out-of-order inserts and grows from empty") {
  policy::Policy pol = line_policy();
  ReplayBuffer buf(4);
  CHECK(buf.size() == 0);
  GenerationRecord rec;
  rec.snapshot = {5, Vec{0.0, 0.0}};
  rec.samples.push_back(episode1(pol, rec.snapshot.params, 1.0, 0.5, 1.0, 5));
  buf.insert(std::move(rec));
  CHECK(buf.size() == 1);

  GenerationRecord stale;
  stale.snapshot = {5, Vec{0.0, 0.0}};
  CHECK_THROWS_AS(buf.insert(std::move(stale)), std::invalid_argument);
}

TEST_CASE("rule1: variance-inflating snapshot excluded, tame snapshot included") {
  policy::Policy pol = line_policy();
  Vec theta_k{0.0, 0.0};
  // Behavioral mean at -2: an action near the target mode carries a ratio
  // around e^2 while one near the behavioral mode carries e^-2, so the
  // weighted gradients spread out far beyond the on-policy baseline.
  Vec theta_spiky{0.0, -2.0};

  ReplayBuffer buf(10);
  GenerationRecord spiky;
  spiky.snapshot = {1, theta_spiky};
  spiky.samples.push_back(episode1(pol, theta_spiky, 1.0, 0.5, 1.0, 1));
  spiky.samples.push_back(episode1(pol, theta_spiky, 1.0, -2.0, 1.0, 1));
  buf.insert(std::move(spiky));

  GenerationRecord tame;  // same parameters as the target, small spread
  tame.snapshot = {2, theta_k};
  tame.samples.push_back(episode1(pol, theta_k, 1.0, 0.5, 1.0, 2));
  tame.samples.push_back(episode1(pol, theta_k, 1.0, -0.4, 1.0, 2));
  buf.insert(std::move(tame));

  GenerationRecord current;
  current.snapshot = {3, theta_k};
  current.samples.push_back(episode1(pol, theta_k, 1.0, 0.6, 1.0, 3));
  current.samples.push_back(episode1(pol, theta_k, 1.0, -0.3, 2.0, 3));
  buf.insert(std::move(current));
  const auto& new_samples = buf.entry(2).samples;

  // Independent re-computation of both variance traces. For this policy
  // score(s=1, a) = (a - mu) [1, 1], g = reward * score, and the episode
  // ratio is exp(logN(a; mu_k) - logN(a; mu_i)).
  auto decide = [&](const GenerationRecord& rec, double c) {
    auto normal_logpdf = [](double a, double mu) {
      return -0.5 * (a - mu) * (a - mu) - 0.5 * std::log(2.0 * std::numbers::pi);
    };
    double mu_k = 0.0;
    double mu_i = rec.snapshot.params[0] * 1.0 + rec.snapshot.params[1];

    std::vector<std::array<double, 2>> weighted;
    for (const Sample& s : rec.samples) {
      double a = continuous(s.episode()[0].action)[0];
      double r = s.episode()[0].reward;
      double ratio = std::exp(normal_logpdf(a, mu_k) - normal_logpdf(a, mu_i));
      double comp = ratio * r * (a - mu_k);
      weighted.push_back({comp, comp});
    }
    std::vector<std::array<double, 2>> base;
    for (const Sample& s : new_samples) {
      double a = continuous(s.episode()[0].action)[0];
      double r = s.episode()[0].reward;
      base.push_back({r * (a - mu_k), r * (a - mu_k)});
    }
    auto trace = [](const std::vector<std::array<double, 2>>& vs) {
      double m0 = 0, m1 = 0;
      for (auto& v : vs) {
        m0 += v[0];
        m1 += v[1];
      }
      m0 /= vs.size();
      m1 /= vs.size();
      double acc = 0;
      for (auto& v : vs)
        acc += (v[0] - m0) * (v[0] - m0) + (v[1] - m1) * (v[1] - m1);
      return acc / (vs.size() - 1);
    };
    return trace(weighted) <= c * trace(base);
  };

  double c = 1.5;
  reuse::ReuseSet sel =
      reuse::select_rule1(buf, pol, theta_k, new_samples, 3, c, est_cfg());

  // self-inclusion plus the hand-checked decisions
  CHECK(std::count(sel.selected_iterations.begin(), sel.selected_iterations.end(), 3) == 1);
  CHECK((std::count(sel.selected_iterations.begin(), sel.selected_iterations.end(), 1) == 1) ==
        decide(buf.entry(0), c));
  CHECK((std::count(sel.selected_iterations.begin(), sel.selected_iterations.end(), 2) == 1) ==
        decide(buf.entry(1), c));
  CHECK(decide(buf.entry(1), c));        // tame snapshot passes
  CHECK_FALSE(decide(buf.entry(0), c));  // spiky snapshot fails
}

TEST_CASE("rule1 is monotone in c") {
  policy::Policy pol = line_policy();
  Vec theta_k{0.0, 0.0};
  ReplayBuffer buf(10);
  RngStream rng(61);
  for (int k = 1; k <= 6; ++k) {
    GenerationRecord rec;
    Vec p{0.2 * rng.normal(), 0.4 * rng.normal()};
    if (k == 6) p = theta_k;
    rec.snapshot = {k, p};
    for (int j = 0; j < 3; ++j)
      rec.samples.push_back(
          episode1(pol, p, 1.0, p[0] + p[1] + rng.normal(), rng.uniform(0.5, 2.0), k));
    buf.insert(std::move(rec));
  }
  const auto& new_samples = buf.entry(5).samples;
  std::vector<double> cs{1.1, 1.5, 2.0, 4.0, 8.0};
  std::vector<std::vector<int>> sels;
  for (double c : cs)
    sels.push_back(
        reuse::select_rule1(buf, pol, theta_k, new_samples, 6, c, est_cfg())
            .selected_iterations);
  for (size_t i = 0; i + 1 < sels.size(); ++i)
    for (int it : sels[i])
      CHECK(std::count(sels[i + 1].begin(), sels[i + 1].end(), it) == 1);
}

TEST_CASE("rule2: same-parameter snapshot reduces to ratio one and is selected") {
  policy::Policy pol = line_policy();
  Vec theta_k{0.3, -0.2};
  ReplayBuffer buf(10);
  GenerationRecord old;
  old.snapshot = {1, theta_k};  // identical parameters: nu = 0
  old.samples.push_back(episode1(pol, theta_k, 1.0, 0.7, 1.0, 1));
  buf.insert(std::move(old));

  GenerationRecord current;
  current.snapshot = {2, theta_k};
  current.samples.push_back(episode1(pol, theta_k, 1.0, 0.9, 1.0, 2));
  current.samples.push_back(episode1(pol, theta_k, 1.0, -0.5, 2.0, 2));
  buf.insert(std::move(current));

  reuse::ReuseSet sel = reuse::select_rule2(buf, pol, theta_k,
                                            buf.entry(1).samples, 2, 1.5, est_cfg());
  CHECK(sel.selected_iterations == std::vector<int>{1, 2});
}

TEST_CASE("rule2: zero scores select every candidate") {
  policy::Policy pol = line_policy();
  Vec theta_k{0.5, 0.5};
  ReplayBuffer buf(10);
  GenerationRecord far;
  far.snapshot = {1, Vec{-4.0, 9.0}};
  far.samples.push_back(episode1(pol, far.snapshot.params, 1.0, 0.0, 1.0, 1));
  buf.insert(std::move(far));

  // actions sit exactly at the policy mean (w + b = 1), so every score and
  // hence every nu vanishes
  GenerationRecord current;
  current.snapshot = {2, theta_k};
  current.samples.push_back(episode1(pol, theta_k, 1.0, 1.0, 1.0, 2));
  current.samples.push_back(episode1(pol, theta_k, 1.0, 1.0, 2.0, 2));
  buf.insert(std::move(current));

  reuse::ReuseSet sel = reuse::select_rule2(buf, pol, theta_k,
                                            buf.entry(1).samples, 2, 1.5, est_cfg());
  CHECK(sel.selected_iterations == std::vector<int>{1, 2});
}

TEST_CASE("rule2 decision matches a hand recomputation of the ratio") {
  policy::Policy pol = line_policy();
  Vec theta_k{0.0, 0.0};
  ReplayBuffer buf(10);

  // candidate with theta_k - theta_i = (0.25, 0.25)
  GenerationRecord cand;
  cand.snapshot = {1, Vec{-0.25, -0.25}};
  cand.samples.push_back(episode1(pol, cand.snapshot.params, 1.0, 0.3, 1.0, 1));
  cand.samples.push_back(episode1(pol, cand.snapshot.params, 1.0, 0.1, 1.0, 1));
  buf.insert(std::move(cand));

  // two new episodes at state 1 with unit reward and actions +1 / -1:
  // g_j = a_j [1,1], nu_j = 0.5 a_j
  GenerationRecord current;
  current.snapshot = {2, theta_k};
  current.samples.push_back(episode1(pol, theta_k, 1.0, 1.0, 1.0, 2));
  current.samples.push_back(episode1(pol, theta_k, 1.0, -1.0, 1.0, 2));
  buf.insert(std::move(current));

  // hand arithmetic: numerator = e^{u+u^2} ||g1||^2 + e^{-u+u^2} ||g2||^2
  // with u = 0.5, ||g||^2 = 2, mean gradient zero; denominator = 4
  double u = 0.5;
  double numer = 2.0 * std::exp(u + u * u) + 2.0 * std::exp(-u + u * u);
  double denom = 4.0;
  double threshold = numer / denom;  // about 1.448

  auto selected_at = [&](double c) {
    auto sel = reuse::select_rule2(buf, pol, theta_k, buf.entry(1).samples, 2, c,
                                   est_cfg());
    return std::count(sel.selected_iterations.begin(), sel.selected_iterations.end(),
                      1) == 1;
  };
  CHECK(selected_at(threshold + 0.01));
  CHECK_FALSE(selected_at(threshold - 0.01));
}

TEST_CASE("rule3 boundary and sign cases") {
  policy::Policy pol = line_policy();
  Vec theta_k{0.0, 0.0};
  ReplayBuffer buf(10);

  // nu for a candidate displaced by delta in the bias coordinate is
  // delta * (a - mu); the single new transition has state 0, action 1.
  GenerationRecord same;
  same.snapshot = {1, theta_k};
  same.samples.push_back(transition1(pol, theta_k, 0.0, 1.0, 1));
  buf.insert(std::move(same));

  GenerationRecord nu_neg;  // theta_k - theta_i = (0, -0.5) -> nu = -0.5
  nu_neg.snapshot = {2, Vec{0.0, 0.5}};
  nu_neg.samples.push_back(transition1(pol, nu_neg.snapshot.params, 0.0, 1.0, 2));
  buf.insert(std::move(nu_neg));

  GenerationRecord nu_pos;  // theta_k - theta_i = (0, 0.1) -> nu = +0.1
  nu_pos.snapshot = {3, Vec{0.0, -0.1}};
  nu_pos.samples.push_back(transition1(pol, nu_pos.snapshot.params, 0.0, 1.0, 3));
  buf.insert(std::move(nu_pos));

  GenerationRecord current;
  current.snapshot = {4, theta_k};
  current.samples.push_back(transition1(pol, theta_k, 0.0, 1.0, 4));
  buf.insert(std::move(current));

  reuse::ReuseSet sel =
      reuse::select_rule3(buf, pol, theta_k, buf.entry(3).samples, 4);
  CHECK(sel.selected_iterations == std::vector<int>{1, 2, 4});
}

TEST_CASE("rule availability is enforced") {
  policy::Policy pol = line_policy();
  Vec theta_k{0.0, 0.0};
  ReplayBuffer buf(4);
  GenerationRecord rec;
  rec.snapshot = {1, theta_k};
  rec.samples.push_back(transition1(pol, theta_k, 0.0, 1.0, 1));
  buf.insert(std::move(rec));
  CHECK_THROWS_AS(reuse::select_rule1(buf, pol, theta_k, buf.entry(0).samples, 1,
                                      1.5, est_cfg()),
                  std::invalid_argument);

  ReplayBuffer ep_buf(4);
  GenerationRecord ep;
  ep.snapshot = {1, theta_k};
  ep.samples.push_back(episode1(pol, theta_k, 1.0, 0.5, 1.0, 1));
  ep_buf.insert(std::move(ep));
  CHECK_THROWS_AS(
      reuse::select_rule3(ep_buf, pol, theta_k, ep_buf.entry(0).samples, 1),
      std::invalid_argument);
}

TEST_CASE("subsampling draws with replacement, reproducibly") {
  policy::Policy pol = line_policy();
  Vec theta{0.0, 0.0};
  ReplayBuffer buf(4);
  GenerationRecord rec;
  rec.snapshot = {1, theta};
  for (int j = 0; j < 4; ++j)
    rec.samples.push_back(episode1(pol, theta, 1.0, 0.1 * j, 1.0, 1));
  buf.insert(std::move(rec));

  reuse::ReuseSet sel;
  sel.selected_iterations = {1};
  reuse::SelectionConfig cfg;
  cfg.n0 = 4;

  RngStream a(99), b(99);
  auto pool1 = reuse::subsample_pool(buf, sel, cfg, a);
  auto pool2 = reuse::subsample_pool(buf, sel, cfg, b);
  REQUIRE(pool1.size() == 1);
  REQUIRE(pool1[0].samples.size() == 4);
  CHECK(pool1[0].samples == pool2[0].samples);  // same pointers drawn
  for (const Sample* s : pool1[0].samples) {
    bool member = false;
    for (const Sample& r : buf.entry(0).samples)
      if (&r == s) member = true;
    CHECK(member);
  }

  cfg.resample = false;
  RngStream c(1);
  auto verbatim = reuse::subsample_pool(buf, sel, cfg, c);
  REQUIRE(verbatim[0].samples.size() == 4);
  for (int j = 0; j < 4; ++j)
    CHECK(verbatim[0].samples[j] == &buf.entry(0).samples[j]);
}

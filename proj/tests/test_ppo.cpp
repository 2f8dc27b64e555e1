#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hoi/ppo.hpp"

using namespace hoi;
using namespace hoi::ppo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::shared_ptr<const sim::RefData> push_ref() {
  static std::shared_ptr<const sim::RefData> ref = [] {
    kin::RobotModel model;
    motion::HoiMotion anchor = motion::generate_reference(
        motion::Task::kBoxPush, motion::GenParams{}, model, 1);
    return sim::RefData::build(motion::MotionSet::single(anchor), model);
  }();
  return ref;
}

std::vector<sim::Environment> make_envs(int n, std::uint64_t seed) {
  std::vector<sim::Environment> envs;
  sim::SimConfig config;
  for (int e = 0; e < n; ++e)
    envs.emplace_back(push_ref(), config, sim::EnvParams{}, sim::DrRanges{},
                      false, Rng::derive(seed, "env", static_cast<std::uint64_t>(e)));
  return envs;
}

PolicyPair make_policy(std::uint64_t seed, const std::vector<int>& hidden = {32, 32}) {
  Rng rng(seed);
  return PolicyPair(hidden, 3e-4, -0.7, rng);
}

// Minimal hand-built buffer for update-rule tests.
RolloutBuffer tiny_buffer(const PolicyPair& policy, int n, Rng& rng) {
  RolloutBuffer buf;
  buf.horizon = n;
  buf.num_envs = 1;
  buf.weights = rewards::RewardWeights::defaults();
  const int ad = kin::kNumJoints;
  buf.perfect.resize(sim::PerfectState::kFlatDim, n);
  buf.imperfect.resize(sim::ImperfectState::kFlatDim, n);
  buf.actions.resize(ad, n);
  buf.pre_tanh.resize(ad, n);
  buf.log_prob.resize(n);
  buf.subrewards.resize(rewards::kNumTerms, n);
  buf.f.resize(n);
  buf.value.resize(n);
  buf.done = VectorXd::Zero(n);
  buf.phase = VectorXd::Zero(n);
  buf.bootstrap = VectorXd::Zero(1);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < sim::PerfectState::kFlatDim; ++r)
      buf.perfect(r, i) = rng.uniform(-1, 1);
    for (int r = 0; r < sim::ImperfectState::kFlatDim; ++r)
      buf.imperfect(r, i) = rng.uniform(-1, 1);
    VectorXd out = policy.actor_forward(buf.imperfect.col(i));
    nnkit::GaussianSample s = nnkit::sample_head(
        nnkit::OutputHead::kTanhGaussian, out.head(ad), out.tail(ad), rng);
    buf.actions.col(i) = s.action;
    buf.pre_tanh.col(i) = s.pre_tanh;
    buf.log_prob[i] = s.log_prob;
    buf.subrewards.col(i).setZero();
    buf.f[i] = 0.0;
    buf.value[i] = 0.0;
  }
  return buf;
}

}  // namespace

TEST_CASE("policy pair enforces the asymmetry witness on dimensions") {
  PolicyPair p = make_policy(1);
  CHECK(p.actor_spec.input_dim == 27);
  CHECK(p.critic_spec.input_dim == 48);
  CHECK(p.actor_spec.input_dim < p.critic_spec.input_dim);
}

TEST_CASE("collect: horizon 8 with 4 envs yields 32 transitions") {
  PolicyPair policy = make_policy(2);
  auto envs = make_envs(4, 7);
  PpoConfig config;
  config.horizon = 8;
  config.num_envs = 4;
  Rng rng(3);
  RolloutBuffer buf = collect_rollouts(policy, envs, 8,
                                       rewards::RewardWeights::defaults(), rng,
                                       config);
  CHECK(buf.size() == 32);
  CHECK(buf.perfect.cols() == 32);
  CHECK(buf.imperfect.cols() == 32);
}

TEST_CASE("collect: deterministic mode with a fixed seed is reproducible") {
  PpoConfig config;
  config.horizon = 16;
  config.num_envs = 2;
  for (int mode = 0; mode < 2; ++mode) {
    bool deterministic = mode == 0;
    PolicyPair p1 = make_policy(5);
    PolicyPair p2 = make_policy(5);
    auto envs1 = make_envs(2, 11);
    auto envs2 = make_envs(2, 11);
    Rng r1(13), r2(13);
    RolloutBuffer a = collect_rollouts(p1, envs1, 16,
                                       rewards::RewardWeights::defaults(), r1,
                                       config, deterministic);
    RolloutBuffer b = collect_rollouts(p2, envs2, 16,
                                       rewards::RewardWeights::defaults(), r2,
                                       config, deterministic);
    CHECK((a.imperfect - b.imperfect).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.actions - b.actions).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.f - b.f).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.log_prob - b.log_prob).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("collect: stored f equals the weighted subrewards") {
  PolicyPair policy = make_policy(6);
  auto envs = make_envs(3, 17);
  PpoConfig config;
  Rng rng(19);
  rewards::RewardWeights theta = rewards::RewardWeights::defaults();
  theta[rewards::kIg] = 0.7;
  RolloutBuffer buf = collect_rollouts(policy, envs, 12, theta, rng, config);
  for (int i = 0; i < buf.size(); ++i) {
    double f = rewards::weighted_reward(buf.subrewards.col(i), buf.weights);
    CHECK(std::abs(f - buf.f[i]) < 1e-15);
  }
}

TEST_CASE("GAE with lambda = 0 is the one-step TD residual") {
  Rng rng(23);
  RolloutBuffer buf;
  buf.horizon = 10;
  buf.num_envs = 2;
  const int n = buf.size();
  buf.f.resize(n);
  buf.value.resize(n);
  buf.done.resize(n);
  buf.bootstrap.resize(2);
  for (int i = 0; i < n; ++i) {
    buf.f[i] = rng.uniform(-1, 1);
    buf.value[i] = rng.uniform(-1, 1);
    buf.done[i] = rng.uniform() < 0.2 ? 1.0 : 0.0;
  }
  buf.bootstrap << rng.uniform(-1, 1), rng.uniform(-1, 1);
  AdvantageResult adv = gae_advantages(buf, 0.99, 0.0);
  for (int e = 0; e < 2; ++e)
    for (int t = 0; t < 10; ++t) {
      int i = buf.index(t, e);
      double next = t == 9 ? buf.bootstrap[e] : buf.value[buf.index(t + 1, e)];
      double expect = buf.f[i] + 0.99 * next * (1.0 - buf.done[i]) - buf.value[i];
      CHECK(adv.advantages[i] == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("GAE of an all-zero buffer is zero") {
  RolloutBuffer buf;
  buf.horizon = 6;
  buf.num_envs = 3;
  buf.f = VectorXd::Zero(18);
  buf.value = VectorXd::Zero(18);
  buf.done = VectorXd::Zero(18);
  buf.bootstrap = VectorXd::Zero(3);
  AdvantageResult adv = gae_advantages(buf);
  CHECK(adv.advantages.cwiseAbs().maxCoeff() == 0.0);
  CHECK(adv.returns.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("GAE matches a brute-force discounted TD-residual sum") {
  Rng rng(29);
  const double gamma = 0.99, lambda = 0.95;
  for (int trial = 0; trial < 100; ++trial) {
    RolloutBuffer buf;
    buf.horizon = 1 + static_cast<int>(rng.uniform_int(6));
    buf.num_envs = 1 + static_cast<int>(rng.uniform_int(3));
    const int n = buf.size();
    buf.f.resize(n);
    buf.value.resize(n);
    buf.done.resize(n);
    buf.bootstrap.resize(buf.num_envs);
    for (int i = 0; i < n; ++i) {
      buf.f[i] = rng.uniform(-2, 2);
      buf.value[i] = rng.uniform(-2, 2);
      buf.done[i] = rng.uniform() < 0.25 ? 1.0 : 0.0;
    }
    for (int e = 0; e < buf.num_envs; ++e) buf.bootstrap[e] = rng.uniform(-2, 2);

    AdvantageResult adv = gae_advantages(buf, gamma, lambda);
    for (int e = 0; e < buf.num_envs; ++e)
      for (int t = 0; t < buf.horizon; ++t) {
        // brute force: sum_{l>=0} (gamma lambda)^l delta_{t+l}, truncated at
        // episode ends and the horizon
        double expect = 0.0, scale = 1.0;
        for (int l = t; l < buf.horizon; ++l) {
          int i = buf.index(l, e);
          double next =
              l == buf.horizon - 1 ? buf.bootstrap[e] : buf.value[buf.index(l + 1, e)];
          double nonterm = 1.0 - buf.done[i];
          double delta = buf.f[i] + gamma * next * nonterm - buf.value[i];
          expect += scale * delta;
          if (buf.done[i] > 0.5) break;
          scale *= gamma * lambda;
        }
        CHECK(std::abs(adv.advantages[buf.index(t, e)] - expect) < 1e-10);
      }
  }
}

TEST_CASE("MC advantages implement the literal discounted-return form") {
  Rng rng(31);
  RolloutBuffer buf;
  buf.horizon = 5;
  buf.num_envs = 1;
  buf.f.resize(5);
  buf.value.resize(5);
  buf.done = VectorXd::Zero(5);
  buf.bootstrap = VectorXd::Zero(1);
  for (int i = 0; i < 5; ++i) {
    buf.f[i] = rng.uniform(0, 1);
    buf.value[i] = rng.uniform(0, 1);
  }
  const double g = 0.99;
  AdvantageResult adv = mc_advantages(buf, g);
  double expect = 0.0;
  for (int t = 4; t >= 0; --t) {
    expect = buf.f[t] + g * expect;
    CHECK(adv.returns[t] == doctest::Approx(expect).epsilon(1e-14));
    CHECK(adv.advantages[t] ==
          doctest::Approx(expect - buf.value[t]).epsilon(1e-14));
  }
}

TEST_CASE("ratio bookkeeping: log-probs recompute to the stored values") {
  PolicyPair policy = make_policy(7);
  auto envs = make_envs(2, 37);
  PpoConfig config;
  Rng rng(41);
  RolloutBuffer buf = collect_rollouts(policy, envs, 8,
                                       rewards::RewardWeights::defaults(), rng,
                                       config);
  VectorXd logp = recompute_log_probs(policy, buf);
  CHECK((logp - buf.log_prob).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero advantages leave the actor untouched") {
  PolicyPair policy = make_policy(8);
  Rng rng(43);
  RolloutBuffer buf = tiny_buffer(policy, 16, rng);
  AdvantageResult adv;
  adv.advantages = VectorXd::Zero(16);
  adv.returns = VectorXd::Constant(16, 0.5);
  PpoConfig config;
  config.epochs = 2;
  config.minibatches = 2;
  std::vector<double> actor_before = policy.actor.values;
  std::vector<double> critic_before = policy.critic.values;
  Rng shuffle(47);
  ppo_update(policy, buf, adv, config, shuffle);
  CHECK(policy.actor.values == actor_before);      // no policy gradient
  CHECK(policy.critic.values != critic_before);    // value regression ran
}

TEST_CASE("clip saturation gates out the gradient") {
  PolicyPair policy = make_policy(9);
  Rng rng(53);
  RolloutBuffer buf = tiny_buffer(policy, 2, rng);
  // sample 0: ratio = 1 + 2 clip with positive advantage -> clipped, inactive
  // sample 1: ratio = 1/(1+2 clip) with negative advantage -> clipped, inactive
  const double clip = 0.2;
  buf.log_prob[0] -= 0.0;  // placeholder, set below
  VectorXd true_logp = recompute_log_probs(policy, buf);
  buf.log_prob[0] = true_logp[0] - std::log(1.0 + 2.0 * clip);
  buf.log_prob[1] = true_logp[1] + std::log(1.0 + 2.0 * clip);
  AdvantageResult adv;
  adv.advantages.resize(2);
  adv.advantages << 1.0, -1.0;
  adv.returns = VectorXd::Zero(2);
  PpoConfig config;
  config.clip = clip;
  config.epochs = 1;
  config.minibatches = 1;
  std::vector<double> actor_before = policy.actor.values;
  Rng shuffle(59);
  LossReport report = ppo_update(policy, buf, adv, config, shuffle);
  CHECK(policy.actor.values == actor_before);
  CHECK(report.clip_fraction == 1.0);
}

TEST_CASE("one update raises the probability of positive-advantage actions") {
  PolicyPair policy = make_policy(10, {16, 16});
  Rng rng(61);
  RolloutBuffer buf = tiny_buffer(policy, 6, rng);
  AdvantageResult adv;
  adv.advantages.resize(6);
  adv.advantages << 1.0, 1.0, 1.0, -1.0, -1.0, -1.0;
  adv.returns = VectorXd::Zero(6);
  VectorXd before = recompute_log_probs(policy, buf);
  PpoConfig config;
  config.epochs = 1;
  config.minibatches = 1;
  config.lr = 1e-3;
  PolicyPair updated = policy;
  Rng shuffle(67);
  ppo_update(updated, buf, adv, config, shuffle);
  VectorXd after = recompute_log_probs(updated, buf);
  for (int i = 0; i < 3; ++i) CHECK(after[i] > before[i]);
  for (int i = 3; i < 6; ++i) CHECK(after[i] < before[i]);
}

TEST_CASE("asymmetry: privileged perturbations never reach the actor") {
  PolicyPair policy = make_policy(11);
  sim::PerfectState s;
  Rng rng(71);
  for (int j = 0; j < kin::kNumJoints; ++j) {
    s.q[j] = rng.uniform(-1, 1);
    s.qd[j] = rng.uniform(-1, 1);
    s.a_prev[j] = rng.uniform(-1, 1);
  }
  s.object_pos = {0.4, 0.8};
  s.object_vel = {0.1, -0.2};
  s.object_rot = 0.3;
  s.s_ig.setRandom();
  s.h_o = {true, false};
  s.phase = 0.4;

  sim::EnvParams clean;  // no noise, latency, dropout
  sim::ObsChannel ch1, ch2;
  ch1.reset(s.object_pos, 0);
  ch2.reset(s.object_pos, 0);
  Rng r1(1), r2(1);
  sim::ImperfectState im1 = sim::observe_imperfect(s, clean, r1, ch1);

  sim::PerfectState perturbed = s;
  perturbed.s_ig.array() += 3.0;
  perturbed.h_o = {false, true};
  perturbed.object_vel = {9.0, 9.0};
  perturbed.object_rot = -2.0;
  sim::ImperfectState im2 = sim::observe_imperfect(perturbed, clean, r2, ch2);

  VectorXd a1 = policy.actor_forward(im1.flatten(0.1));
  VectorXd a2 = policy.actor_forward(im2.flatten(0.1));
  CHECK((a1 - a2).cwiseAbs().maxCoeff() == 0.0);

  double v1 = policy.critic_value(s.flatten(0.1));
  double v2 = policy.critic_value(perturbed.flatten(0.1));
  CHECK(v1 != v2);
}

TEST_CASE("critic-only regression drives the value loss below 1e-3") {
  PolicyPair policy = make_policy(12, {32, 32});
  Rng rng(73);
  const int n = 256;
  MatrixXd states(sim::PerfectState::kFlatDim, n);
  VectorXd targets(n);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < states.rows(); ++r) states(r, i) = rng.uniform(-1, 1);
    targets[i] = 0.3 * states(0, i) - 0.7 * states(5, i) + 0.2;
  }
  nnkit::ForwardCache cache;
  double loss = 1.0;
  for (int iter = 0; iter < 3000; ++iter) {
    const MatrixXd& v =
        nnkit::net_forward(policy.critic_spec, policy.critic, states, cache);
    MatrixXd grad(1, n);
    loss = 0.0;
    for (int i = 0; i < n; ++i) {
      double err = v(0, i) - targets[i];
      loss += err * err;
      grad(0, i) = 2.0 * err / n;
    }
    loss /= n;
    if (loss < 1e-3) break;
    nnkit::net_backward(policy.critic_spec, policy.critic, cache, grad);
    nnkit::opt_step(policy.critic, policy.critic.grads, policy.critic_opt);
  }
  CHECK(loss < 1e-3);
}

TEST_CASE("checkpoint round trip restores the policy pair") {
  PolicyPair policy = make_policy(13);
  policy.save("pp_actor.irnk", "pp_critic.irnk");
  PolicyPair loaded = make_policy(14);
  loaded.load("pp_actor.irnk", "pp_critic.irnk");
  CHECK(loaded.actor.values == policy.actor.values);
  CHECK(loaded.critic.values == policy.critic.values);
  std::remove("pp_actor.irnk");
  std::remove("pp_critic.irnk");
}

#include "hoi/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hoi::ppo {

using nnkit::ForwardCache;
using nnkit::net_backward;
using nnkit::net_forward;

void PpoConfig::validate() const {
  if (horizon < 1 || num_envs < 1) throw ConfigError("ppo: horizon and num_envs must be >= 1");
  if (gamma <= 0 || gamma > 1) throw ConfigError("ppo: gamma must be in (0, 1]");
  if (lambda < 0 || lambda > 1) throw ConfigError("ppo: lambda must be in [0, 1]");
  if (clip <= 0) throw ConfigError("ppo: clip must be > 0");
  if (epochs < 1 || minibatches < 1) throw ConfigError("ppo: epochs and minibatches must be >= 1");
  if (lr <= 0) throw ConfigError("ppo: learning rate must be > 0");
}

PolicyPair::PolicyPair(const std::vector<int>& hidden, double lr,
                       double init_log_std, Rng& rng) {
  actor_spec = {sim::ImperfectState::kFlatDim, hidden, kin::kNumJoints,
                nnkit::Activation::kTanh, nnkit::OutputHead::kTanhGaussian};
  critic_spec = {sim::PerfectState::kFlatDim, hidden, 1,
                 nnkit::Activation::kTanh, nnkit::OutputHead::kLinear};
  if (actor_spec.input_dim >= critic_spec.input_dim)
    throw ContractError("PolicyPair: actor input must be strictly smaller "
                        "than critic input (asymmetry witness)");
  actor = nnkit::make_params(actor_spec, rng);
  critic = nnkit::make_params(critic_spec, rng);
  nnkit::set_log_std_bias(actor_spec, actor, init_log_std);
  actor_opt = nnkit::make_opt(actor, lr);
  critic_opt = nnkit::make_opt(critic, lr);
}

VectorXd PolicyPair::actor_forward(const VectorXd& imperfect_flat) const {
  return net_forward(actor_spec, actor, imperfect_flat);
}

double PolicyPair::critic_value(const VectorXd& perfect_flat) const {
  return net_forward(critic_spec, critic, perfect_flat)[0];
}

void PolicyPair::save(const std::string& actor_path,
                      const std::string& critic_path) const {
  nnkit::save_net(actor_path, actor_spec, actor);
  nnkit::save_net(critic_path, critic_spec, critic);
}

void PolicyPair::load(const std::string& actor_path,
                      const std::string& critic_path) {
  nnkit::load_net(actor_path, actor_spec, actor);
  nnkit::load_net(critic_path, critic_spec, critic);
  if (actor_spec.input_dim != sim::ImperfectState::kFlatDim ||
      critic_spec.input_dim != sim::PerfectState::kFlatDim)
    throw ConfigError("PolicyPair: checkpoint dims do not match the state "
                      "layout (actor " + std::to_string(actor_spec.input_dim) +
                      ", critic " + std::to_string(critic_spec.input_dim) + ")");
  actor_opt = nnkit::make_opt(actor, actor_opt.lr);
  critic_opt = nnkit::make_opt(critic, critic_opt.lr);
}

RolloutBuffer collect_rollouts(PolicyPair& policy,
                               std::vector<sim::Environment>& envs,
                               int horizon,
                               const rewards::RewardWeights& theta,
                               Rng& action_rng, const PpoConfig& config,
                               bool deterministic) {
  config.validate();
  theta.validate();
  const int E = static_cast<int>(envs.size());
  if (E == 0) throw ContractError("collect_rollouts: no environments");
  const int N = horizon * E;
  const double theta_ig = theta[rewards::kIg];

  RolloutBuffer buf;
  buf.horizon = horizon;
  buf.num_envs = E;
  buf.weights = theta;
  buf.perfect.resize(sim::PerfectState::kFlatDim, N);
  buf.imperfect.resize(sim::ImperfectState::kFlatDim, N);
  buf.actions.resize(kin::kNumJoints, N);
  buf.pre_tanh.resize(kin::kNumJoints, N);
  buf.log_prob.resize(N);
  buf.subrewards.resize(rewards::kNumTerms, N);
  buf.f.resize(N);
  buf.value.resize(N);
  buf.done.resize(N);
  buf.phase.resize(N);
  buf.bootstrap.resize(E);

  MatrixXd actor_in(sim::ImperfectState::kFlatDim, E);
  MatrixXd critic_in(sim::PerfectState::kFlatDim, E);
  std::vector<sim::PerfectState> states(static_cast<std::size_t>(E));

  ForwardCache actor_cache, critic_cache;
  for (int t = 0; t < horizon; ++t) {
    for (int e = 0; e < E; ++e) {
      sim::Environment& env = envs[static_cast<std::size_t>(e)];
      if (env.episode_done()) env.reset();
      states[static_cast<std::size_t>(e)] = env.state();
      sim::ImperfectState im = env.observe(states[static_cast<std::size_t>(e)]);
      actor_in.col(e) = im.flatten(config.qd_scale);
      critic_in.col(e) = states[static_cast<std::size_t>(e)].flatten(config.qd_scale);
    }
    const MatrixXd& actor_out =
        net_forward(policy.actor_spec, policy.actor, actor_in, actor_cache);
    const MatrixXd& values =
        net_forward(policy.critic_spec, policy.critic, critic_in, critic_cache);

    for (int e = 0; e < E; ++e) {
      sim::Environment& env = envs[static_cast<std::size_t>(e)];
      const int i = buf.index(t, e);
      const int d = kin::kNumJoints;
      VectorXd mean = actor_out.col(e).head(d);
      VectorXd log_std = actor_out.col(e).tail(d);

      JointVec action;
      VectorXd pre_tanh(d);
      double logp;
      if (deterministic) {
        VectorXd a = nnkit::mean_action(nnkit::OutputHead::kTanhGaussian, mean);
        for (int j = 0; j < d; ++j) {
          action[j] = a[j];
          pre_tanh[j] = mean[j];
        }
        logp = nnkit::log_prob_head(nnkit::OutputHead::kTanhGaussian, mean,
                                    log_std, pre_tanh);
      } else {
        nnkit::GaussianSample s = nnkit::sample_head(
            nnkit::OutputHead::kTanhGaussian, mean, log_std, action_rng);
        for (int j = 0; j < d; ++j) action[j] = s.action[j];
        pre_tanh = s.pre_tanh;
        logp = s.log_prob;
      }

      const JointVec prev_action = states[static_cast<std::size_t>(e)].a_prev;
      sim::StepResult sr = env.step(action);
      const sim::PerfectState& post = env.state();

      rewards::RewardContext ctx;
      ctx.state = &post;
      ctx.fk = &env.fk();
      ctx.torque = &env.torque();
      ctx.ref = &env.ref_frame();
      ctx.action = &action;
      ctx.prev_action = &prev_action;
      rewards::SubRewardVector r = rewards::compute_subrewards(ctx, theta_ig);
      double f = rewards::weighted_reward(r, theta);

      buf.perfect.col(i) = critic_in.col(e);
      buf.imperfect.col(i) = actor_in.col(e);
      for (int j = 0; j < d; ++j) {
        buf.actions(j, i) = action[j];
        buf.pre_tanh(j, i) = pre_tanh[j];
      }
      buf.log_prob[i] = logp;
      buf.subrewards.col(i) = r;
      buf.f[i] = f;
      buf.value[i] = values(0, e);
      buf.done[i] = sr.done ? 1.0 : 0.0;
      buf.phase[i] = post.phase;

      const sim::RefFrame& ref = env.ref_frame();
      buf.mean_e_jp += (post.q - ref.q).squaredNorm();
      buf.mean_e_op += (post.object_pos - ref.object.position()).squaredNorm();
      const auto links = env.fk().link_positions();
      double e_lp = 0.0;
      for (std::size_t li = 0; li < links.size(); ++li)
        e_lp += (links[li] - ref.link_pos[li]).squaredNorm();
      buf.mean_e_lp += e_lp;
      buf.mean_subrewards += r;
      buf.mean_f += f;
      if (sr.done) {
        buf.episodes_ended++;
        // fraction of the remaining reference the episode survived
        const double planned =
            std::max(1, env.frames_total() - 1 - env.start_frame());
        buf.ep_len_frac_sum +=
            std::min(1.0, static_cast<double>(env.episode_steps()) / planned);
        buf.phase_reached_sum += post.phase;
      }
    }
  }

  for (int e = 0; e < E; ++e) {
    critic_in.col(e) = envs[static_cast<std::size_t>(e)].state().flatten(config.qd_scale);
  }
  const MatrixXd& boot =
      net_forward(policy.critic_spec, policy.critic, critic_in, critic_cache);
  for (int e = 0; e < E; ++e) buf.bootstrap[e] = boot(0, e);

  buf.mean_e_jp /= N;
  buf.mean_e_op /= N;
  buf.mean_e_lp /= N;
  buf.mean_subrewards /= N;
  buf.mean_f /= N;
  return buf;
}

AdvantageResult gae_advantages(const RolloutBuffer& buffer, double gamma,
                               double lambda) {
  const int T = buffer.horizon, E = buffer.num_envs;
  AdvantageResult out;
  out.advantages.resize(buffer.size());
  out.returns.resize(buffer.size());
  for (int e = 0; e < E; ++e) {
    double acc = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      const int i = buffer.index(t, e);
      const double nonterminal = 1.0 - buffer.done[i];
      const double next_value =
          t == T - 1 ? buffer.bootstrap[e] : buffer.value[buffer.index(t + 1, e)];
      const double delta =
          buffer.f[i] + gamma * next_value * nonterminal - buffer.value[i];
      acc = delta + gamma * lambda * nonterminal * acc;
      out.advantages[i] = acc;
      out.returns[i] = acc + buffer.value[i];
    }
  }
  return out;
}

AdvantageResult mc_advantages(const RolloutBuffer& buffer, double gamma) {
  const int T = buffer.horizon, E = buffer.num_envs;
  AdvantageResult out;
  out.advantages.resize(buffer.size());
  out.returns.resize(buffer.size());
  for (int e = 0; e < E; ++e) {
    double ret = buffer.bootstrap[e];
    for (int t = T - 1; t >= 0; --t) {
      const int i = buffer.index(t, e);
      const double nonterminal = 1.0 - buffer.done[i];
      if (t == T - 1)
        ret = buffer.f[i] + gamma * buffer.bootstrap[e] * nonterminal;
      else
        ret = buffer.f[i] + gamma * ret * nonterminal;
      out.returns[i] = ret;
      out.advantages[i] = ret - buffer.value[i];
    }
  }
  return out;
}

VectorXd recompute_log_probs(const PolicyPair& policy,
                             const RolloutBuffer& buffer) {
  ForwardCache cache;
  const MatrixXd& out =
      net_forward(policy.actor_spec, policy.actor, buffer.imperfect, cache);
  const int d = kin::kNumJoints;
  VectorXd logp(buffer.size());
  for (int i = 0; i < buffer.size(); ++i) {
    logp[i] = nnkit::log_prob_head(nnkit::OutputHead::kTanhGaussian,
                                   out.col(i).head(d), out.col(i).tail(d),
                                   buffer.pre_tanh.col(i));
  }
  return logp;
}

LossReport ppo_update(PolicyPair& policy, const RolloutBuffer& buffer,
                      const AdvantageResult& adv, const PpoConfig& config,
                      Rng& shuffle_rng) {
  config.validate();
  const int N = buffer.size();
  if (adv.advantages.size() != N || adv.returns.size() != N)
    throw ContractError("ppo_update: buffer and advantages misaligned");

  // Advantage normalization per update batch.
  VectorXd a_norm = adv.advantages;
  const double mean = a_norm.mean();
  a_norm.array() -= mean;
  const double var = a_norm.squaredNorm() / N;
  const double scale = 1.0 / std::max(std::sqrt(var), 1e-8);
  a_norm *= scale;

  const int d = kin::kNumJoints;
  LossReport report;
  int passes = 0;
  long clip_hits = 0, clip_total = 0;

  std::vector<int> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);

  ForwardCache actor_cache, critic_cache;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the dedicated update stream.
    for (int i = N - 1; i > 0; --i) {
      int j = static_cast<int>(shuffle_rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    for (int mb = 0; mb < config.minibatches; ++mb) {
      const int lo = static_cast<int>(static_cast<long>(N) * mb / config.minibatches);
      const int hi = static_cast<int>(static_cast<long>(N) * (mb + 1) / config.minibatches);
      const int m = hi - lo;
      if (m <= 0) continue;

      MatrixXd actor_in(sim::ImperfectState::kFlatDim, m);
      MatrixXd critic_in(sim::PerfectState::kFlatDim, m);
      for (int k = 0; k < m; ++k) {
        const int i = order[static_cast<std::size_t>(lo + k)];
        actor_in.col(k) = buffer.imperfect.col(i);
        critic_in.col(k) = buffer.perfect.col(i);
      }

      // ---- actor ----
      const MatrixXd& actor_out =
          net_forward(policy.actor_spec, policy.actor, actor_in, actor_cache);
      MatrixXd actor_grad = MatrixXd::Zero(2 * d, m);
      double policy_loss = 0.0, entropy_sum = 0.0;
      for (int k = 0; k < m; ++k) {
        const int i = order[static_cast<std::size_t>(lo + k)];
        const auto mean_k = actor_out.col(k).head(d);
        const auto log_std_k = actor_out.col(k).tail(d);
        double logp = nnkit::log_prob_head(nnkit::OutputHead::kTanhGaussian,
                                           mean_k, log_std_k,
                                           buffer.pre_tanh.col(i));
        const double ratio = std::exp(logp - buffer.log_prob[i]);
        const double a = a_norm[i];
        const double surr1 = ratio * a;
        const double clipped =
            std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
        const double surr2 = clipped * a;
        policy_loss += -std::min(surr1, surr2);
        entropy_sum += -logp;
        clip_total++;
        if (std::abs(ratio - 1.0) > config.clip) clip_hits++;

        double dl_dlogp = surr1 <= surr2 ? -a * ratio / m : 0.0;
        dl_dlogp += config.entropy_coef * (1.0 / m);  // bonus on -E[-logp]
        if (dl_dlogp != 0.0) {
          for (int j = 0; j < d; ++j) {
            const double std_j = std::exp(log_std_k[j]);
            const double xi = (buffer.pre_tanh(j, i) - mean_k[j]) / std_j;
            actor_grad(j, k) = dl_dlogp * (xi / std_j);
            actor_grad(d + j, k) = dl_dlogp * (xi * xi - 1.0);
          }
        }
      }
      net_backward(policy.actor_spec, policy.actor, actor_cache, actor_grad);
      nnkit::opt_step(policy.actor, policy.actor.grads, policy.actor_opt);

      // ---- critic ----
      const MatrixXd& values = net_forward(policy.critic_spec, policy.critic,
                                           critic_in, critic_cache);
      MatrixXd critic_grad(1, m);
      double value_loss = 0.0;
      for (int k = 0; k < m; ++k) {
        const int i = order[static_cast<std::size_t>(lo + k)];
        const double err = values(0, k) - adv.returns[i];
        value_loss += err * err;
        critic_grad(0, k) = 2.0 * err / m;
      }
      value_loss /= m;
      net_backward(policy.critic_spec, policy.critic, critic_cache, critic_grad);
      nnkit::opt_step(policy.critic, policy.critic.grads, policy.critic_opt);

      report.policy_loss += policy_loss / m;
      report.value_loss += value_loss;
      report.entropy += entropy_sum / m;
      passes++;

      if (!std::isfinite(policy_loss) || !std::isfinite(value_loss))
        throw NumericalFault("ppo_update: non-finite loss (policy " +
                             fmt_double(policy_loss) + ", value " +
                             fmt_double(value_loss) + ")");
    }
  }
  report.policy_loss /= passes;
  report.value_loss /= passes;
  report.entropy /= passes;
  report.clip_fraction =
      clip_total > 0 ? static_cast<double>(clip_hits) / clip_total : 0.0;
  return report;
}

}  // namespace hoi::ppo

#pragma once

#include <Eigen/Core>
#include <vector>

#include "hoi/nnkit.hpp"
#include "hoi/rewards.hpp"
#include "hoi/simenv.hpp"

namespace hoi::ppo {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using kin::JointVec;

struct PpoConfig {
  int horizon = 32;
  int num_envs = 64;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatches = 4;
  double lr = 3e-4;  // beta
  double entropy_coef = 0.0;
  bool mc_advantage = false;  // literal discounted-return form instead of GAE
  double init_log_std = -0.7;
  double qd_scale = 0.1;

  void validate() const;
};

// Asymmetric actor-critic: the actor sees ImperfectState (27), the critic
// sees PerfectState (48).
struct PolicyPair {
  nnkit::NetSpec actor_spec;
  nnkit::NetSpec critic_spec;
  nnkit::ParamSet actor;
  nnkit::ParamSet critic;
  nnkit::OptState actor_opt;
  nnkit::OptState critic_opt;

  PolicyPair() = default;
  PolicyPair(const std::vector<int>& hidden, double lr, double init_log_std,
             Rng& rng);

  VectorXd actor_forward(const VectorXd& imperfect_flat) const;
  double critic_value(const VectorXd& perfect_flat) const;

  void save(const std::string& actor_path, const std::string& critic_path) const;
  void load(const std::string& actor_path, const std::string& critic_path);
};

// Frozen on-policy buffer of horizon x num_envs transitions, flattened with
// index t * num_envs + e.
struct RolloutBuffer {
  int horizon = 0;
  int num_envs = 0;
  MatrixXd perfect;     // critic inputs (pre-step states)
  MatrixXd imperfect;   // actor inputs
  MatrixXd actions;     // squashed actions applied to the env
  MatrixXd pre_tanh;    // raw gaussian draws behind the actions
  VectorXd log_prob;    // behavior-policy log-probabilities
  MatrixXd subrewards;  // K x N
  VectorXd f;           // weighted rewards at collection-time weights
  VectorXd value;       // V(s_t) under the collection critic
  VectorXd done;        // 1.0 where the episode ended at this transition
  VectorXd phase;
  VectorXd bootstrap;   // V(s_horizon) per env
  rewards::RewardWeights weights;  // Theta active during collection

  // Window statistics consumed by the outer loop and the event log.
  double mean_e_jp = 0.0;  // mean ||q - q_ref||^2 over the buffer
  double mean_e_op = 0.0;
  double mean_e_lp = 0.0;
  rewards::SubRewardVector mean_subrewards = rewards::SubRewardVector::Zero();
  double mean_f = 0.0;
  int episodes_ended = 0;
  double ep_len_frac_sum = 0.0;   // over episodes ended in this buffer
  double phase_reached_sum = 0.0;

  int size() const { return horizon * num_envs; }
  int index(int t, int e) const { return t * num_envs + e; }
};

// Samples the actor on every environment, steps them in index order, and
// scores transitions with the supplied weights. Environments auto-reset on
// termination. theta_ig is the meta-driven ig sensitivity (the ig entry of
// the active weights).
RolloutBuffer collect_rollouts(PolicyPair& policy,
                               std::vector<sim::Environment>& envs,
                               int horizon,
                               const rewards::RewardWeights& theta,
                               Rng& action_rng, const PpoConfig& config,
                               bool deterministic = false);

struct AdvantageResult {
  VectorXd advantages;  // raw; normalization happens inside ppo_update
  VectorXd returns;
};

// Generalized advantage estimation over per-environment streams.
AdvantageResult gae_advantages(const RolloutBuffer& buffer, double gamma = 0.99,
                               double lambda = 0.95);
// Literal form: discounted reward-to-go minus value.
AdvantageResult mc_advantages(const RolloutBuffer& buffer, double gamma = 0.99);

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Clipped-surrogate update on the actor plus squared-error regression on the
// critic, with advantages normalized per update batch.
LossReport ppo_update(PolicyPair& policy, const RolloutBuffer& buffer,
                      const AdvantageResult& adv, const PpoConfig& config,
                      Rng& shuffle_rng);

// Recomputes actor log-probabilities of the stored actions under the current
// parameters (ratio bookkeeping check; equals log_prob right after collect).
VectorXd recompute_log_probs(const PolicyPair& policy,
                             const RolloutBuffer& buffer);

}  // namespace hoi::ppo

#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "hoi/nnkit.hpp"
#include "hoi/rewards.hpp"

namespace hoi::metasac {

using Eigen::VectorXd;

constexpr int kK = rewards::kNumTerms;
constexpr int kMetaStateDim = 2 * kK + 6;  // 26

// sigma(t) = clip(1 - c4/t, delta, 1); t = 0 is defined as delta.
double sigma_schedule(int t, double c4, double delta);

enum class WeightRule {
  kModulate,  // theta' = theta0 * (1 + sigma * A * action), clamped >= 0
  kLiteral,   // theta' = theta0 * sigma * action, clamped >= 0
};

rewards::RewardWeights apply_weights(const rewards::RewardWeights& theta0,
                                     double sigma, const VectorXd& action,
                                     double span,
                                     WeightRule rule = WeightRule::kModulate);

// G = -(sum(E_cur) - sum(E_prev)) / dt: error reduction earns positive
// meta-reward.
double meta_reward(const Eigen::Vector3d& e_prev, const Eigen::Vector3d& e_cur,
                   double dt = 1.0);

// Per-inner-epoch aggregates logged by the trainer, consumed in windows of N.
struct EpochStats {
  double e_jp = 0.0;
  double e_op = 0.0;
  double e_lp = 0.0;
  rewards::SubRewardVector subrewards = rewards::SubRewardVector::Zero();
  double ep_len_frac = 1.0;
  double phase_reached = 0.0;
};

// u_t layout: [mean e_jp, e_op, e_lp | mean subrewards (K) | scaled Theta (K)
// | progress | mean episode-length fraction | mean phase reached].
// Theta entries are scaled by 1 / (2 * theta0_k) (1 where theta0_k = 0).
VectorXd build_meta_state(const std::vector<EpochStats>& window,
                          const rewards::RewardWeights& theta,
                          const rewards::RewardWeights& theta0,
                          double progress);

struct SubtaskRecord {
  VectorXd u;
  VectorXd u_next;
  VectorXd action;    // squashed meta-action in [-1, 1]^K
  VectorXd pre_tanh;
  rewards::RewardWeights theta_applied;
  double g = 0.0;
  bool done = false;
};

struct MetaConfig {
  std::vector<int> hidden = {64, 64};
  double lr = 1e-3;
  double gamma = 0.95;  // gamma_meta
  double tau = 0.005;   // Polyak factor
  double alpha = 0.1;   // fixed entropy temperature
  int batch = 32;
  int updates_per_subtask = 8;
  double action_span = 0.5;  // A
  double c4 = 0.0;  // <= 0 resolves to the run's total epoch budget
  double delta = 0.1;
  int subtask_epochs = 10;  // N
  double init_log_std = -0.7;
  WeightRule rule = WeightRule::kModulate;

  void validate() const;
};

// Squashed-gaussian policy with twin Q critics and Polyak-averaged targets.
struct MetaNets {
  nnkit::NetSpec policy_spec;
  nnkit::NetSpec q_spec;
  nnkit::ParamSet policy;
  nnkit::ParamSet q1, q2;
  nnkit::ParamSet q1_target, q2_target;
  nnkit::OptState policy_opt, q1_opt, q2_opt;

  MetaNets() = default;
  MetaNets(const std::vector<int>& hidden, double lr, double init_log_std,
           Rng& rng);

  nnkit::GaussianSample sample(const VectorXd& u, Rng& rng) const;
  VectorXd mean_action(const VectorXd& u) const;
};

struct SacReport {
  bool skipped = false;
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;  // -mean log-prob of fresh samples
};

// One SAC update on a uniformly sampled batch; skipped (and reported as
// such) while the buffer is smaller than the batch size.
SacReport sac_update(MetaNets& nets, const std::vector<SubtaskRecord>& buffer,
                     const MetaConfig& config, Rng& rng);

// Per-boundary log row (the data behind weight-adaptation plots).
struct BoundaryLog {
  int subtask = 0;
  int epoch = 0;
  double sigma = 0.0;
  VectorXd action;
  rewards::RewardWeights theta;
  double g = 0.0;  // meta-reward closing the previous record (0 for the first)
  bool sac_ran = false;
};

// Outer-loop driver: owns the meta networks, the subtask replay buffer, and
// the open record between boundaries. All randomness comes from its own
// stream, so a sigma = 0 schedule leaves the inner loop bit-identical to a
// build with the outer loop disabled.
class OuterLoop {
 public:
  OuterLoop(const rewards::RewardWeights& theta0, const MetaConfig& config,
            Rng rng);

  // Called after inner epoch `epoch` completes a subtask window. Returns the
  // weights for the next subtask; `final_boundary` closes the last record
  // without sampling a new action.
  rewards::RewardWeights step(int epoch, const std::vector<EpochStats>& window,
                              double progress, bool final_boundary);

  const std::vector<SubtaskRecord>& records() const { return buffer_; }
  const std::vector<BoundaryLog>& logs() const { return logs_; }
  const MetaNets& nets() const { return nets_; }
  MetaNets& nets() { return nets_; }
  int boundaries() const { return boundaries_; }

 private:
  rewards::RewardWeights theta0_;
  rewards::RewardWeights current_;
  MetaConfig config_;
  Rng rng_;
  MetaNets nets_;
  std::vector<SubtaskRecord> buffer_;
  std::vector<BoundaryLog> logs_;
  int boundaries_ = 0;
  bool record_open_ = false;
  SubtaskRecord open_record_;
  Eigen::Vector3d prev_errors_ = Eigen::Vector3d::Zero();
};

}  // namespace hoi::metasac

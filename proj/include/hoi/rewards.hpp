#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "hoi/simenv.hpp"

namespace hoi::rewards {

using Eigen::Vector2d;
using kin::JointVec;

constexpr int kNumTerms = 10;  // K

// Fixed term order; serialized everywhere with these names.
enum Term {
  kJp = 0,  // joint position
  kJv,      // joint velocity
  kLp,      // link position
  kLr,      // link rotation
  kOp,      // object position
  kOr,      // object rotation
  kIg,      // interaction graph
  kCm,      // contact match
  kAr,      // action-rate penalty
  kTq,      // torque penalty
};
extern const std::array<const char*, kNumTerms> kTermNames;

using TermVec = Eigen::Matrix<double, kNumTerms, 1>;
using SubRewardVector = TermVec;

// The K-vector of sub-reward weights, the outer loop's action target.
struct RewardWeights {
  TermVec values = TermVec::Zero();

  double operator[](int k) const { return values[k]; }
  double& operator[](int k) { return values[k]; }
  static RewardWeights defaults();
  void validate() const;  // all >= 0
};

// Fixed sensitivities inside the exponential tracking terms. The ig term's
// sensitivity is supplied externally per call (it is the meta-driven weight
// itself), so it has no entry here.
struct Sensitivities {
  double jp = 2.0;
  double jv = 0.1;
  double lp = 5.0;
  double lr = 2.0;
  double op = 5.0;
  double orot = 2.0;
  double cm = 2.0;
};

// Everything a sub-reward evaluation reads for a single post-step state.
struct RewardContext {
  const sim::PerfectState* state = nullptr;
  const kin::FkResult* fk = nullptr;
  const JointVec* torque = nullptr;
  const sim::RefFrame* ref = nullptr;
  const JointVec* action = nullptr;       // a_t
  const JointVec* prev_action = nullptr;  // a_{t-1}
};

// Tracking terms are exp(-c * e) with e the squared L2 deviation from the
// reference; penalties are negative quadratics. The ig term follows
// r = exp(-theta_ig * ||s_ig - s_ig_ref||^2).
SubRewardVector compute_subrewards(const RewardContext& ctx, double theta_ig,
                                   const Sensitivities& c = {});

// f_t(Theta): plain dot product in the fixed term order.
double weighted_reward(const SubRewardVector& r, const RewardWeights& theta);

// ---------------------------------------------------------------- metrics

// One sampled point of a rollout, aligned to a reference frame index.
struct TrajPoint {
  JointVec q = JointVec::Zero();
  std::array<Vector2d, kin::FkResult::kNumLinks> link_pos;
  std::array<double, kin::FkResult::kNumHeadings> link_heading{};
  Vector2d object_pos = Vector2d::Zero();
  double object_rot = 0.0;
  sim::IgVec s_ig = sim::IgVec::Zero();
  int frame = 0;
};

struct MetricsReport {
  double e_mpjpe = 0.0;  // rad
  double e_mllpe = 0.0;  // m, lower links (torso base)
  double e_mulpe = 0.0;  // m, upper links
  double e_m3lpe = 0.0;  // m, torso top + wrists
  double e_mope = 0.0;   // m
  double e_morae = 0.0;  // rad
  double e_mige = 0.0;
  double e_mlrae = 0.0;  // rad
  double e_jp = 0.0;     // mean squared joint-vector error
  double e_op = 0.0;
  double e_lp = 0.0;
  bool success = false;

  static const std::vector<std::string>& column_names();
  std::vector<double> to_row() const;
};

// Mean tracking errors of a trajectory against the reference frames it
// visited. Throws ContractError if a point's frame index is out of range.
MetricsReport tracking_errors(const std::vector<TrajPoint>& trajectory,
                              const std::vector<sim::RefFrame>& reference);

// ---------------------------------------------------------------- success

struct SuccessParams {
  double pos_tol = 0.05;  // m
  double rot_tol = 0.2;   // rad
};

struct EpisodeRecord {
  bool fault = false;
  bool completed = false;
  kin::Pose2 final_object;
  kin::Pose2 goal_object;  // reference object pose at the final frame
  bool final_attached = false;
  double table_height = 0.75;
  double box_h = 0.12;
  bool is_pick = false;
};

// Completing the whole task without the fall analog; pick tasks must also
// end holding the object above the table.
bool success(const EpisodeRecord& episode, const SuccessParams& params = {});

}  // namespace hoi::rewards

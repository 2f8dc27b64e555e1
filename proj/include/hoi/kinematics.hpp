#pragma once

#include <Eigen/Core>
#include <array>
#include <string>

#include "hoi/common.hpp"

namespace hoi::kin {

using Eigen::Vector2d;
using Eigen::Vector3d;

// Planar rigid pose: position plus heading, heading normalized to (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vector2d position() const { return {x, y}; }
  Pose2 normalized() const { return {x, y, wrap_angle(theta)}; }
};

// Rigid planar map p' = R(rot) p + t. Composable and invertible; forms a
// group (checked by the unit tests to 1e-12).
struct FrameTransform {
  double rot = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Vector2d apply(const Vector2d& p) const;
  Pose2 apply(const Pose2& p) const;
  FrameTransform compose(const FrameTransform& inner) const;  // this ∘ inner
  FrameTransform inverse() const;
  static FrameTransform identity() { return {}; }
  // Map from world coordinates into the frame whose pose (in world) is given.
  static FrameTransform world_to_frame(const Pose2& frame_pose_in_world);
  static FrameTransform frame_to_world(const Pose2& frame_pose_in_world);
};

// Joint order of the 7-DoF planar robot.
enum Joint {
  kTorsoPitch = 0,
  kLShoulder = 1,
  kLElbow = 2,
  kLWrist = 3,
  kRShoulder = 4,
  kRElbow = 5,
  kRWrist = 6,
};
constexpr int kNumJoints = 7;
enum class Arm { kLeft, kRight };

extern const std::array<const char*, kNumJoints> kJointNames;

using JointVec = Eigen::Matrix<double, kNumJoints, 1>;

// Desk-scale planar robot: a pitch-actuated torso carrying two identical
// 3-joint arms (shoulder, elbow, wrist) that share the torso-top attachment
// point. Geometry conventions (heading 0 = +x, angles CCW):
//   torso heading   = root.theta + pi/2 + q[torso]
//   upper-arm heading = root.theta + q[torso] + q[shoulder]
//   forearm heading = upper + q[elbow];  hand heading = forearm + q[wrist]
// so q = 0 points both arms along the root frame's +x axis.
struct RobotModel {
  double torso_len = 0.30;
  double upper_len = 0.34;
  double fore_len = 0.32;
  double hand_len = 0.0;  // wrist-to-end-effector offset along the hand

  std::array<double, kNumJoints> q_lo{-1.0, -2.4, -2.7, -1.6, -2.4, -2.7, -1.6};
  std::array<double, kNumJoints> q_hi{1.0, 1.6, 0.35, 1.6, 1.6, 0.35, 1.6};
  std::array<double, kNumJoints> qd_max{8.0, 8.0, 8.0, 8.0, 8.0, 8.0, 8.0};
  std::array<double, kNumJoints> tau_max{60.0, 60.0, 60.0, 40.0, 60.0, 60.0, 40.0};
  std::array<double, kNumJoints> kp{120.0, 120.0, 120.0, 80.0, 120.0, 120.0, 80.0};
  std::array<double, kNumJoints> kd{12.0, 12.0, 12.0, 8.0, 12.0, 12.0, 8.0};

  double wrist_contact_radius = 0.02;

  double arm_reach() const { return upper_len + fore_len + hand_len; }
  double joint_mid(int j) const { return 0.5 * (q_lo[j] + q_hi[j]); }
  JointVec clamp_to_limits(const JointVec& q) const;
  // Affine map between joint angles and normalized [-1, 1] coordinates.
  JointVec normalize_q(const JointVec& q) const;
  JointVec denormalize_q(const JointVec& a) const;
  void validate() const;  // throws ConfigError
};

struct LinkPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  Vector2d position() const { return {x, y}; }
};

// Poses of the named chain points. shoulder_* share the torso-top position
// but carry the upper-arm heading; wrist_* are the end-effector points.
struct FkResult {
  LinkPose root;   // torso base (copy of the root pose)
  LinkPose torso;  // torso top, heading along the torso axis
  LinkPose shoulder_l, shoulder_r;
  LinkPose elbow_l, elbow_r;
  LinkPose wrist_l, wrist_r;

  // Fixed enumeration used by metrics and the interaction graph.
  static constexpr int kNumLinks = 6;
  std::array<Vector2d, kNumLinks> link_positions() const;
  static const std::array<const char*, kNumLinks>& link_names();
  static constexpr int kNumHeadings = 7;
  std::array<double, kNumHeadings> link_headings() const;
};

FkResult forward_kinematics(const RobotModel& model, const JointVec& q,
                            const Pose2& root);

// Wrist point of one arm in the pelvis frame, with its 2x3 Jacobian in the
// arm joints. The pelvis frame is the root pose, so the shoulder position
// depends on the torso pitch.
struct ArmFk {
  Vector2d wrist;
  Eigen::Matrix<double, 2, 3> jacobian;
};
ArmFk arm_fk_pelvis(const RobotModel& model, double torso_pitch, Arm arm,
                    const Vector3d& q_arm);
Vector2d shoulder_in_pelvis(const RobotModel& model, double torso_pitch);

// Applies T_(p<-t) ∘ T_(t<-w) to a world-frame pose.
Pose2 to_pelvis_frame(const Pose2& p_world, const FrameTransform& t_from_w,
                      const FrameTransform& p_from_t);

// Unit gravity direction expressed in the frame of the given pose; callers
// pass a pose whose theta already includes any pitch of interest. Zero
// heading maps to (0, -1).
Vector2d gravity_projection(const Pose2& frame);

struct IkResult {
  Vector3d q = Vector3d::Zero();
  double residual = 0.0;  // remaining wrist position error (m)
  bool reachable = true;
  int iterations = 0;
};

// Damped Gauss-Newton IK for one arm's wrist position in the pelvis frame,
// warm-started from q_init and projected onto joint limits each iterate.
// Targets beyond the arm's reach return the straight-arm best effort flagged
// unreachable, with residual equal to the reach deficit when the limits
// admit a straight arm.
IkResult solve_arm_ik(const RobotModel& model, Arm arm,
                      const Vector2d& target_pelvis, const Vector3d& q_init,
                      double torso_pitch = 0.0);

// Arm joint indices within the 7-vector.
std::array<int, 3> arm_joint_indices(Arm arm);

}  // namespace hoi::kin

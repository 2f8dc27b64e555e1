#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hoi/kinematics.hpp"

namespace hoi::motion {

using Eigen::Vector2d;
using Eigen::Vector3d;
using kin::JointVec;
using kin::Pose2;

// ---------------------------------------------------------------- box geometry

struct BoxShape {
  double w = 0.12;
  double h = 0.12;
};

enum class BoxSide { kLeft, kRight };

// Corners in box frame order BL, BR, TR, TL, mapped to world.
std::array<Vector2d, 4> box_corners(const BoxShape& shape, const Pose2& pose);
// Signed distance from a point to the box boundary: negative inside.
double box_signed_distance(const BoxShape& shape, const Pose2& pose,
                           const Vector2d& point);
// Midpoint of the left (-x) or right (+x) face in world coordinates.
Vector2d box_face_midpoint(const BoxShape& shape, const Pose2& pose,
                           BoxSide side);

// ---------------------------------------------------------------- data model

struct MotionFrame {
  JointVec q = JointVec::Zero();
  Pose2 root;
  Pose2 object;
  Vector3d object_vel = Vector3d::Zero();  // vx, vy, angular rate
  std::array<bool, 2> contact{false, false};  // L, R wrist
  double phase = 0.0;
};

struct MotionMeta {
  std::string task;
  std::uint64_t seed = 0;
  std::string source;
};

// Timestamped reference frames of joints, root, object, and contact flags.
struct HoiMotion {
  double dt = 0.02;
  std::array<std::string, kin::kNumJoints> joint_names;
  BoxShape box;
  std::vector<MotionFrame> frames;
  MotionMeta meta;

  int frame_count() const { return static_cast<int>(frames.size()); }
  double duration() const { return dt * (frame_count() - 1); }
  // Reference joint velocity at a frame by forward difference (last frame
  // copies its predecessor).
  JointVec ref_joint_velocity(int frame) const;
  // Structural invariants: dt > 0, >= 2 frames, phase nondecreasing 0 -> 1.
  void validate() const;

  // Contact span [first, last] over both wrists, if any contact exists.
  std::optional<std::pair<int, int>> contact_span() const;
};

// Anchor motion plus offset variants produced by augmentation.
struct MotionSet {
  HoiMotion anchor;
  struct Variant {
    Vector2d offset;
    int ix = 0, iy = 0;  // grid indices
    HoiMotion motion;
  };
  std::vector<Variant> variants;

  int count() const { return static_cast<int>(variants.size()); }
  // All variants must share dt, frame count, phase and contact sequences
  // with the anchor.
  void validate() const;
  static MotionSet single(const HoiMotion& anchor);
};

struct Violation {
  int frame = 0;
  enum class Kind { kPenetration, kJointLimit, kVelocityLimit, kContactInconsistency };
  Kind kind = Kind::kPenetration;
  double magnitude = 0.0;
  std::string describe() const;
};

struct VerificationReport {
  std::vector<Violation> violations;
  bool pass() const { return violations.empty(); }
};

struct VerifyTolerances {
  double penetration = 0.005;  // m
  double contact = 0.03;       // m
  // velocity limits come from the robot model
};

// ---------------------------------------------------------------- operations

enum class Task { kBoxPick, kBoxPush };
std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct GenParams {
  double dt = 0.02;
  double hold_s = 0.3;
  double approach_s = 1.4;  // traverse + descend legs
  double close_s = 0.16;    // final straight-line close onto the face
  double manipulate_s = 1.6;
  double release_s = 1.4;   // push only: open + ascend + traverse back
  double open_s = 0.16;

  double table_height = 0.75;
  BoxShape box;
  Vector2d box_start{0.42, 0.81};
  Vector2d box_goal_pick{0.42, 0.93};
  Vector2d box_goal_push{0.30, 0.81};
  Pose2 root{0.0, 0.75, 0.0};
  Vector2d rest_wrist{0.25, 0.95};
  double rest_split = 0.03;   // +-x offset separating the two wrists at rest
  double standoff = 0.07;     // approach standoff from the grasped face
  // The retreat pulls out past the grasp detach radius before ascending.
  double retreat_standoff = 0.10;
  double transit_y = 0.96;    // safe height for traverses over the box

  Vector2d goal(Task task) const {
    return task == Task::kBoxPick ? box_goal_pick : box_goal_push;
  }
};

// Synthetic reference generator (mocap substitute): minimum-jerk wrist and
// object trajectories through approach -> contact -> manipulate ->
// release/hold, with joints solved by warm-started IK. Throws
// GenerationError naming the frame if any wrist target is unreachable.
HoiMotion generate_reference(Task task, const GenParams& params,
                             const kin::RobotModel& model, std::uint64_t seed);

// Kinematic checks: wrist-box penetration, joint limits, finite-difference
// joint velocities, and contact-flag consistency with wrist-box distance.
VerificationReport verify_motion(const HoiMotion& motion,
                                 const kin::RobotModel& model,
                                 const VerifyTolerances& tol = {});

enum class ShiftSpan { kContactCoupled, kAll };

struct AugmentParams {
  double epsilon = 0.05;
  int c3 = 9;  // must be a perfect square
  ShiftSpan shift_span = ShiftSpan::kContactCoupled;
  double blend_s = 0.25;  // linear blend window around the contact span
};

// Contact-preserving augmentation: the object trajectory is shifted by each
// grid offset on every frame; wrist targets are shifted inside the
// contact-coupled span (with a linear blend) and re-solved by warm-started
// IK. Every variant is re-verified; any failure raises GenerationError
// listing the rejected offsets.
MotionSet augment_motion(const HoiMotion& anchor, const kin::RobotModel& model,
                         const AugmentParams& params);

// linspace(-eps, eps, n); n == 1 degenerates to {0}.
std::vector<double> offset_axis(double epsilon, int n);

// ---------------------------------------------------------------- files

// Single-motion JSON document (schema in docs/motion_format.md).
void save_motion(const HoiMotion& motion, const std::string& path);
HoiMotion load_motion(const std::string& path);

// MotionSet directory: anchor.json + var_<ix>_<iy>.json + grid.json.
void save_motion_set(const MotionSet& set, const std::string& dir,
                     const AugmentParams& params);
MotionSet load_motion_set(const std::string& dir);
// Loads either a single motion file (wrapped as a one-variant set) or a
// motion-set directory.
MotionSet load_motion_or_set(const std::string& path);

}  // namespace hoi::motion

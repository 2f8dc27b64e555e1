#include "hoi/kinematics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace hoi::kin {

const std::array<const char*, kNumJoints> kJointNames = {
    "torso_pitch", "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder",  "r_elbow",    "r_wrist"};

Vector2d FrameTransform::apply(const Vector2d& p) const {
  double c = std::cos(rot), s = std::sin(rot);
  return {c * p.x() - s * p.y() + tx, s * p.x() + c * p.y() + ty};
}

Pose2 FrameTransform::apply(const Pose2& p) const {
  Vector2d q = apply(Vector2d{p.x, p.y});
  return Pose2{q.x(), q.y(), wrap_angle(p.theta + rot)};
}

FrameTransform FrameTransform::compose(const FrameTransform& inner) const {
  // (this ∘ inner)(p) = this(inner(p))
  double c = std::cos(rot), s = std::sin(rot);
  FrameTransform out;
  out.rot = rot + inner.rot;
  out.tx = c * inner.tx - s * inner.ty + tx;
  out.ty = s * inner.tx + c * inner.ty + ty;
  return out;
}

FrameTransform FrameTransform::inverse() const {
  double c = std::cos(rot), s = std::sin(rot);
  FrameTransform out;
  out.rot = -rot;
  out.tx = -(c * tx + s * ty);
  out.ty = -(-s * tx + c * ty);
  return out;
}

FrameTransform FrameTransform::frame_to_world(const Pose2& f) {
  return FrameTransform{f.theta, f.x, f.y};
}

FrameTransform FrameTransform::world_to_frame(const Pose2& f) {
  return frame_to_world(f).inverse();
}

JointVec RobotModel::clamp_to_limits(const JointVec& q) const {
  JointVec out;
  for (int j = 0; j < kNumJoints; ++j)
    out[j] = std::clamp(q[j], q_lo[j], q_hi[j]);
  return out;
}

JointVec RobotModel::normalize_q(const JointVec& q) const {
  JointVec out;
  for (int j = 0; j < kNumJoints; ++j) {
    double half = 0.5 * (q_hi[j] - q_lo[j]);
    out[j] = (q[j] - joint_mid(j)) / half;
  }
  return out;
}

JointVec RobotModel::denormalize_q(const JointVec& a) const {
  JointVec out;
  for (int j = 0; j < kNumJoints; ++j) {
    double half = 0.5 * (q_hi[j] - q_lo[j]);
    out[j] = joint_mid(j) + std::clamp(a[j], -1.0, 1.0) * half;
  }
  return out;
}

void RobotModel::validate() const {
  if (torso_len <= 0 || upper_len <= 0 || fore_len <= 0 || hand_len < 0)
    throw ConfigError("RobotModel: link lengths must be positive");
  for (int j = 0; j < kNumJoints; ++j) {
    if (!(q_lo[j] < q_hi[j]))
      throw ConfigError("RobotModel: joint " + std::string(kJointNames[j]) +
                        " limits must satisfy lower < upper");
    if (qd_max[j] <= 0 || tau_max[j] <= 0 || kp[j] <= 0 || kd[j] <= 0)
      throw ConfigError("RobotModel: joint " + std::string(kJointNames[j]) +
                        " velocity/torque limits and PD gains must be > 0");
  }
  if (wrist_contact_radius <= 0)
    throw ConfigError("RobotModel: wrist contact radius must be > 0");
}

std::array<int, 3> arm_joint_indices(Arm arm) {
  if (arm == Arm::kLeft) return {kLShoulder, kLElbow, kLWrist};
  return {kRShoulder, kRElbow, kRWrist};
}

static Vector2d unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

FkResult forward_kinematics(const RobotModel& model, const JointVec& q,
                            const Pose2& root) {
  FkResult fk;
  fk.root = {root.x, root.y, wrap_angle(root.theta)};
  const double torso_heading = root.theta + 0.5 * kPi + q[kTorsoPitch];
  Vector2d torso_top = root.position() + model.torso_len * unit(torso_heading);
  fk.torso = {torso_top.x(), torso_top.y(), wrap_angle(torso_heading)};

  auto solve_arm = [&](Arm arm, LinkPose& shoulder, LinkPose& elbow,
                       LinkPose& wrist) {
    auto idx = arm_joint_indices(arm);
    double upper = root.theta + q[kTorsoPitch] + q[idx[0]];
    double fore = upper + q[idx[1]];
    double hand = fore + q[idx[2]];
    Vector2d e = torso_top + model.upper_len * unit(upper);
    Vector2d w = e + model.fore_len * unit(fore);
    Vector2d ee = w + model.hand_len * unit(hand);
    shoulder = {torso_top.x(), torso_top.y(), wrap_angle(upper)};
    elbow = {e.x(), e.y(), wrap_angle(fore)};
    wrist = {ee.x(), ee.y(), wrap_angle(hand)};
  };
  solve_arm(Arm::kLeft, fk.shoulder_l, fk.elbow_l, fk.wrist_l);
  solve_arm(Arm::kRight, fk.shoulder_r, fk.elbow_r, fk.wrist_r);
  return fk;
}

std::array<Vector2d, FkResult::kNumLinks> FkResult::link_positions() const {
  return {root.position(),    torso.position(),   elbow_l.position(),
          wrist_l.position(), elbow_r.position(), wrist_r.position()};
}

const std::array<const char*, FkResult::kNumLinks>& FkResult::link_names() {
  static const std::array<const char*, kNumLinks> names = {
      "root", "torso_top", "l_elbow", "l_wrist", "r_elbow", "r_wrist"};
  return names;
}

std::array<double, FkResult::kNumHeadings> FkResult::link_headings() const {
  return {torso.heading,   shoulder_l.heading, elbow_l.heading,
          wrist_l.heading, shoulder_r.heading, elbow_r.heading,
          wrist_r.heading};
}

Vector2d shoulder_in_pelvis(const RobotModel& model, double torso_pitch) {
  return model.torso_len * unit(0.5 * kPi + torso_pitch);
}

ArmFk arm_fk_pelvis(const RobotModel& model, double torso_pitch, Arm /*arm*/,
                    const Vector3d& q_arm) {
  ArmFk out;
  const Vector2d sh = shoulder_in_pelvis(model, torso_pitch);
  const double a1 = torso_pitch + q_arm[0];
  const double a2 = a1 + q_arm[1];
  const double a3 = a2 + q_arm[2];
  const Vector2d u1 = unit(a1), u2 = unit(a2), u3 = unit(a3);
  out.wrist = sh + model.upper_len * u1 + model.fore_len * u2 +
              model.hand_len * u3;
  auto d = [](const Vector2d& v) { return Vector2d{-v.y(), v.x()}; };
  Vector2d d1 = model.upper_len * d(u1) + model.fore_len * d(u2) +
                model.hand_len * d(u3);
  Vector2d d2 = model.fore_len * d(u2) + model.hand_len * d(u3);
  Vector2d d3 = model.hand_len * d(u3);
  out.jacobian.col(0) = d1;
  out.jacobian.col(1) = d2;
  out.jacobian.col(2) = d3;
  return out;
}

Pose2 to_pelvis_frame(const Pose2& p_world, const FrameTransform& t_from_w,
                      const FrameTransform& p_from_t) {
  return p_from_t.compose(t_from_w).apply(p_world);
}

Vector2d gravity_projection(const Pose2& frame) {
  // World gravity (0,-1) rotated into the frame.
  double c = std::cos(frame.theta), s = std::sin(frame.theta);
  return {-s, -c};
}

namespace {

struct IkLimits {
  Vector3d lo, hi;
  Vector3d project(Vector3d q) const {
    for (int i = 0; i < 3; ++i) q[i] = std::clamp(q[i], lo[i], hi[i]);
    return q;
  }
};

// Damped Gauss-Newton refinement with limit projection.
struct Refined {
  Vector3d q;
  double residual;
  int iterations;
};

Refined gn_refine(const RobotModel& model, Arm arm, double pitch,
                  const Vector2d& target, Vector3d q, const IkLimits& lim,
                  int max_iters) {
  constexpr double kPosTol = 1e-8;
  constexpr double kDamping = 1e-3;
  q = lim.project(q);
  int it = 0;
  double err = (arm_fk_pelvis(model, pitch, arm, q).wrist - target).norm();
  for (; it < max_iters; ++it) {
    ArmFk fk = arm_fk_pelvis(model, pitch, arm, q);
    Vector2d r = fk.wrist - target;
    err = r.norm();
    if (err < kPosTol) break;
    Eigen::Matrix3d jtj = fk.jacobian.transpose() * fk.jacobian;
    jtj.diagonal().array() += kDamping;
    Vector3d step = jtj.ldlt().solve(-fk.jacobian.transpose() * r);
    if (!step.allFinite()) break;
    Vector3d q_next = lim.project(q + step);
    double moved = (q_next - q).norm();
    q = q_next;
    if (moved < 1e-13) break;
  }
  err = (arm_fk_pelvis(model, pitch, arm, q).wrist - target).norm();
  return {q, err, it};
}

}  // namespace

IkResult solve_arm_ik(const RobotModel& model, Arm arm,
                      const Vector2d& target_pelvis, const Vector3d& q_init,
                      double torso_pitch) {
  constexpr int kMaxIters = 200;
  constexpr double kPosTol = 1e-8;

  const auto idx = arm_joint_indices(arm);
  const IkLimits lim{
      Vector3d{model.q_lo[idx[0]], model.q_lo[idx[1]], model.q_lo[idx[2]]},
      Vector3d{model.q_hi[idx[0]], model.q_hi[idx[1]], model.q_hi[idx[2]]}};

  IkResult result;
  const Vector3d q0 = lim.project(q_init);
  const Vector2d sh = shoulder_in_pelvis(model, torso_pitch);
  const Vector2d to_target = target_pelvis - sh;
  const double dist = to_target.norm();

  if (dist > model.arm_reach()) {
    // Best effort: point the straight arm at the target. With limits that
    // admit the straight configuration the residual equals the reach deficit.
    result.reachable = false;
    double dir = std::atan2(to_target.y(), to_target.x());
    Vector3d q = lim.project(Vector3d{dir - torso_pitch, 0.0, 0.0});
    Refined r = gn_refine(model, arm, torso_pitch, target_pelvis, q, lim,
                          kMaxIters);
    result.q = r.residual <= (arm_fk_pelvis(model, torso_pitch, arm, q).wrist -
                              target_pelvis).norm()
                   ? r.q
                   : q;
    result.residual = (arm_fk_pelvis(model, torso_pitch, arm, result.q).wrist -
                       target_pelvis).norm();
    result.iterations = r.iterations;
    return result;
  }

  // Elbow-branch tie-break: seed Gauss-Newton from the closed-form two-link
  // branch nearest q_init. The hand segment is folded into an effective
  // elbow-to-end link with the wrist joint frozen at its initial value.
  const double q3 = q0[2];
  const double u = model.upper_len;
  const double f = model.fore_len, h = model.hand_len;
  const double l3 = std::sqrt(f * f + h * h + 2.0 * f * h * std::cos(q3));
  const double gamma = std::atan2(h * std::sin(q3), f + h * std::cos(q3));

  std::vector<Vector3d> seeds;
  const double cos_el =
      (dist * dist - u * u - l3 * l3) / std::max(2.0 * u * l3, 1e-12);
  if (cos_el >= -1.0 && cos_el <= 1.0) {
    const double el = std::acos(cos_el);
    const double base = std::atan2(to_target.y(), to_target.x());
    auto branch = [&](double eff_elbow) {
      double q1_abs = base - std::atan2(l3 * std::sin(eff_elbow),
                                        u + l3 * std::cos(eff_elbow));
      double q1 = wrap_angle(q1_abs - torso_pitch);
      double q2 = wrap_angle(eff_elbow - gamma);
      return Vector3d{q1, q2, q3};
    };
    Vector3d a = branch(el), b = branch(-el);
    auto dist_to_init = [&](const Vector3d& v) {
      return (v - q0).squaredNorm();
    };
    if (dist_to_init(a) <= dist_to_init(b)) {
      seeds.push_back(a);
      seeds.push_back(b);
    } else {
      seeds.push_back(b);
      seeds.push_back(a);
    }
  }
  seeds.push_back(q0);

  Refined best{q0, (arm_fk_pelvis(model, torso_pitch, arm, q0).wrist -
                    target_pelvis).norm(),
               0};
  bool have = false;
  for (const Vector3d& seed : seeds) {
    Refined r = gn_refine(model, arm, torso_pitch, target_pelvis, seed, lim,
                          kMaxIters);
    if (!have || r.residual < best.residual) {
      best = r;
      have = true;
    }
    if (best.residual < kPosTol) break;  // seeds are ordered by preference
  }
  result.q = best.q;
  result.residual = best.residual;
  result.iterations = best.iterations;
  return result;
}

}  // namespace hoi::kin

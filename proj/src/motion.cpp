#include "hoi/motion.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace hoi::motion {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- box geometry

std::array<Vector2d, 4> box_corners(const BoxShape& shape, const Pose2& pose) {
  const double hw = 0.5 * shape.w, hh = 0.5 * shape.h;
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  auto map = [&](double bx, double by) {
    return Vector2d{pose.x + c * bx - s * by, pose.y + s * bx + c * by};
  };
  return {map(-hw, -hh), map(hw, -hh), map(hw, hh), map(-hw, hh)};
}

double box_signed_distance(const BoxShape& shape, const Pose2& pose,
                           const Vector2d& point) {
  // Work in the box frame.
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  const double dx = point.x() - pose.x, dy = point.y() - pose.y;
  const double bx = c * dx + s * dy;
  const double by = -s * dx + c * dy;
  const double qx = std::abs(bx) - 0.5 * shape.w;
  const double qy = std::abs(by) - 0.5 * shape.h;
  const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
  const double outside = std::sqrt(ox * ox + oy * oy);
  const double inside = std::min(std::max(qx, qy), 0.0);
  return outside + inside;
}

Vector2d box_face_midpoint(const BoxShape& shape, const Pose2& pose,
                           BoxSide side) {
  const double hw = 0.5 * shape.w;
  const double sign = side == BoxSide::kLeft ? -1.0 : 1.0;
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  return {pose.x + c * sign * hw, pose.y + s * sign * hw};
}

// ---------------------------------------------------------------- data model

JointVec HoiMotion::ref_joint_velocity(int frame) const {
  const int n = frame_count();
  if (n < 2) return JointVec::Zero();
  int a = frame, b = frame + 1;
  if (b >= n) {
    a = n - 2;
    b = n - 1;
  }
  return (frames[static_cast<std::size_t>(b)].q -
          frames[static_cast<std::size_t>(a)].q) /
         dt;
}

void HoiMotion::validate() const {
  if (!(dt > 0.0)) throw ParseError("motion: dt must be > 0");
  if (frame_count() < 2) throw ParseError("motion: needs at least 2 frames");
  if (std::abs(frames.front().phase) > 1e-12)
    throw ParseError("motion: phase must start at 0");
  if (std::abs(frames.back().phase - 1.0) > 1e-12)
    throw ParseError("motion: phase must end at 1");
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (frames[i].phase < frames[i - 1].phase)
      throw ParseError("motion: phase decreases at frame " + std::to_string(i));
}

std::optional<std::pair<int, int>> HoiMotion::contact_span() const {
  int first = -1, last = -1;
  for (int i = 0; i < frame_count(); ++i) {
    const auto& fr = frames[static_cast<std::size_t>(i)];
    if (fr.contact[0] || fr.contact[1]) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) return std::nullopt;
  return std::make_pair(first, last);
}

void MotionSet::validate() const {
  if (variants.empty()) throw ContractError("MotionSet: no variants");
  for (const auto& v : variants) {
    if (v.motion.dt != anchor.dt)
      throw ContractError("MotionSet: variant dt differs from anchor");
    if (v.motion.frame_count() != anchor.frame_count())
      throw ContractError("MotionSet: variant frame count differs from anchor");
    for (int i = 0; i < anchor.frame_count(); ++i) {
      const auto& a = anchor.frames[static_cast<std::size_t>(i)];
      const auto& b = v.motion.frames[static_cast<std::size_t>(i)];
      if (a.contact != b.contact)
        throw ContractError("MotionSet: contact sequence differs at frame " +
                            std::to_string(i));
      if (a.phase != b.phase)
        throw ContractError("MotionSet: phase sequence differs at frame " +
                            std::to_string(i));
    }
  }
}

MotionSet MotionSet::single(const HoiMotion& anchor) {
  MotionSet set;
  set.anchor = anchor;
  set.variants.push_back({Vector2d::Zero(), 0, 0, anchor});
  return set;
}

std::string Violation::describe() const {
  const char* k = "?";
  switch (kind) {
    case Kind::kPenetration: k = "penetration"; break;
    case Kind::kJointLimit: k = "joint_limit"; break;
    case Kind::kVelocityLimit: k = "velocity_limit"; break;
    case Kind::kContactInconsistency: k = "contact_inconsistency"; break;
  }
  return std::string(k) + " at frame " + std::to_string(frame) +
         " (magnitude " + fmt_double(magnitude) + ")";
}

std::string to_string(Task t) {
  return t == Task::kBoxPick ? "box_pick" : "box_push";
}

Task task_from_string(const std::string& s) {
  if (s == "box_pick") return Task::kBoxPick;
  if (s == "box_push") return Task::kBoxPush;
  throw ConfigError("unknown task: " + s);
}

// ---------------------------------------------------------------- generation

namespace {

int frames_of(double seconds, double dt) {
  int n = static_cast<int>(std::lround(seconds / dt));
  return std::max(n, 1);
}

Vector2d lerp_min_jerk(const Vector2d& a, const Vector2d& b, double tau) {
  return a + (b - a) * min_jerk(tau);
}

struct ArmGeometry {
  Vector2d rest;
  double normal_sign;  // -1 for the left face, +1 for the right face
  BoxSide side;
};

// Waypoints for one arm relative to a given box pose.
struct ArmWaypoints {
  Vector2d transit;   // above the standoff point, at transit height
  Vector2d standoff;  // face midpoint pushed out along the face normal
  Vector2d face;      // grasp point
};

ArmWaypoints waypoints_for(const ArmGeometry& g, const GenParams& p,
                           const BoxShape& box, const Vector2d& center,
                           double standoff) {
  ArmWaypoints w;
  Pose2 pose{center.x(), center.y(), 0.0};
  w.face = box_face_midpoint(box, pose, g.side);
  w.standoff = w.face + Vector2d{g.normal_sign * standoff, 0.0};
  w.transit = Vector2d{w.standoff.x(), p.transit_y};
  return w;
}

}  // namespace

HoiMotion generate_reference(Task task, const GenParams& params,
                             const kin::RobotModel& model, std::uint64_t seed) {
  model.validate();
  if (params.dt <= 0) throw ConfigError("gen: dt must be > 0");
  if (params.approach_s <= 0 || params.manipulate_s <= 0 ||
      params.close_s <= 0 || params.hold_s <= 0)
    throw ConfigError("gen: durations must be > 0");

  const double dt = params.dt;
  const int hold = frames_of(params.hold_s, dt);
  const int traverse = frames_of(0.55 * params.approach_s, dt);
  const int descend = frames_of(0.45 * params.approach_s, dt);
  const int close = frames_of(params.close_s, dt);
  const int manip = frames_of(params.manipulate_s, dt);
  const int open = frames_of(params.open_s, dt);
  const int ascend = frames_of(0.45 * params.release_s, dt);
  const int traverse_back = frames_of(0.55 * params.release_s, dt);

  const int s0 = hold;
  const int s1 = s0 + traverse;
  const int s2 = s1 + descend;
  const int s3 = s2 + close;  // first contact frame
  const int s4 = s3 + manip;  // box reaches goal
  int last;
  int s5 = 0, s6 = 0, s7 = 0;
  if (task == Task::kBoxPush) {
    s5 = s4 + open;
    s6 = s5 + ascend;
    s7 = s6 + traverse_back;
    last = s7 + hold;
  } else {
    last = s4 + frames_of(params.release_s, dt) + hold;  // hold at goal
  }
  const int n_frames = last + 1;

  const Vector2d start = params.box_start;
  const Vector2d goal = params.goal(task);

  const ArmGeometry arm_l{params.rest_wrist + Vector2d{-params.rest_split, 0.0},
                          -1.0, BoxSide::kLeft};
  const ArmGeometry arm_r{params.rest_wrist + Vector2d{params.rest_split, 0.0},
                          1.0, BoxSide::kRight};

  auto box_center_at = [&](int i) -> Vector2d {
    if (i <= s3) return start;
    if (i >= s4) return goal;
    double tau = static_cast<double>(i - s3) / (s4 - s3);
    return lerp_min_jerk(start, goal, tau);
  };
  auto box_vel_at = [&](int i) -> Vector2d {
    if (i <= s3 || i >= s4) return Vector2d::Zero();
    double span = (s4 - s3) * dt;
    double tau = static_cast<double>(i - s3) / (s4 - s3);
    return (goal - start) * (min_jerk_vel(tau) / span);
  };

  auto wrist_target = [&](const ArmGeometry& g, int i) -> Vector2d {
    const ArmWaypoints at_start =
        waypoints_for(g, params, params.box, start, params.standoff);
    if (i <= s0) return g.rest;
    if (i <= s1)
      return lerp_min_jerk(g.rest, at_start.transit,
                           static_cast<double>(i - s0) / (s1 - s0));
    if (i <= s2)
      return lerp_min_jerk(at_start.transit, at_start.standoff,
                           static_cast<double>(i - s1) / (s2 - s1));
    if (i <= s3)
      return lerp_min_jerk(at_start.standoff, at_start.face,
                           static_cast<double>(i - s2) / (s3 - s2));
    // During manipulation the wrists ride the face midpoints.
    Pose2 pose{box_center_at(i).x(), box_center_at(i).y(), 0.0};
    Vector2d face = box_face_midpoint(params.box, pose, g.side);
    if (task == Task::kBoxPick || i <= s4) return face;
    const ArmWaypoints at_goal =
        waypoints_for(g, params, params.box, goal, params.retreat_standoff);
    if (i <= s5)
      return lerp_min_jerk(at_goal.face, at_goal.standoff,
                           static_cast<double>(i - s4) / (s5 - s4));
    if (i <= s6)
      return lerp_min_jerk(at_goal.standoff, at_goal.transit,
                           static_cast<double>(i - s5) / (s6 - s5));
    if (i <= s7)
      return lerp_min_jerk(at_goal.transit, g.rest,
                           static_cast<double>(i - s6) / (s7 - s6));
    return g.rest;
  };

  auto contact_at = [&](int i) {
    if (task == Task::kBoxPick) return i >= s3;
    return i >= s3 && i <= s4;
  };

  HoiMotion m;
  m.dt = dt;
  m.box = params.box;
  for (int j = 0; j < kin::kNumJoints; ++j)
    m.joint_names[static_cast<std::size_t>(j)] = kin::kJointNames[static_cast<std::size_t>(j)];
  m.meta.task = to_string(task);
  m.meta.seed = seed;
  m.meta.source = "generated";
  m.frames.resize(static_cast<std::size_t>(n_frames));

  const kin::FrameTransform t_from_w = kin::FrameTransform::world_to_frame(
      Pose2{params.root.x, params.root.y, params.root.theta});

  Vector3d q_arm_l{0.6, -2.2, 0.0};
  Vector3d q_arm_r = q_arm_l;
  for (int i = 0; i < n_frames; ++i) {
    MotionFrame& fr = m.frames[static_cast<std::size_t>(i)];
    fr.root = params.root;
    Vector2d c = box_center_at(i);
    fr.object = Pose2{c.x(), c.y(), 0.0};
    Vector2d v = box_vel_at(i);
    fr.object_vel = Vector3d{v.x(), v.y(), 0.0};
    fr.contact = {contact_at(i), contact_at(i)};
    fr.phase = static_cast<double>(i) / (n_frames - 1);

    const double torso_pitch = 0.0;
    // Torso frame: origin at the torso top, heading = root yaw + pitch;
    // targets go through the two-stage world -> torso -> pelvis chain.
    kin::FkResult fk0 =
        kin::forward_kinematics(model, JointVec::Zero(), params.root);
    Pose2 torso_pose{fk0.torso.x, fk0.torso.y, params.root.theta + torso_pitch};
    kin::FrameTransform tw = kin::FrameTransform::world_to_frame(torso_pose);
    kin::FrameTransform pt =
        t_from_w.compose(kin::FrameTransform::frame_to_world(torso_pose));

    auto solve = [&](const ArmGeometry& g, kin::Arm arm, Vector3d& warm) {
      Vector2d target_w = wrist_target(g, i);
      Pose2 target_p = kin::to_pelvis_frame(
          Pose2{target_w.x(), target_w.y(), 0.0}, tw, pt);
      kin::IkResult ik = kin::solve_arm_ik(
          model, arm, Vector2d{target_p.x, target_p.y}, warm, torso_pitch);
      if (!ik.reachable || ik.residual > 1e-6)
        throw GenerationError(
            "gen: wrist target unreachable at frame " + std::to_string(i) +
            " (arm " + (arm == kin::Arm::kLeft ? "L" : "R") + ", residual " +
            fmt_double(ik.residual) + ")");
      warm = ik.q;
      return ik.q;
    };
    Vector3d ql = solve(arm_l, kin::Arm::kLeft, q_arm_l);
    Vector3d qr = solve(arm_r, kin::Arm::kRight, q_arm_r);
    fr.q[kin::kTorsoPitch] = torso_pitch;
    fr.q[kin::kLShoulder] = ql[0];
    fr.q[kin::kLElbow] = ql[1];
    fr.q[kin::kLWrist] = ql[2];
    fr.q[kin::kRShoulder] = qr[0];
    fr.q[kin::kRElbow] = qr[1];
    fr.q[kin::kRWrist] = qr[2];
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------- verification

VerificationReport verify_motion(const HoiMotion& motion,
                                 const kin::RobotModel& model,
                                 const VerifyTolerances& tol) {
  motion.validate();
  VerificationReport report;
  for (int i = 0; i < motion.frame_count(); ++i) {
    const MotionFrame& fr = motion.frames[static_cast<std::size_t>(i)];
    kin::FkResult fk = kin::forward_kinematics(model, fr.q, fr.root);
    const Vector2d wrists[2] = {fk.wrist_l.position(), fk.wrist_r.position()};

    for (int w = 0; w < 2; ++w) {
      double sd = box_signed_distance(motion.box, fr.object, wrists[w]);
      if (-sd > tol.penetration)
        report.violations.push_back(
            {i, Violation::Kind::kPenetration, -sd});
      if (fr.contact[static_cast<std::size_t>(w)] && sd > tol.contact)
        report.violations.push_back(
            {i, Violation::Kind::kContactInconsistency, sd - tol.contact});
    }
    for (int j = 0; j < kin::kNumJoints; ++j) {
      double over = std::max(model.q_lo[j] - fr.q[j], fr.q[j] - model.q_hi[j]);
      if (over > 1e-12)
        report.violations.push_back({i, Violation::Kind::kJointLimit, over});
    }
    if (i > 0) {
      const MotionFrame& prev = motion.frames[static_cast<std::size_t>(i) - 1];
      for (int j = 0; j < kin::kNumJoints; ++j) {
        double speed = std::abs(fr.q[j] - prev.q[j]) / motion.dt;
        if (speed > model.qd_max[j])
          report.violations.push_back(
              {i, Violation::Kind::kVelocityLimit, speed - model.qd_max[j]});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------- augmentation

std::vector<double> offset_axis(double epsilon, int n) {
  if (n < 1) throw ConfigError("offset_axis: n must be >= 1");
  if (n == 1) return {0.0};
  std::vector<double> axis(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    axis[static_cast<std::size_t>(i)] =
        -epsilon + 2.0 * epsilon * static_cast<double>(i) / (n - 1);
  return axis;
}

MotionSet augment_motion(const HoiMotion& anchor, const kin::RobotModel& model,
                         const AugmentParams& params) {
  if (params.epsilon < 0) throw ConfigError("augment: epsilon must be >= 0");
  int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(params.c3))));
  if (n < 1 || n * n != params.c3)
    throw ConfigError("augment: c3 must be a perfect square, got " +
                      std::to_string(params.c3));
  {
    VerificationReport anchor_report = verify_motion(anchor, model);
    if (!anchor_report.pass())
      throw VerificationError("augment: anchor fails verification: " +
                              anchor_report.violations.front().describe());
  }

  const int F = anchor.frame_count();
  // Per-frame blend weight of the wrist-target shift.
  std::vector<double> weight(static_cast<std::size_t>(F), 0.0);
  if (params.shift_span == ShiftSpan::kAll) {
    std::fill(weight.begin(), weight.end(), 1.0);
  } else if (auto span = anchor.contact_span()) {
    const int blend = std::max(1, static_cast<int>(std::lround(params.blend_s / anchor.dt)));
    for (int k = 0; k < F; ++k) {
      double w = 0.0;
      if (k >= span->first && k <= span->second) {
        w = 1.0;
      } else if (k < span->first && span->first - k <= blend) {
        w = 1.0 - static_cast<double>(span->first - k) / blend;
      } else if (k > span->second && k - span->second <= blend) {
        w = 1.0 - static_cast<double>(k - span->second) / blend;
      }
      weight[static_cast<std::size_t>(k)] = w;
    }
  }

  // Anchor wrist world positions (the motion's own end-effector trajectory).
  std::vector<Vector2d> wrist_l(static_cast<std::size_t>(F)),
      wrist_r(static_cast<std::size_t>(F));
  for (int k = 0; k < F; ++k) {
    kin::FkResult fk = kin::forward_kinematics(
        model, anchor.frames[static_cast<std::size_t>(k)].q,
        anchor.frames[static_cast<std::size_t>(k)].root);
    wrist_l[static_cast<std::size_t>(k)] = fk.wrist_l.position();
    wrist_r[static_cast<std::size_t>(k)] = fk.wrist_r.position();
  }

  const std::vector<double> axis = offset_axis(params.epsilon, n);
  MotionSet set;
  set.anchor = anchor;
  std::vector<std::string> rejected;

  for (int ix = 0; ix < n; ++ix) {
    for (int iy = 0; iy < n; ++iy) {
      const Vector2d offset{axis[static_cast<std::size_t>(ix)],
                            axis[static_cast<std::size_t>(iy)]};
      HoiMotion variant = anchor;
      variant.meta.source = "augmented";
      std::string fail;

      for (int k = 0; k < F; ++k) {
        MotionFrame& fr = variant.frames[static_cast<std::size_t>(k)];
        fr.object.x += offset.x();
        fr.object.y += offset.y();
      }

      Vector3d warm_l{anchor.frames[0].q[kin::kLShoulder],
                      anchor.frames[0].q[kin::kLElbow],
                      anchor.frames[0].q[kin::kLWrist]};
      Vector3d warm_r{anchor.frames[0].q[kin::kRShoulder],
                      anchor.frames[0].q[kin::kRElbow],
                      anchor.frames[0].q[kin::kRWrist]};
      for (int k = 0; k < F && fail.empty(); ++k) {
        MotionFrame& fr = variant.frames[static_cast<std::size_t>(k)];
        const double w = weight[static_cast<std::size_t>(k)];
        const MotionFrame& af = anchor.frames[static_cast<std::size_t>(k)];
        if (w == 0.0) {
          warm_l = {af.q[kin::kLShoulder], af.q[kin::kLElbow], af.q[kin::kLWrist]};
          warm_r = {af.q[kin::kRShoulder], af.q[kin::kRElbow], af.q[kin::kRWrist]};
          continue;  // q already copied from anchor
        }
        const double pitch = af.q[kin::kTorsoPitch];
        kin::FkResult fk0 = kin::forward_kinematics(model, af.q, af.root);
        Pose2 torso_pose{fk0.torso.x, fk0.torso.y, af.root.theta + pitch};
        kin::FrameTransform tw = kin::FrameTransform::world_to_frame(torso_pose);
        kin::FrameTransform pt =
            kin::FrameTransform::world_to_frame(af.root).compose(
                kin::FrameTransform::frame_to_world(torso_pose));
        auto resolve = [&](kin::Arm arm, const Vector2d& anchor_wrist,
                           Vector3d& warm, int sh, int el, int wr) {
          Vector2d target_w = anchor_wrist + w * offset;
          Pose2 tp = kin::to_pelvis_frame(Pose2{target_w.x(), target_w.y(), 0.0},
                                          tw, pt);
          kin::IkResult ik = kin::solve_arm_ik(model, arm, Vector2d{tp.x, tp.y},
                                               warm, pitch);
          if (!ik.reachable || ik.residual > 1e-6) {
            fail = "frame " + std::to_string(k) + " residual " +
                   fmt_double(ik.residual);
            return;
          }
          warm = ik.q;
          fr.q[sh] = ik.q[0];
          fr.q[el] = ik.q[1];
          fr.q[wr] = ik.q[2];
        };
        resolve(kin::Arm::kLeft, wrist_l[static_cast<std::size_t>(k)], warm_l,
                kin::kLShoulder, kin::kLElbow, kin::kLWrist);
        if (fail.empty())
          resolve(kin::Arm::kRight, wrist_r[static_cast<std::size_t>(k)], warm_r,
                  kin::kRShoulder, kin::kRElbow, kin::kRWrist);
      }

      if (fail.empty()) {
        VerificationReport rep = verify_motion(variant, model);
        if (!rep.pass()) fail = rep.violations.front().describe();
      }
      if (!fail.empty()) {
        rejected.push_back("(" + fmt_double(offset.x()) + ", " +
                           fmt_double(offset.y()) + "): " + fail);
        continue;
      }
      set.variants.push_back({offset, ix, iy, std::move(variant)});
    }
  }

  if (!rejected.empty())
    throw GenerationError("augment: rejected offsets " +
                          join(rejected, "; "));
  set.validate();
  return set;
}

// ---------------------------------------------------------------- files

namespace {

json motion_to_json(const HoiMotion& m) {
  json j;
  j["version"] = 1;
  j["dt"] = m.dt;
  j["joint_names"] = m.joint_names;
  j["box"] = {{"w", m.box.w}, {"h", m.box.h}};
  j["meta"] = {{"task", m.meta.task},
               {"seed", m.meta.seed},
               {"source", m.meta.source}};
  json frames = json::array();
  for (const auto& fr : m.frames) {
    json f;
    f["q"] = std::vector<double>(fr.q.data(), fr.q.data() + kin::kNumJoints);
    f["root"] = {fr.root.x, fr.root.y, fr.root.theta};
    f["obj"] = {fr.object.x, fr.object.y, fr.object.theta};
    f["obj_vel"] = {fr.object_vel.x(), fr.object_vel.y(), fr.object_vel.z()};
    f["contact"] = {fr.contact[0], fr.contact[1]};
    f["phase"] = fr.phase;
    frames.push_back(std::move(f));
  }
  j["frames"] = std::move(frames);
  return j;
}

const json& require_field(const json& j, const char* field,
                          const std::string& context) {
  if (!j.contains(field))
    throw ParseError("motion file: missing field `" + std::string(field) +
                     "` in " + context);
  return j.at(field);
}

HoiMotion motion_from_json(const json& j, const std::string& path) {
  HoiMotion m;
  m.dt = require_field(j, "dt", path).get<double>();
  const json& names = require_field(j, "joint_names", path);
  if (!names.is_array() || names.size() != kin::kNumJoints)
    throw ParseError("motion file: joint_names must have " +
                     std::to_string(kin::kNumJoints) + " entries in " + path);
  for (std::size_t i = 0; i < kin::kNumJoints; ++i)
    m.joint_names[i] = names[i].get<std::string>();
  const json& box = require_field(j, "box", path);
  m.box.w = require_field(box, "w", path + ":box").get<double>();
  m.box.h = require_field(box, "h", path + ":box").get<double>();
  if (j.contains("meta")) {
    const json& meta = j.at("meta");
    m.meta.task = meta.value("task", "");
    m.meta.seed = meta.value("seed", std::uint64_t{0});
    m.meta.source = meta.value("source", "");
  }
  const json& frames = require_field(j, "frames", path);
  if (!frames.is_array())
    throw ParseError("motion file: frames must be an array in " + path);
  int idx = 0;
  for (const json& f : frames) {
    const std::string ctx = path + ":frame " + std::to_string(idx);
    MotionFrame fr;
    const json& q = require_field(f, "q", ctx);
    if (!q.is_array() || q.size() != kin::kNumJoints)
      throw ParseError("motion file: q must have 7 entries in " + ctx);
    for (int i = 0; i < kin::kNumJoints; ++i) fr.q[i] = q[static_cast<std::size_t>(i)].get<double>();
    const json& root = require_field(f, "root", ctx);
    fr.root = Pose2{root.at(0).get<double>(), root.at(1).get<double>(),
                    root.at(2).get<double>()};
    const json& obj = require_field(f, "obj", ctx);
    fr.object = Pose2{obj.at(0).get<double>(), obj.at(1).get<double>(),
                      obj.at(2).get<double>()};
    const json& ov = require_field(f, "obj_vel", ctx);
    fr.object_vel = Vector3d{ov.at(0).get<double>(), ov.at(1).get<double>(),
                             ov.at(2).get<double>()};
    const json& contact = require_field(f, "contact", ctx);
    fr.contact = {contact.at(0).get<bool>(), contact.at(1).get<bool>()};
    fr.phase = require_field(f, "phase", ctx).get<double>();
    m.frames.push_back(fr);
    ++idx;
  }
  m.validate();
  return m;
}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("JSON parse error in " + path + ": " + e.what());
  }
}

}  // namespace

void save_motion(const HoiMotion& motion, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HoiError("cannot write: " + path);
  out << motion_to_json(motion).dump(1) << "\n";
}

HoiMotion load_motion(const std::string& path) {
  return motion_from_json(parse_file(path), path);
}

void save_motion_set(const MotionSet& set, const std::string& dir,
                     const AugmentParams& params) {
  fs::create_directories(dir);
  save_motion(set.anchor, (fs::path(dir) / "anchor.json").string());
  json grid;
  grid["version"] = 1;
  grid["epsilon"] = params.epsilon;
  grid["c3"] = params.c3;
  grid["shift_span"] =
      params.shift_span == ShiftSpan::kAll ? "all" : "contact_coupled";
  grid["blend_s"] = params.blend_s;
  grid["anchor"] = "anchor.json";
  json offsets = json::array();
  json files = json::array();
  for (const auto& v : set.variants) {
    std::string name =
        "var_" + std::to_string(v.ix) + "_" + std::to_string(v.iy) + ".json";
    save_motion(v.motion, (fs::path(dir) / name).string());
    offsets.push_back({v.offset.x(), v.offset.y()});
    files.push_back(name);
  }
  grid["offsets"] = std::move(offsets);
  grid["files"] = std::move(files);
  std::ofstream out(fs::path(dir) / "grid.json", std::ios::binary);
  if (!out) throw HoiError("cannot write grid.json in " + dir);
  out << grid.dump(1) << "\n";
}

MotionSet load_motion_set(const std::string& dir) {
  const std::string grid_path = (fs::path(dir) / "grid.json").string();
  json grid = parse_file(grid_path);
  MotionSet set;
  set.anchor = load_motion(
      (fs::path(dir) / require_field(grid, "anchor", grid_path).get<std::string>())
          .string());
  const json& offsets = require_field(grid, "offsets", grid_path);
  const json& files = require_field(grid, "files", grid_path);
  if (offsets.size() != files.size())
    throw ParseError("grid.json: offsets/files length mismatch in " + dir);
  int n = static_cast<int>(std::lround(
      std::sqrt(static_cast<double>(files.size()))));
  for (std::size_t i = 0; i < files.size(); ++i) {
    MotionSet::Variant v;
    v.offset = Vector2d{offsets[i].at(0).get<double>(),
                        offsets[i].at(1).get<double>()};
    v.ix = n > 0 ? static_cast<int>(i) / n : 0;
    v.iy = n > 0 ? static_cast<int>(i) % n : 0;
    v.motion = load_motion((fs::path(dir) / files[i].get<std::string>()).string());
    set.variants.push_back(std::move(v));
  }
  set.validate();
  return set;
}

MotionSet load_motion_or_set(const std::string& path) {
  if (fs::is_directory(path)) return load_motion_set(path);
  return MotionSet::single(load_motion(path));
}

}  // namespace hoi::motion

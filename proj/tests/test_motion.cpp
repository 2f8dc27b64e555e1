#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hoi/motion.hpp"

using namespace hoi;
using namespace hoi::motion;
using Eigen::Vector2d;

namespace {

const HoiMotion& pick_motion() {
  static HoiMotion m =
      generate_reference(Task::kBoxPick, GenParams{}, kin::RobotModel{}, 1);
  return m;
}

const HoiMotion& push_motion() {
  static HoiMotion m =
      generate_reference(Task::kBoxPush, GenParams{}, kin::RobotModel{}, 1);
  return m;
}

int count_kind(const VerificationReport& r, Violation::Kind kind) {
  int n = 0;
  for (const auto& v : r.violations)
    if (v.kind == kind) ++n;
  return n;
}

}  // namespace

TEST_CASE("box geometry: corners, signed distance, face midpoints") {
  BoxShape box{0.2, 0.1};
  kin::Pose2 pose{1.0, 2.0, 0.0};
  auto corners = box_corners(box, pose);
  CHECK((corners[0] - Vector2d{0.9, 1.95}).norm() < 1e-15);
  CHECK((corners[2] - Vector2d{1.1, 2.05}).norm() < 1e-15);
  CHECK(box_signed_distance(box, pose, Vector2d{1.0, 2.0}) ==
        doctest::Approx(-0.05));
  CHECK(box_signed_distance(box, pose, Vector2d{1.2, 2.0}) ==
        doctest::Approx(0.1));
  CHECK((box_face_midpoint(box, pose, BoxSide::kLeft) - Vector2d{0.9, 2.0})
            .norm() < 1e-15);
  CHECK((box_face_midpoint(box, pose, BoxSide::kRight) - Vector2d{1.1, 2.0})
            .norm() < 1e-15);
  // rotate by pi/2: the "right" face points along +y
  kin::Pose2 rot{0.0, 0.0, 0.5 * kPi};
  CHECK((box_face_midpoint(box, rot, BoxSide::kRight) - Vector2d{0.0, 0.1})
            .norm() < 1e-12);
}

TEST_CASE("generated motions pass verification") {
  kin::RobotModel model;
  for (const HoiMotion* m : {&pick_motion(), &push_motion()}) {
    VerificationReport report = verify_motion(*m, model);
    if (!report.pass()) {
      for (const auto& v : report.violations) MESSAGE(v.describe());
    }
    CHECK(report.pass());
  }
}

TEST_CASE("degenerate push goal keeps the object constant") {
  GenParams params;
  params.box_goal_push = params.box_start;
  HoiMotion m = generate_reference(Task::kBoxPush, params, kin::RobotModel{}, 1);
  for (const auto& fr : m.frames) {
    CHECK(fr.object.x == doctest::Approx(params.box_start.x()));
    CHECK(fr.object.y == doctest::Approx(params.box_start.y()));
  }
  // contact flags still follow the phase plan
  auto span = m.contact_span();
  REQUIRE(span.has_value());
  CHECK(span->first > 0);
  CHECK(span->second < m.frame_count() - 1);
}

TEST_CASE("generation is deterministic byte-for-byte") {
  HoiMotion a = generate_reference(Task::kBoxPush, GenParams{}, kin::RobotModel{}, 3);
  HoiMotion b = generate_reference(Task::kBoxPush, GenParams{}, kin::RobotModel{}, 3);
  save_motion(a, "gen_a.json");
  save_motion(b, "gen_b.json");
  std::ifstream fa("gen_a.json"), fb("gen_b.json");
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK(sa.str() == sb.str());
  std::remove("gen_a.json");
  std::remove("gen_b.json");
}

TEST_CASE("reference motions start and end at rest") {
  const HoiMotion& m = push_motion();
  CHECK(m.ref_joint_velocity(0).norm() < 1e-9);
  CHECK(m.ref_joint_velocity(m.frame_count() - 1).norm() < 1e-9);
  CHECK(m.frames.front().object_vel.norm() == 0.0);
  CHECK(m.frames.back().object_vel.norm() == 0.0);
}

TEST_CASE("verifier flags an injected wrist penetration") {
  kin::RobotModel model;
  HoiMotion m = pick_motion();
  // Re-aim the left arm at the box center mid-approach.
  int frame = 20;
  const auto& fr = m.frames[static_cast<std::size_t>(frame)];
  Vector2d center = fr.object.position();
  Vector2d target_p{center.x() - fr.root.x, center.y() - fr.root.y};
  kin::IkResult ik = kin::solve_arm_ik(model, kin::Arm::kLeft, target_p,
                                       {0.5, -1.5, 0.0}, 0.0);
  REQUIRE(ik.residual < 1e-6);
  m.frames[static_cast<std::size_t>(frame)].q[kin::kLShoulder] = ik.q[0];
  m.frames[static_cast<std::size_t>(frame)].q[kin::kLElbow] = ik.q[1];
  m.frames[static_cast<std::size_t>(frame)].q[kin::kLWrist] = ik.q[2];
  VerificationReport report = verify_motion(m, model);
  CHECK(count_kind(report, Violation::Kind::kPenetration) >= 1);
}

TEST_CASE("verifier flags an injected joint velocity spike") {
  kin::RobotModel model;
  HoiMotion m = pick_motion();
  m.frames[10].q[kin::kTorsoPitch] += 0.9;  // 45 rad/s at dt=0.02
  VerificationReport report = verify_motion(m, model);
  CHECK(count_kind(report, Violation::Kind::kVelocityLimit) >= 1);
  CHECK(count_kind(report, Violation::Kind::kJointLimit) == 0);
}

TEST_CASE("verifier flags a joint limit excursion") {
  kin::RobotModel model;
  HoiMotion m = pick_motion();
  m.frames[5].q[kin::kTorsoPitch] = 1.4;
  VerificationReport report = verify_motion(m, model);
  CHECK(count_kind(report, Violation::Kind::kJointLimit) >= 1);
}

TEST_CASE("verifier flags contact flags set while the wrist is far away") {
  kin::RobotModel model;
  HoiMotion m = pick_motion();
  m.frames[2].contact = {true, true};  // wrists still at rest pose
  VerificationReport report = verify_motion(m, model);
  CHECK(count_kind(report, Violation::Kind::kContactInconsistency) >= 1);
}

TEST_CASE("offset_axis covers [-eps, eps] and degenerates to {0}") {
  auto a = offset_axis(0.05, 3);
  REQUIRE(a.size() == 3);
  CHECK(a[0] == doctest::Approx(-0.05));
  CHECK(a[1] == doctest::Approx(0.0));
  CHECK(a[2] == doctest::Approx(0.05));
  auto single = offset_axis(0.5, 1);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == 0.0);
}

TEST_CASE("augment with zero offset reproduces the anchor") {
  kin::RobotModel model;
  AugmentParams params;
  params.epsilon = 0.0;
  params.c3 = 1;
  MotionSet set = augment_motion(push_motion(), model, params);
  REQUIRE(set.count() == 1);
  const HoiMotion& v = set.variants[0].motion;
  for (int i = 0; i < v.frame_count(); ++i) {
    const auto& a = push_motion().frames[static_cast<std::size_t>(i)];
    const auto& b = v.frames[static_cast<std::size_t>(i)];
    CHECK((a.q - b.q).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(a.object.x - b.object.x) < 1e-12);
    CHECK(std::abs(a.object.y - b.object.y) < 1e-12);
  }
}

TEST_CASE("augmentation grid: exact object shifts and contact preservation") {
  kin::RobotModel model;
  AugmentParams params;  // epsilon 0.05, c3 = 9
  const HoiMotion& anchor = pick_motion();
  MotionSet set = augment_motion(anchor, model, params);
  REQUIRE(set.count() == 9);
  set.validate();

  // full Cartesian grid over [-eps, eps]^2
  auto axis = offset_axis(params.epsilon, 3);
  int idx = 0;
  for (int ix = 0; ix < 3; ++ix)
    for (int iy = 0; iy < 3; ++iy) {
      CHECK(set.variants[static_cast<std::size_t>(idx)].offset.x() ==
            doctest::Approx(axis[static_cast<std::size_t>(ix)]));
      CHECK(set.variants[static_cast<std::size_t>(idx)].offset.y() ==
            doctest::Approx(axis[static_cast<std::size_t>(iy)]));
      ++idx;
    }

  for (const auto& variant : set.variants) {
    // (a) object trajectories shift exactly, theta unchanged
    for (int i = 0; i < anchor.frame_count(); ++i) {
      const auto& a = anchor.frames[static_cast<std::size_t>(i)];
      const auto& b = variant.motion.frames[static_cast<std::size_t>(i)];
      CHECK(b.object.x - a.object.x == doctest::Approx(variant.offset.x()).epsilon(1e-12));
      CHECK(b.object.y - a.object.y == doctest::Approx(variant.offset.y()).epsilon(1e-12));
      CHECK(b.object.theta == a.object.theta);
    }
    // (b) wrist-to-grasp-point relative vectors preserved on contact frames
    for (int i = 0; i < anchor.frame_count(); ++i) {
      const auto& a = anchor.frames[static_cast<std::size_t>(i)];
      const auto& b = variant.motion.frames[static_cast<std::size_t>(i)];
      if (!a.contact[0] && !a.contact[1]) continue;
      kin::FkResult fka = kin::forward_kinematics(model, a.q, a.root);
      kin::FkResult fkb = kin::forward_kinematics(model, b.q, b.root);
      Vector2d rel_a_l = fka.wrist_l.position() -
                         box_face_midpoint(anchor.box, a.object, BoxSide::kLeft);
      Vector2d rel_b_l = fkb.wrist_l.position() -
                         box_face_midpoint(anchor.box, b.object, BoxSide::kLeft);
      CHECK((rel_a_l - rel_b_l).norm() < 0.002);
      Vector2d rel_a_r = fka.wrist_r.position() -
                         box_face_midpoint(anchor.box, a.object, BoxSide::kRight);
      Vector2d rel_b_r = fkb.wrist_r.position() -
                         box_face_midpoint(anchor.box, b.object, BoxSide::kRight);
      CHECK((rel_a_r - rel_b_r).norm() < 0.002);
    }
    // warm-started IK keeps consecutive solutions within velocity limits
    for (int i = 1; i < variant.motion.frame_count(); ++i) {
      const auto& prev = variant.motion.frames[static_cast<std::size_t>(i) - 1];
      const auto& cur = variant.motion.frames[static_cast<std::size_t>(i)];
      for (int j = 0; j < kin::kNumJoints; ++j)
        CHECK(std::abs(cur.q[j] - prev.q[j]) <=
              model.qd_max[j] * anchor.dt + 1e-9);
    }
  }
}

TEST_CASE("augment rejects a non-square c3") {
  AugmentParams params;
  params.c3 = 8;
  CHECK_THROWS_AS(augment_motion(push_motion(), kin::RobotModel{}, params),
                  ConfigError);
}

TEST_CASE("motion files round-trip losslessly") {
  const HoiMotion& m = push_motion();
  save_motion(m, "roundtrip.json");
  HoiMotion loaded = load_motion("roundtrip.json");
  CHECK(loaded.dt == m.dt);
  CHECK(loaded.meta.task == m.meta.task);
  CHECK(loaded.meta.seed == m.meta.seed);
  CHECK(loaded.box.w == m.box.w);
  REQUIRE(loaded.frame_count() == m.frame_count());
  for (int i = 0; i < m.frame_count(); ++i) {
    const auto& a = m.frames[static_cast<std::size_t>(i)];
    const auto& b = loaded.frames[static_cast<std::size_t>(i)];
    CHECK((a.q - b.q).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.object.x == b.object.x);
    CHECK(a.object_vel == b.object_vel);
    CHECK(a.contact == b.contact);
    CHECK(a.phase == b.phase);
  }
  std::remove("roundtrip.json");
}

TEST_CASE("loading a file without dt names the missing field") {
  std::ofstream out("missing_dt.json");
  out << R"({"version":1,"joint_names":["a","b","c","d","e","f","g"],)"
      << R"("box":{"w":0.1,"h":0.1},"frames":[]})";
  out.close();
  CHECK_THROWS_WITH_AS(load_motion("missing_dt.json"),
                       doctest::Contains("dt"), ParseError);
  std::remove("missing_dt.json");
}

TEST_CASE("hand-written fixture loads to its documented values") {
  HoiMotion m = load_motion(std::string(TEST_FIXTURE_DIR) + "/minimal_motion.json");
  REQUIRE(m.frame_count() == 2);
  CHECK(m.dt == 0.02);
  CHECK(m.meta.task == "fixture");
  CHECK(m.meta.seed == 7);
  CHECK(m.frames[0].q[kin::kLShoulder] == 0.5);
  CHECK(m.frames[1].object.y == 0.815);
  CHECK(m.frames[1].object_vel.y() == 0.25);
  CHECK(m.frames[0].contact[0] == false);
  CHECK(m.frames[1].contact[1] == true);
  CHECK(m.frames[1].phase == 1.0);
}

TEST_CASE("motion set directory round trip") {
  kin::RobotModel model;
  AugmentParams params;
  params.epsilon = 0.03;
  params.c3 = 4;
  MotionSet set = augment_motion(push_motion(), model, params);
  const std::string dir = "test_motion_set";
  save_motion_set(set, dir, params);
  MotionSet loaded = load_motion_set(dir);
  CHECK(loaded.count() == set.count());
  for (int i = 0; i < set.count(); ++i) {
    CHECK(loaded.variants[static_cast<std::size_t>(i)].offset ==
          set.variants[static_cast<std::size_t>(i)].offset);
    CHECK(loaded.variants[static_cast<std::size_t>(i)].motion.frame_count() ==
          set.variants[static_cast<std::size_t>(i)].motion.frame_count());
  }
  MotionSet as_any = load_motion_or_set(dir);
  CHECK(as_any.count() == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("phase validation rejects a decreasing phase") {
  HoiMotion m = push_motion();
  m.frames[5].phase = m.frames[4].phase - 0.01;
  CHECK_THROWS_AS(m.validate(), ParseError);
}

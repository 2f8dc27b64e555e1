#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hoi/rewards.hpp"

using namespace hoi;
using namespace hoi::rewards;
using Eigen::Vector2d;
using kin::JointVec;

namespace {

// A reward context whose state matches the reference exactly.
struct PerfectSetup {
  sim::PerfectState state;
  kin::FkResult fk;
  JointVec torque = JointVec::Zero();
  sim::RefFrame ref;
  JointVec action = JointVec::Zero();
  JointVec prev_action = JointVec::Zero();

  PerfectSetup() {
    kin::RobotModel model;
    JointVec q;
    q << 0.1, 0.4, -1.3, 0.05, 0.5, -1.2, -0.05;
    kin::Pose2 root{0.0, 0.75, 0.0};
    fk = kin::forward_kinematics(model, q, root);
    motion::BoxShape box{0.12, 0.12};
    kin::Pose2 obj{0.4, 0.8, 0.1};

    ref.q = q;
    ref.qd = JointVec::Zero();
    ref.root = root;
    ref.object = obj;
    ref.contact = {false, false};
    ref.link_pos = fk.link_positions();
    ref.link_heading = fk.link_headings();
    ref.s_ig = sim::build_interaction_graph(fk.wrist_l.position(),
                                            fk.wrist_r.position(), obj, box);

    state.q = q;
    state.qd = JointVec::Zero();
    state.object_pos = obj.position();
    state.object_rot = obj.theta;
    state.h_o = {false, false};
    state.s_ig = ref.s_ig;
    action << 0.1, 0.2, 0.3, -0.1, -0.2, -0.3, 0.0;
    prev_action = action;
  }

  RewardContext ctx() const {
    return RewardContext{&state, &fk, &torque, &ref, &action, &prev_action};
  }
};

}  // namespace

TEST_CASE("perfect tracking yields unit tracking terms and zero penalties") {
  PerfectSetup s;
  SubRewardVector r = compute_subrewards(s.ctx(), 1.0);
  for (int k : {kJp, kJv, kLp, kLr, kOp, kOr, kIg, kCm})
    CHECK(r[k] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r[kAr] == 0.0);
  CHECK(r[kTq] == 0.0);
}

TEST_CASE("interaction-graph term follows exp(-theta * e)") {
  PerfectSetup s;
  // e_ig = 0 keeps r_ig at 1 regardless of theta
  for (double theta : {0.0, 0.5, 10.0}) {
    SubRewardVector r = compute_subrewards(s.ctx(), theta);
    CHECK(r[kIg] == 1.0);
  }
  // theta = 1 with e_ig = ln 2 halves the reward
  PerfectSetup shifted;
  double delta = std::sqrt(std::log(2.0) / sim::kIgDim);
  for (int i = 0; i < sim::kIgDim; ++i) shifted.state.s_ig[i] += delta;
  SubRewardVector r = compute_subrewards(shifted.ctx(), 1.0);
  CHECK(r[kIg] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tracking terms strictly decrease as their error grows") {
  PerfectSetup base;
  double prev_jp = 2.0, prev_op = 2.0, prev_ig = 2.0;
  for (double e : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) {
    PerfectSetup s;
    s.state.q[0] += e;
    s.state.object_pos.x() += e;
    s.state.s_ig[0] += e;
    SubRewardVector r = compute_subrewards(s.ctx(), 1.0);
    CHECK(r[kJp] < prev_jp);
    CHECK(r[kOp] < prev_op);
    CHECK(r[kIg] < prev_ig);
    CHECK(r[kJp] > 0.0);
    prev_jp = r[kJp];
    prev_op = r[kOp];
    prev_ig = r[kIg];
  }
}

TEST_CASE("contact mismatches and penalties") {
  PerfectSetup s;
  s.state.h_o = {true, false};
  s.ref.contact = {false, false};
  JointVec new_action = s.prev_action;
  new_action[2] += 0.5;
  s.action = new_action;
  s.torque[1] = 20.0;
  SubRewardVector r = compute_subrewards(s.ctx(), 1.0);
  CHECK(r[kCm] == doctest::Approx(std::exp(-2.0)));
  CHECK(r[kAr] == doctest::Approx(-0.25));
  CHECK(r[kTq] == doctest::Approx(-400.0 * 1e-4));
  CHECK(r[kCm] > 0.0);
  CHECK(r[kAr] <= 0.0);
  CHECK(r[kTq] <= 0.0);
}

TEST_CASE("weighted reward is a dot product in fixed order") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    SubRewardVector r;
    RewardWeights w;
    for (int k = 0; k < kNumTerms; ++k) {
      r[k] = rng.uniform(-1, 1);
      w[k] = rng.uniform(0, 2);
    }
    double expect = 0.0;
    for (int k = 0; k < kNumTerms; ++k) expect += r[k] * w[k];
    CHECK(std::abs(weighted_reward(r, w) - expect) < 1e-15);
  }
  SubRewardVector r = SubRewardVector::Ones();
  RewardWeights zero;
  CHECK(weighted_reward(r, zero) == 0.0);
  RewardWeights onehot;
  onehot[kOp] = 1.0;
  r[kOp] = 0.37;
  CHECK(weighted_reward(r, onehot) == doctest::Approx(0.37));
}

TEST_CASE("weighted reward is linear in the weights") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    SubRewardVector r;
    RewardWeights w1, w2, mix;
    double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    for (int k = 0; k < kNumTerms; ++k) {
      r[k] = rng.uniform(-1, 1);
      w1[k] = rng.uniform(0, 1);
      w2[k] = rng.uniform(0, 1);
      mix[k] = a * w1[k] + b * w2[k];
    }
    double lhs = weighted_reward(r, mix);
    double rhs = a * weighted_reward(r, w1) + b * weighted_reward(r, w2);
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
}

namespace {

// Clean-room single-pass metric oracle used to pin tracking_errors.
MetricsReport oracle_metrics(const std::vector<TrajPoint>& traj,
                             const std::vector<sim::RefFrame>& ref) {
  MetricsReport m;
  const int upper[] = {1, 2, 3, 4, 5};
  const int three[] = {1, 3, 5};
  for (const auto& p : traj) {
    const sim::RefFrame& r = ref[static_cast<std::size_t>(p.frame)];
    double jp = 0;
    for (int j = 0; j < 7; ++j) jp += std::abs(p.q[j] - r.q[j]);
    m.e_mpjpe += jp / 7.0;
    m.e_mllpe += (p.link_pos[0] - r.link_pos[0]).norm();
    double up = 0;
    for (int i : upper) up += (p.link_pos[static_cast<std::size_t>(i)] - r.link_pos[static_cast<std::size_t>(i)]).norm();
    m.e_mulpe += up / 5.0;
    double th = 0;
    for (int i : three) th += (p.link_pos[static_cast<std::size_t>(i)] - r.link_pos[static_cast<std::size_t>(i)]).norm();
    m.e_m3lpe += th / 3.0;
    m.e_mope += (p.object_pos - r.object.position()).norm();
    m.e_morae += std::abs(wrap_angle(p.object_rot - r.object.theta));
    m.e_mige += (p.s_ig - r.s_ig).squaredNorm() / 16.0;
    double lr = 0;
    for (int i = 0; i < 7; ++i)
      lr += std::abs(wrap_angle(p.link_heading[static_cast<std::size_t>(i)] -
                                r.link_heading[static_cast<std::size_t>(i)]));
    m.e_mlrae += lr / 7.0;
    m.e_jp += (p.q - r.q).squaredNorm();
    m.e_op += (p.object_pos - r.object.position()).squaredNorm();
    double lp = 0;
    for (std::size_t i = 0; i < 6; ++i)
      lp += (p.link_pos[i] - r.link_pos[i]).squaredNorm();
    m.e_lp += lp;
  }
  double n = static_cast<double>(traj.size());
  m.e_mpjpe /= n; m.e_mllpe /= n; m.e_mulpe /= n; m.e_m3lpe /= n;
  m.e_mope /= n; m.e_morae /= n; m.e_mige /= n; m.e_mlrae /= n;
  m.e_jp /= n; m.e_op /= n; m.e_lp /= n;
  return m;
}

std::vector<sim::RefFrame> random_reference(Rng& rng, int n) {
  std::vector<sim::RefFrame> ref(static_cast<std::size_t>(n));
  for (auto& r : ref) {
    for (int j = 0; j < 7; ++j) r.q[j] = rng.uniform(-2, 2);
    for (auto& lp : r.link_pos) lp = Vector2d{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (auto& lh : r.link_heading) lh = rng.uniform(-3, 3);
    r.object = kin::Pose2{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-3, 3)};
    for (int i = 0; i < 16; ++i) r.s_ig[i] = rng.uniform(-1, 1);
  }
  return ref;
}

std::vector<TrajPoint> random_trajectory(Rng& rng, int n, int ref_frames) {
  std::vector<TrajPoint> traj(static_cast<std::size_t>(n));
  for (auto& p : traj) {
    for (int j = 0; j < 7; ++j) p.q[j] = rng.uniform(-2, 2);
    for (auto& lp : p.link_pos) lp = Vector2d{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (auto& lh : p.link_heading) lh = rng.uniform(-3, 3);
    p.object_pos = Vector2d{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    p.object_rot = rng.uniform(-3, 3);
    for (int i = 0; i < 16; ++i) p.s_ig[i] = rng.uniform(-1, 1);
    p.frame = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ref_frames)));
  }
  return traj;
}

}  // namespace

TEST_CASE("identical trajectories give all-zero metrics") {
  Rng rng(7);
  auto ref = random_reference(rng, 20);
  std::vector<TrajPoint> traj;
  for (int i = 0; i < 20; ++i) {
    TrajPoint p;
    p.q = ref[static_cast<std::size_t>(i)].q;
    p.link_pos = ref[static_cast<std::size_t>(i)].link_pos;
    p.link_heading = ref[static_cast<std::size_t>(i)].link_heading;
    p.object_pos = ref[static_cast<std::size_t>(i)].object.position();
    p.object_rot = ref[static_cast<std::size_t>(i)].object.theta;
    p.s_ig = ref[static_cast<std::size_t>(i)].s_ig;
    p.frame = i;
    traj.push_back(p);
  }
  MetricsReport m = tracking_errors(traj, ref);
  CHECK(m.e_mpjpe == 0.0);
  CHECK(m.e_mllpe == 0.0);
  CHECK(m.e_mulpe == 0.0);
  CHECK(m.e_m3lpe == 0.0);
  CHECK(m.e_mope == 0.0);
  CHECK(m.e_morae == 0.0);
  CHECK(m.e_mige == 0.0);
  CHECK(m.e_mlrae == 0.0);
  CHECK(m.e_jp == 0.0);
  CHECK(m.e_op == 0.0);
  CHECK(m.e_lp == 0.0);
}

TEST_CASE("constant object offset maps to E_mope = d, e_op = d^2") {
  Rng rng(9);
  auto ref = random_reference(rng, 15);
  const double d = 0.07;
  std::vector<TrajPoint> traj;
  for (int i = 0; i < 15; ++i) {
    TrajPoint p;
    p.q = ref[static_cast<std::size_t>(i)].q;
    p.link_pos = ref[static_cast<std::size_t>(i)].link_pos;
    p.link_heading = ref[static_cast<std::size_t>(i)].link_heading;
    p.object_pos = ref[static_cast<std::size_t>(i)].object.position() + Vector2d{d, 0};
    p.object_rot = ref[static_cast<std::size_t>(i)].object.theta;
    p.s_ig = ref[static_cast<std::size_t>(i)].s_ig;
    p.frame = i;
    traj.push_back(p);
  }
  MetricsReport m = tracking_errors(traj, ref);
  CHECK(m.e_mope == doctest::Approx(d).epsilon(1e-12));
  CHECK(m.e_op == doctest::Approx(d * d).epsilon(1e-12));
  CHECK(m.e_mpjpe == 0.0);
}

TEST_CASE("metrics match the independent oracle on 100 random trajectories") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto ref = random_reference(rng, 12);
    auto traj = random_trajectory(rng, 8, 12);
    MetricsReport a = tracking_errors(traj, ref);
    MetricsReport b = oracle_metrics(traj, ref);
    CHECK(std::abs(a.e_mpjpe - b.e_mpjpe) < 1e-12);
    CHECK(std::abs(a.e_mllpe - b.e_mllpe) < 1e-12);
    CHECK(std::abs(a.e_mulpe - b.e_mulpe) < 1e-12);
    CHECK(std::abs(a.e_m3lpe - b.e_m3lpe) < 1e-12);
    CHECK(std::abs(a.e_mope - b.e_mope) < 1e-12);
    CHECK(std::abs(a.e_morae - b.e_morae) < 1e-12);
    CHECK(std::abs(a.e_mige - b.e_mige) < 1e-12);
    CHECK(std::abs(a.e_mlrae - b.e_mlrae) < 1e-12);
    CHECK(std::abs(a.e_jp - b.e_jp) < 1e-12);
    CHECK(std::abs(a.e_op - b.e_op) < 1e-12);
    CHECK(std::abs(a.e_lp - b.e_lp) < 1e-12);
  }
}

TEST_CASE("E_mpjpe is invariant to a shared joint offset") {
  Rng rng(13);
  auto ref = random_reference(rng, 10);
  auto traj = random_trajectory(rng, 10, 10);
  MetricsReport before = tracking_errors(traj, ref);
  const double c = 0.6;
  for (auto& r : ref) r.q.array() += c;
  for (auto& p : traj) p.q.array() += c;
  MetricsReport after = tracking_errors(traj, ref);
  CHECK(after.e_mpjpe == doctest::Approx(before.e_mpjpe).epsilon(1e-12));
}

TEST_CASE("misaligned trajectory frames are a contract error") {
  Rng rng(15);
  auto ref = random_reference(rng, 5);
  auto traj = random_trajectory(rng, 3, 5);
  traj[1].frame = 99;
  CHECK_THROWS_AS(tracking_errors(traj, ref), ContractError);
}

TEST_CASE("success: replaying the reference succeeds, faults fail") {
  EpisodeRecord ep;
  ep.completed = true;
  ep.final_object = kin::Pose2{0.3, 0.81, 0.0};
  ep.goal_object = kin::Pose2{0.3, 0.81, 0.0};
  CHECK(success(ep));

  EpisodeRecord fall = ep;
  fall.fault = true;
  CHECK_FALSE(success(fall));

  EpisodeRecord off = ep;
  off.final_object.x += 0.04;  // inside the 0.05 m default tolerance
  CHECK(success(off));
  off.final_object.x += 0.03;  // now outside
  CHECK_FALSE(success(off));

  EpisodeRecord rot = ep;
  rot.final_object.theta = 0.25;  // beyond the 0.2 rad tolerance
  CHECK_FALSE(success(rot));
}

TEST_CASE("success: pick tasks must end holding the object above the table") {
  EpisodeRecord ep;
  ep.completed = true;
  ep.is_pick = true;
  ep.table_height = 0.75;
  ep.box_h = 0.12;
  ep.final_object = kin::Pose2{0.42, 0.93, 0.0};
  ep.goal_object = ep.final_object;
  ep.final_attached = true;
  CHECK(success(ep));
  ep.final_attached = false;
  CHECK_FALSE(success(ep));
  ep.final_attached = true;
  ep.final_object.y = 0.78;  // bottom at 0.72, below the table surface
  ep.goal_object = ep.final_object;
  CHECK_FALSE(success(ep));
}

TEST_CASE("reward weight defaults are valid and ordered by name") {
  RewardWeights w = RewardWeights::defaults();
  w.validate();
  CHECK(w[kJp] == 1.0);
  CHECK(w[kOp] == 1.5);
  CHECK(w[kTq] == 0.05);
  CHECK(std::string(kTermNames[kIg]) == "ig");
  RewardWeights bad = w;
  bad[kAr] = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

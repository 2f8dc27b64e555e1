#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "hoi/kinematics.hpp"
#include "hoi/motion.hpp"

namespace hoi::sim {

using Eigen::Vector2d;
using Eigen::VectorXd;
using kin::JointVec;
using kin::Pose2;

constexpr int kContactLinks = 2;   // c1: the two wrists
constexpr int kFeaturePoints = 4;  // c2: the four box corners
constexpr int kIgDim = kContactLinks * kFeaturePoints * 2;
using IgVec = Eigen::Matrix<double, kIgDim, 1>;

// Privileged critic-side state. Flattening order (48 entries):
// q(7), qd(7), omega_root(1), g_proj(2), a_prev(7),
// obj_pos(2), obj_vel(2), obj_rot(1), h_o(2), s_ig(16), phase(1).
struct PerfectState {
  JointVec q = JointVec::Zero();
  JointVec qd = JointVec::Zero();
  double omega_root = 0.0;
  Vector2d g_proj{0.0, -1.0};
  JointVec a_prev = JointVec::Zero();
  Vector2d object_pos = Vector2d::Zero();
  Vector2d object_vel = Vector2d::Zero();
  double object_rot = 0.0;
  std::array<bool, 2> h_o{false, false};
  IgVec s_ig = IgVec::Zero();
  double phase = 0.0;

  static constexpr int kFlatDim = 48;
  VectorXd flatten(double qd_scale) const;
};

// Actor-side observation: proprioception plus the degraded object-position
// channel only. Excludes the interaction graph, contact booleans, and
// object velocity/rotation by construction.
struct ImperfectState {
  JointVec q = JointVec::Zero();
  JointVec qd = JointVec::Zero();
  double omega_root = 0.0;
  Vector2d g_proj{0.0, -1.0};
  JointVec a_prev = JointVec::Zero();
  Vector2d object_pos_observed = Vector2d::Zero();
  double phase = 0.0;

  static constexpr int kFlatDim = 27;
  VectorXd flatten(double qd_scale) const;
  // Schema of the flattened layout, one name per entry.
  static std::vector<std::string> flat_schema();
};

struct EnvParams {
  double box_mass = 0.5;          // kg
  double friction_static = 0.5;
  double friction_kinetic = 0.4;
  double pd_scale = 1.0;
  double obs_noise_std = 0.0;     // m
  int obs_latency = 0;            // steps
  double obs_dropout = 0.0;       // probability per step
  int action_delay = 0;           // steps
  double contact_stiffness = 2000.0;  // N/m wrist-box penalty spring

  void validate() const;
};

// Uniform per-episode sampling ranges. *_factor entries multiply the base
// value; noise/dropout are sampled absolutely.
struct DrRanges {
  double mass_factor_lo = 0.8, mass_factor_hi = 1.2;
  double friction_factor_lo = 0.7, friction_factor_hi = 1.3;
  double pd_factor_lo = 0.9, pd_factor_hi = 1.1;
  double obs_noise_lo = 0.0, obs_noise_hi = 0.01;
  int latency_lo = 0, latency_hi = 2;
  double dropout_lo = 0.0, dropout_hi = 0.1;
  int delay_lo = 0, delay_hi = 0;

  void validate() const;
};

EnvParams randomize_domain(const EnvParams& base, const DrRanges& ranges,
                           Rng& rng);

struct SimConfig {
  double dt = 0.02;
  double gravity = 9.81;
  double table_height = 0.75;
  double grasp_attach_radius = 0.04;
  double grasp_detach_radius = 0.08;
  double rsi_phase0_prob = 0.8;
  double rsi_max_phase = 0.5;
  double term_torso_pitch = 0.8;    // rad, fall analog
  double term_link_deviation = 0.5; // m from reference
  double qd_scale = 0.1;            // fixed observation scaling

  void validate() const;
};

// Interaction graph: planar displacement (link - feature point) for each
// (wrist, box corner) pair, flattened L then R, corners BL,BR,TR,TL.
IgVec build_interaction_graph(const Vector2d& wrist_l, const Vector2d& wrist_r,
                              const Pose2& object_pose,
                              const motion::BoxShape& box);

// Degraded object-position channel: latency line, additive gaussian noise,
// and dropout that holds the previously emitted value.
struct ObsChannel {
  std::deque<Vector2d> delay_line;
  Vector2d last_emitted = Vector2d::Zero();

  void reset(const Vector2d& initial, int latency);
  Vector2d observe(const Vector2d& true_pos, const EnvParams& params, Rng& rng);
};

ImperfectState observe_imperfect(const PerfectState& perfect,
                                 const EnvParams& params, Rng& rng,
                                 ObsChannel& channel);

// Reference data precomputed per variant frame: FK link poses, interaction
// graph, and finite-difference joint velocities.
struct RefFrame {
  JointVec q = JointVec::Zero();
  JointVec qd = JointVec::Zero();
  Pose2 root;
  Pose2 object;
  Eigen::Vector3d object_vel = Eigen::Vector3d::Zero();
  std::array<bool, 2> contact{false, false};
  double phase = 0.0;
  std::array<Vector2d, kin::FkResult::kNumLinks> link_pos;
  std::array<double, kin::FkResult::kNumHeadings> link_heading{};
  IgVec s_ig = IgVec::Zero();
  Vector2d wrist_l = Vector2d::Zero();
  Vector2d wrist_r = Vector2d::Zero();
};

struct RefData {
  motion::MotionSet set;
  kin::RobotModel model;
  std::vector<std::vector<RefFrame>> variants;

  static std::shared_ptr<const RefData> build(motion::MotionSet set,
                                              const kin::RobotModel& model);
  int frame_count() const {
    return static_cast<int>(variants.front().size());
  }
};

struct GraspState {
  bool attached = false;
  Vector2d offset = Vector2d::Zero();  // object center in the mid-wrist frame
  double rot_offset = 0.0;
};

struct ContactEvents {
  bool attached = false;
  bool detached = false;
};

struct StepResult {
  bool done = false;
  bool fault = false;       // early termination (fall analog / bad action)
  bool completed = false;   // reached the final reference frame
  ContactEvents events;
};

// Deterministic planar HOI micro-simulator. The robot is a PD-driven,
// unit-inertia joint chain on a fixed root; the box is kinematically
// attached while grasped, slides with Coulomb friction on the table, and
// falls ballistically otherwise. One instance per parallel rollout worker;
// each owns its RNG stream.
class Environment {
 public:
  Environment(std::shared_ptr<const RefData> ref, const SimConfig& config,
              const EnvParams& base_params, const DrRanges& ranges,
              bool randomize, Rng rng);

  // Invoked after every reset with the episode's effective (possibly
  // DR-sampled) parameters; used for per-episode draw logging.
  std::function<void(const EnvParams&, int variant, int frame)> on_reset;

  PerfectState reset();
  // `action` holds normalized PD joint targets in [-1, 1] (affinely mapped
  // onto the joint limits).
  StepResult step(const JointVec& action);

  ImperfectState observe(const PerfectState& perfect);

  const PerfectState& state() const { return state_; }
  const RefFrame& ref_frame() const;
  const RefFrame& ref_frame_at(int frame) const;
  const std::vector<RefFrame>& ref_frames() const {
    return ref_->variants[static_cast<std::size_t>(variant_)];
  }
  const kin::FkResult& fk() const { return fk_; }
  const JointVec& torque() const { return tau_; }
  const EnvParams& params() const { return params_; }
  const SimConfig& config() const { return config_; }
  const kin::RobotModel& model() const { return ref_->model; }
  const motion::BoxShape& box() const { return ref_->set.anchor.box; }
  int variant_index() const { return variant_; }
  int frame_index() const { return frame_; }
  int start_frame() const { return start_frame_; }
  int frames_total() const {
    return static_cast<int>(ref_->variants[static_cast<std::size_t>(variant_)].size());
  }
  int episode_steps() const { return steps_; }
  bool grasp_attached() const { return grasp_.attached; }
  bool episode_done() const { return done_; }

  // Forces a deterministic reset to a given variant and frame (used by the
  // evaluator and tests); DR still applies when enabled.
  PerfectState reset_to(int variant, int frame);

 private:
  void assemble_state();
  void object_dynamics(const Vector2d& wrist_l, const Vector2d& wrist_r);

  std::shared_ptr<const RefData> ref_;
  SimConfig config_;
  EnvParams base_params_;
  EnvParams params_;
  DrRanges ranges_;
  bool randomize_ = false;
  Rng rng_;

  int variant_ = 0;
  int frame_ = 0;
  int start_frame_ = 0;
  int steps_ = 0;
  bool done_ = true;

  JointVec q_ = JointVec::Zero();
  JointVec qd_ = JointVec::Zero();
  Pose2 root_;
  Pose2 object_;
  Vector2d object_vel_ = Vector2d::Zero();
  double object_omega_ = 0.0;
  GraspState grasp_;
  JointVec a_prev_ = JointVec::Zero();
  std::deque<JointVec> action_queue_;
  ObsChannel obs_channel_;

  kin::FkResult fk_;
  JointVec tau_ = JointVec::Zero();
  PerfectState state_;
};

}  // namespace hoi::sim

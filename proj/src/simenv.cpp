#include "hoi/simenv.hpp"

#include <algorithm>
#include <cmath>

namespace hoi::sim {

VectorXd PerfectState::flatten(double qd_scale) const {
  VectorXd v(kFlatDim);
  int i = 0;
  for (int j = 0; j < kin::kNumJoints; ++j) v[i++] = q[j];
  for (int j = 0; j < kin::kNumJoints; ++j) v[i++] = qd[j] * qd_scale;
  v[i++] = omega_root;
  v[i++] = g_proj.x();
  v[i++] = g_proj.y();
  for (int j = 0; j < kin::kNumJoints; ++j) v[i++] = a_prev[j];
  v[i++] = object_pos.x();
  v[i++] = object_pos.y();
  v[i++] = object_vel.x();
  v[i++] = object_vel.y();
  v[i++] = object_rot;
  v[i++] = h_o[0] ? 1.0 : 0.0;
  v[i++] = h_o[1] ? 1.0 : 0.0;
  for (int j = 0; j < kIgDim; ++j) v[i++] = s_ig[j];
  v[i++] = phase;
  return v;
}

VectorXd ImperfectState::flatten(double qd_scale) const {
  VectorXd v(kFlatDim);
  int i = 0;
  for (int j = 0; j < kin::kNumJoints; ++j) v[i++] = q[j];
  for (int j = 0; j < kin::kNumJoints; ++j) v[i++] = qd[j] * qd_scale;
  v[i++] = omega_root;
  v[i++] = g_proj.x();
  v[i++] = g_proj.y();
  for (int j = 0; j < kin::kNumJoints; ++j) v[i++] = a_prev[j];
  v[i++] = object_pos_observed.x();
  v[i++] = object_pos_observed.y();
  v[i++] = phase;
  return v;
}

std::vector<std::string> ImperfectState::flat_schema() {
  std::vector<std::string> names;
  for (int j = 0; j < kin::kNumJoints; ++j)
    names.push_back("q." + std::string(kin::kJointNames[static_cast<std::size_t>(j)]));
  for (int j = 0; j < kin::kNumJoints; ++j)
    names.push_back("qd." + std::string(kin::kJointNames[static_cast<std::size_t>(j)]));
  names.push_back("omega_root");
  names.push_back("g_proj.x");
  names.push_back("g_proj.y");
  for (int j = 0; j < kin::kNumJoints; ++j)
    names.push_back("a_prev." + std::string(kin::kJointNames[static_cast<std::size_t>(j)]));
  names.push_back("object_pos_observed.x");
  names.push_back("object_pos_observed.y");
  names.push_back("phase");
  return names;
}

void EnvParams::validate() const {
  if (box_mass <= 0) throw ConfigError("env: box mass must be > 0");
  if (friction_static < 0 || friction_kinetic < 0)
    throw ConfigError("env: friction coefficients must be >= 0");
  if (pd_scale < 0) throw ConfigError("env: pd scale must be >= 0");
  if (obs_noise_std < 0) throw ConfigError("env: obs noise std must be >= 0");
  if (obs_latency < 0) throw ConfigError("env: obs latency must be >= 0");
  if (obs_dropout < 0 || obs_dropout > 1)
    throw ConfigError("env: obs dropout must be in [0, 1]");
  if (action_delay < 0) throw ConfigError("env: action delay must be >= 0");
  if (contact_stiffness < 0) throw ConfigError("env: contact stiffness must be >= 0");
}

void DrRanges::validate() const {
  auto ordered = [](double lo, double hi) { return lo <= hi; };
  if (!ordered(mass_factor_lo, mass_factor_hi) ||
      !ordered(friction_factor_lo, friction_factor_hi) ||
      !ordered(pd_factor_lo, pd_factor_hi) ||
      !ordered(obs_noise_lo, obs_noise_hi) ||
      !ordered(dropout_lo, dropout_hi) || latency_lo > latency_hi ||
      delay_lo > delay_hi)
    throw ConfigError("dr: each range must satisfy lo <= hi");
  if (latency_lo < 0 || delay_lo < 0)
    throw ConfigError("dr: latency/delay must be >= 0");
}

EnvParams randomize_domain(const EnvParams& base, const DrRanges& ranges,
                           Rng& rng) {
  ranges.validate();
  EnvParams out = base;
  out.box_mass = base.box_mass * rng.uniform(ranges.mass_factor_lo,
                                             ranges.mass_factor_hi);
  double friction = rng.uniform(ranges.friction_factor_lo,
                                ranges.friction_factor_hi);
  out.friction_static = base.friction_static * friction;
  out.friction_kinetic = base.friction_kinetic * friction;
  out.pd_scale = base.pd_scale * rng.uniform(ranges.pd_factor_lo,
                                             ranges.pd_factor_hi);
  out.obs_noise_std = rng.uniform(ranges.obs_noise_lo, ranges.obs_noise_hi);
  out.obs_latency = ranges.latency_lo +
                    static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                        ranges.latency_hi - ranges.latency_lo + 1)));
  out.obs_dropout = rng.uniform(ranges.dropout_lo, ranges.dropout_hi);
  out.action_delay = ranges.delay_lo +
                     static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                         ranges.delay_hi - ranges.delay_lo + 1)));
  out.validate();
  return out;
}

void SimConfig::validate() const {
  if (dt <= 0) throw ConfigError("sim: dt must be > 0");
  if (grasp_attach_radius >= grasp_detach_radius)
    throw ConfigError("sim: attach radius must be < detach radius");
  if (rsi_phase0_prob < 0 || rsi_phase0_prob > 1)
    throw ConfigError("sim: rsi phase0 probability must be in [0, 1]");
  if (rsi_max_phase < 0 || rsi_max_phase > 1)
    throw ConfigError("sim: rsi max phase must be in [0, 1]");
}

IgVec build_interaction_graph(const Vector2d& wrist_l, const Vector2d& wrist_r,
                              const Pose2& object_pose,
                              const motion::BoxShape& box) {
  const auto corners = motion::box_corners(box, object_pose);
  IgVec v;
  int i = 0;
  for (const Vector2d* wrist : {&wrist_l, &wrist_r}) {
    for (const Vector2d& corner : corners) {
      Vector2d d = *wrist - corner;
      v[i++] = d.x();
      v[i++] = d.y();
    }
  }
  return v;
}

void ObsChannel::reset(const Vector2d& initial, int latency) {
  delay_line.assign(static_cast<std::size_t>(latency) + 1, initial);
  last_emitted = initial;
}

Vector2d ObsChannel::observe(const Vector2d& true_pos, const EnvParams& params,
                             Rng& rng) {
  delay_line.push_back(true_pos);
  while (delay_line.size() > static_cast<std::size_t>(params.obs_latency) + 1)
    delay_line.pop_front();
  const bool dropped = rng.uniform() < params.obs_dropout;
  if (dropped) return last_emitted;
  Vector2d obs = delay_line.front();
  if (params.obs_noise_std > 0.0) {
    obs.x() += rng.normal(0.0, params.obs_noise_std);
    obs.y() += rng.normal(0.0, params.obs_noise_std);
  }
  last_emitted = obs;
  return obs;
}

ImperfectState observe_imperfect(const PerfectState& perfect,
                                 const EnvParams& params, Rng& rng,
                                 ObsChannel& channel) {
  ImperfectState s;
  s.q = perfect.q;
  s.qd = perfect.qd;
  s.omega_root = perfect.omega_root;
  s.g_proj = perfect.g_proj;
  s.a_prev = perfect.a_prev;
  s.phase = perfect.phase;
  s.object_pos_observed = channel.observe(perfect.object_pos, params, rng);
  return s;
}

std::shared_ptr<const RefData> RefData::build(motion::MotionSet set,
                                              const kin::RobotModel& model) {
  set.validate();
  auto data = std::make_shared<RefData>();
  data->set = std::move(set);
  data->model = model;
  for (const auto& variant : data->set.variants) {
    const motion::HoiMotion& m = variant.motion;
    std::vector<RefFrame> frames(static_cast<std::size_t>(m.frame_count()));
    for (int i = 0; i < m.frame_count(); ++i) {
      const motion::MotionFrame& fr = m.frames[static_cast<std::size_t>(i)];
      RefFrame& rf = frames[static_cast<std::size_t>(i)];
      rf.q = fr.q;
      rf.qd = m.ref_joint_velocity(i);
      rf.root = fr.root;
      rf.object = fr.object;
      rf.object_vel = fr.object_vel;
      rf.contact = fr.contact;
      rf.phase = fr.phase;
      kin::FkResult fk = kin::forward_kinematics(model, fr.q, fr.root);
      rf.link_pos = fk.link_positions();
      rf.link_heading = fk.link_headings();
      rf.wrist_l = fk.wrist_l.position();
      rf.wrist_r = fk.wrist_r.position();
      rf.s_ig = build_interaction_graph(rf.wrist_l, rf.wrist_r, fr.object,
                                        m.box);
    }
    data->variants.push_back(std::move(frames));
  }
  return data;
}

Environment::Environment(std::shared_ptr<const RefData> ref,
                         const SimConfig& config, const EnvParams& base_params,
                         const DrRanges& ranges, bool randomize, Rng rng)
    : ref_(std::move(ref)),
      config_(config),
      base_params_(base_params),
      params_(base_params),
      ranges_(ranges),
      randomize_(randomize),
      rng_(rng) {
  config_.validate();
  base_params_.validate();
  ranges_.validate();
  ref_->model.validate();
  if (ref_->variants.empty())
    throw ContractError("Environment: empty motion set");
}

const RefFrame& Environment::ref_frame() const {
  return ref_->variants[static_cast<std::size_t>(variant_)]
                       [static_cast<std::size_t>(frame_)];
}

const RefFrame& Environment::ref_frame_at(int frame) const {
  const auto& frames = ref_->variants[static_cast<std::size_t>(variant_)];
  if (frame < 0 || frame >= static_cast<int>(frames.size()))
    throw ContractError("ref_frame_at: frame out of range");
  return frames[static_cast<std::size_t>(frame)];
}

PerfectState Environment::reset() {
  const int n_variants = static_cast<int>(ref_->variants.size());
  int variant = static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(n_variants)));
  const int total = static_cast<int>(ref_->variants[static_cast<std::size_t>(variant)].size());
  int frame = 0;
  if (rng_.uniform() >= config_.rsi_phase0_prob) {
    int max_frame = static_cast<int>(std::floor(config_.rsi_max_phase * (total - 1)));
    frame = static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(max_frame) + 1));
  }
  return reset_to(variant, frame);
}

PerfectState Environment::reset_to(int variant, int frame) {
  if (variant < 0 || variant >= static_cast<int>(ref_->variants.size()))
    throw ContractError("reset_to: variant out of range");
  params_ = randomize_ ? randomize_domain(base_params_, ranges_, rng_)
                       : base_params_;
  variant_ = variant;
  frame_ = frame;
  start_frame_ = frame;
  steps_ = 0;
  done_ = false;

  const RefFrame& rf = ref_frame();
  q_ = rf.q;
  qd_ = rf.qd;
  root_ = rf.root;
  object_ = rf.object;
  object_vel_ = {rf.object_vel.x(), rf.object_vel.y()};
  object_omega_ = rf.object_vel.z();
  grasp_ = GraspState{};
  a_prev_ = ref_->model.normalize_q(q_);
  for (int j = 0; j < kin::kNumJoints; ++j)
    a_prev_[j] = std::clamp(a_prev_[j], -1.0, 1.0);
  action_queue_.assign(static_cast<std::size_t>(params_.action_delay), a_prev_);
  obs_channel_.reset(object_.position(), params_.obs_latency);
  tau_ = JointVec::Zero();
  fk_ = kin::forward_kinematics(ref_->model, q_, root_);
  assemble_state();
  if (on_reset) on_reset(params_, variant_, frame_);
  return state_;
}

void Environment::object_dynamics(const Vector2d& wrist_l,
                                  const Vector2d& wrist_r) {
  const motion::BoxShape& shape = box();
  const double dt = config_.dt;

  if (grasp_.attached) {
    // Detach when either wrist strays from its face midpoint.
    Vector2d face_l = motion::box_face_midpoint(shape, object_, motion::BoxSide::kLeft);
    Vector2d face_r = motion::box_face_midpoint(shape, object_, motion::BoxSide::kRight);
    if ((wrist_l - face_l).norm() > config_.grasp_detach_radius ||
        (wrist_r - face_r).norm() > config_.grasp_detach_radius)
      grasp_.attached = false;
  }

  if (grasp_.attached) {
    // Kinematic attach: the object rides the mid-wrist frame.
    Vector2d mid = 0.5 * (wrist_l + wrist_r);
    Vector2d span = wrist_r - wrist_l;
    double heading = std::atan2(span.y(), span.x());
    double c = std::cos(heading), s = std::sin(heading);
    Vector2d new_pos{mid.x() + c * grasp_.offset.x() - s * grasp_.offset.y(),
                     mid.y() + s * grasp_.offset.x() + c * grasp_.offset.y()};
    double new_rot = wrap_angle(heading + grasp_.rot_offset);
    object_vel_ = (new_pos - object_.position()) / dt;
    object_omega_ = wrap_angle(new_rot - object_.theta) / dt;
    object_ = Pose2{new_pos.x(), new_pos.y(), new_rot};
    return;
  }

  // Penalty push force from wrists that penetrate the box.
  Vector2d force = Vector2d::Zero();
  for (const Vector2d* wrist : {&wrist_l, &wrist_r}) {
    double sd = motion::box_signed_distance(shape, object_, *wrist);
    if (sd >= 0.0) continue;
    // Push the box out along the axis of shallowest penetration (box frame).
    const double c = std::cos(object_.theta), s = std::sin(object_.theta);
    const double dx = wrist->x() - object_.x, dy = wrist->y() - object_.y;
    const double bx = c * dx + s * dy, by = -s * dx + c * dy;
    const double px = 0.5 * shape.w - std::abs(bx);
    const double py = 0.5 * shape.h - std::abs(by);
    Vector2d dir_box;
    if (px <= py)
      dir_box = Vector2d{bx >= 0.0 ? -1.0 : 1.0, 0.0};
    else
      dir_box = Vector2d{0.0, by >= 0.0 ? -1.0 : 1.0};
    double depth = std::min(px, py);
    Vector2d dir_world{c * dir_box.x() - s * dir_box.y(),
                       s * dir_box.x() + c * dir_box.y()};
    force += params_.contact_stiffness * depth * dir_world;
  }

  const double half_h = 0.5 * shape.h;
  const bool on_table = object_.y - half_h <= config_.table_height + 1e-9;

  if (!on_table) {
    object_vel_.y() -= config_.gravity * dt;
    object_vel_ += (force / params_.box_mass) * dt;
    object_.x += object_vel_.x() * dt;
    object_.y += object_vel_.y() * dt;
    object_.theta = wrap_angle(object_.theta + object_omega_ * dt);
    if (object_.y - half_h < config_.table_height && object_vel_.y() < 0.0) {
      object_.y = config_.table_height + half_h;
      object_vel_.y() = 0.0;
      object_omega_ = 0.0;
    }
    return;
  }

  // Resting on the table: vertical support, Coulomb friction horizontally.
  object_.y = config_.table_height + half_h;
  object_vel_.y() = 0.0;
  object_omega_ = 0.0;
  const double normal = params_.box_mass * config_.gravity;
  const double fx = force.x();
  double vx = object_vel_.x();
  if (std::abs(vx) < 1e-12) {
    if (std::abs(fx) > params_.friction_static * normal) {
      double a = (fx - std::copysign(params_.friction_kinetic * normal, fx)) /
                 params_.box_mass;
      vx = a * dt;
    } else {
      vx = 0.0;
    }
  } else {
    double a = (fx - std::copysign(params_.friction_kinetic * normal, vx)) /
               params_.box_mass;
    double vx_new = vx + a * dt;
    vx = (vx_new * vx < 0.0) ? 0.0 : vx_new;  // friction stops, never reverses
  }
  object_vel_.x() = vx;
  object_.x += vx * dt;
}

StepResult Environment::step(const JointVec& action) {
  if (done_) throw ContractError("step: episode is done; call reset");
  StepResult result;

  if (!action.allFinite()) {
    done_ = true;
    result.done = true;
    result.fault = true;
    return result;
  }
  JointVec issued = action;
  for (int j = 0; j < kin::kNumJoints; ++j)
    issued[j] = std::clamp(issued[j], -1.0, 1.0);

  JointVec effective = issued;
  if (params_.action_delay > 0) {
    action_queue_.push_back(issued);
    effective = action_queue_.front();
    action_queue_.pop_front();
  }

  const kin::RobotModel& model = ref_->model;
  const JointVec target = model.denormalize_q(effective);
  const double dt = config_.dt;
  for (int j = 0; j < kin::kNumJoints; ++j) {
    double tau = params_.pd_scale * (model.kp[j] * (target[j] - q_[j]) -
                                     model.kd[j] * qd_[j]);
    tau = std::clamp(tau, -model.tau_max[j], model.tau_max[j]);
    tau_[j] = tau;
    qd_[j] = std::clamp(qd_[j] + tau * dt, -model.qd_max[j], model.qd_max[j]);
    q_[j] += qd_[j] * dt;
    if (q_[j] < model.q_lo[j]) {
      q_[j] = model.q_lo[j];
      qd_[j] = 0.0;
    } else if (q_[j] > model.q_hi[j]) {
      q_[j] = model.q_hi[j];
      qd_[j] = 0.0;
    }
  }

  const int total = static_cast<int>(
      ref_->variants[static_cast<std::size_t>(variant_)].size());
  frame_ = std::min(frame_ + 1, total - 1);
  steps_++;

  fk_ = kin::forward_kinematics(model, q_, root_);
  const Vector2d wrist_l = fk_.wrist_l.position();
  const Vector2d wrist_r = fk_.wrist_r.position();

  const bool was_attached = grasp_.attached;
  object_dynamics(wrist_l, wrist_r);

  if (!grasp_.attached) {
    Vector2d face_l = motion::box_face_midpoint(box(), object_, motion::BoxSide::kLeft);
    Vector2d face_r = motion::box_face_midpoint(box(), object_, motion::BoxSide::kRight);
    if ((wrist_l - face_l).norm() <= config_.grasp_attach_radius &&
        (wrist_r - face_r).norm() <= config_.grasp_attach_radius) {
      grasp_.attached = true;
      Vector2d mid = 0.5 * (wrist_l + wrist_r);
      Vector2d span = wrist_r - wrist_l;
      double heading = std::atan2(span.y(), span.x());
      double c = std::cos(heading), s = std::sin(heading);
      Vector2d d = object_.position() - mid;
      grasp_.offset = Vector2d{c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
      grasp_.rot_offset = wrap_angle(object_.theta - heading);
    }
  }
  result.events.attached = !was_attached && grasp_.attached;
  result.events.detached = was_attached && !grasp_.attached;

  a_prev_ = issued;
  assemble_state();

  // Termination: fall analog, runaway links, or motion completed.
  const RefFrame& rf = ref_frame();
  bool fault = std::abs(q_[kin::kTorsoPitch]) > config_.term_torso_pitch;
  if (!fault) {
    const auto links = fk_.link_positions();
    for (std::size_t i = 0; i < links.size(); ++i) {
      if ((links[i] - rf.link_pos[i]).norm() > config_.term_link_deviation) {
        fault = true;
        break;
      }
    }
  }
  result.fault = fault;
  result.completed = !fault && frame_ >= total - 1;
  result.done = fault || result.completed;
  done_ = result.done;
  return result;
}

void Environment::assemble_state() {
  const RefFrame& rf = ref_frame();
  state_.q = q_;
  state_.qd = qd_;
  state_.omega_root = 0.0;  // fixed-base root
  state_.g_proj = kin::gravity_projection(
      Pose2{root_.x, root_.y, root_.theta + q_[kin::kTorsoPitch]});
  state_.a_prev = a_prev_;
  state_.object_pos = object_.position();
  state_.object_vel = object_vel_;
  state_.object_rot = object_.theta;
  const Vector2d wrist_l = fk_.wrist_l.position();
  const Vector2d wrist_r = fk_.wrist_r.position();
  const double radius = ref_->model.wrist_contact_radius;
  state_.h_o = {
      motion::box_signed_distance(box(), object_, wrist_l) <= radius,
      motion::box_signed_distance(box(), object_, wrist_r) <= radius};
  state_.s_ig = build_interaction_graph(wrist_l, wrist_r, object_, box());
  state_.phase = rf.phase;
}

ImperfectState Environment::observe(const PerfectState& perfect) {
  return observe_imperfect(perfect, params_, rng_, obs_channel_);
}

}  // namespace hoi::sim

#include "hoi/rewards.hpp"

#include <cmath>

namespace hoi::rewards {

const std::array<const char*, kNumTerms> kTermNames = {
    "jp", "jv", "lp", "lr", "op", "or", "ig", "cm", "ar", "tq"};

RewardWeights RewardWeights::defaults() {
  RewardWeights w;
  w.values << 1.0, 0.1, 1.0, 0.3, 1.5, 0.5, 1.0, 0.5, 0.1, 0.05;
  return w;
}

void RewardWeights::validate() const {
  for (int k = 0; k < kNumTerms; ++k)
    if (!(values[k] >= 0.0))
      throw ConfigError(std::string("reward weight `") + kTermNames[static_cast<std::size_t>(k)] +
                        "` must be >= 0");
}

SubRewardVector compute_subrewards(const RewardContext& ctx, double theta_ig,
                                   const Sensitivities& c) {
  if (!ctx.state || !ctx.fk || !ctx.torque || !ctx.ref || !ctx.action ||
      !ctx.prev_action)
    throw ContractError("compute_subrewards: incomplete context");
  const sim::PerfectState& s = *ctx.state;
  const sim::RefFrame& ref = *ctx.ref;

  SubRewardVector r;

  const double e_jp = (s.q - ref.q).squaredNorm();
  r[kJp] = std::exp(-c.jp * e_jp);

  const double e_jv = (s.qd - ref.qd).squaredNorm();
  r[kJv] = std::exp(-c.jv * e_jv);

  const auto links = ctx.fk->link_positions();
  double e_lp = 0.0;
  for (std::size_t i = 0; i < links.size(); ++i)
    e_lp += (links[i] - ref.link_pos[i]).squaredNorm();
  r[kLp] = std::exp(-c.lp * e_lp);

  const auto headings = ctx.fk->link_headings();
  double e_lr = 0.0;
  for (std::size_t i = 0; i < headings.size(); ++i) {
    double d = wrap_angle(headings[i] - ref.link_heading[i]);
    e_lr += d * d;
  }
  r[kLr] = std::exp(-c.lr * e_lr);

  const double e_op = (s.object_pos - ref.object.position()).squaredNorm();
  r[kOp] = std::exp(-c.op * e_op);

  const double d_rot = wrap_angle(s.object_rot - ref.object.theta);
  r[kOr] = std::exp(-c.orot * d_rot * d_rot);

  const double e_ig = (s.s_ig - ref.s_ig).squaredNorm();
  r[kIg] = std::exp(-theta_ig * e_ig);

  const double e_cm = (s.h_o[0] != ref.contact[0] ? 1.0 : 0.0) +
                      (s.h_o[1] != ref.contact[1] ? 1.0 : 0.0);
  r[kCm] = std::exp(-c.cm * e_cm);

  r[kAr] = -(*ctx.action - *ctx.prev_action).squaredNorm();
  r[kTq] = -ctx.torque->squaredNorm() * 1e-4;

  return r;
}

double weighted_reward(const SubRewardVector& r, const RewardWeights& theta) {
  // Sequential accumulation in term order keeps this reproducible against
  // straight-line recomputation from logs.
  double f = 0.0;
  for (int k = 0; k < kNumTerms; ++k) f += r[k] * theta.values[k];
  return f;
}

const std::vector<std::string>& MetricsReport::column_names() {
  static const std::vector<std::string> cols = {
      "E_mpjpe", "E_mllpe", "E_mulpe", "E_m3lpe", "E_mope", "E_morae",
      "E_mige",  "E_mlrae", "e_jp",    "e_op",    "e_lp",   "success"};
  return cols;
}

std::vector<double> MetricsReport::to_row() const {
  return {e_mpjpe, e_mllpe, e_mulpe, e_m3lpe,      e_mope, e_morae,
          e_mige,  e_mlrae, e_jp,    e_op,         e_lp,   success ? 1.0 : 0.0};
}

MetricsReport tracking_errors(const std::vector<TrajPoint>& trajectory,
                              const std::vector<sim::RefFrame>& reference) {
  if (trajectory.empty())
    throw ContractError("tracking_errors: empty trajectory");
  MetricsReport m;
  const double n = static_cast<double>(trajectory.size());

  // Link indices within FkResult::link_positions():
  // 0 root, 1 torso_top, 2 l_elbow, 3 l_wrist, 4 r_elbow, 5 r_wrist.
  constexpr int kUpper[] = {1, 2, 3, 4, 5};
  constexpr int kThree[] = {1, 3, 5};

  for (const TrajPoint& p : trajectory) {
    if (p.frame < 0 || p.frame >= static_cast<int>(reference.size()))
      throw ContractError("tracking_errors: trajectory frame " +
                          std::to_string(p.frame) +
                          " is out of the reference range");
    const sim::RefFrame& ref = reference[static_cast<std::size_t>(p.frame)];

    double jp_abs = 0.0;
    for (int j = 0; j < kin::kNumJoints; ++j)
      jp_abs += std::abs(p.q[j] - ref.q[j]);
    m.e_mpjpe += jp_abs / kin::kNumJoints;

    m.e_mllpe += (p.link_pos[0] - ref.link_pos[0]).norm();

    double upper = 0.0;
    for (int i : kUpper)
      upper += (p.link_pos[static_cast<std::size_t>(i)] -
                ref.link_pos[static_cast<std::size_t>(i)]).norm();
    m.e_mulpe += upper / 5.0;

    double three = 0.0;
    for (int i : kThree)
      three += (p.link_pos[static_cast<std::size_t>(i)] -
                ref.link_pos[static_cast<std::size_t>(i)]).norm();
    m.e_m3lpe += three / 3.0;

    m.e_mope += (p.object_pos - ref.object.position()).norm();
    m.e_morae += std::abs(wrap_angle(p.object_rot - ref.object.theta));
    m.e_mige += (p.s_ig - ref.s_ig).squaredNorm() / sim::kIgDim;

    double lr = 0.0;
    for (std::size_t i = 0; i < p.link_heading.size(); ++i)
      lr += std::abs(wrap_angle(p.link_heading[i] - ref.link_heading[i]));
    m.e_mlrae += lr / static_cast<double>(p.link_heading.size());

    m.e_jp += (p.q - ref.q).squaredNorm();
    m.e_op += (p.object_pos - ref.object.position()).squaredNorm();
    double lp = 0.0;
    for (std::size_t i = 0; i < p.link_pos.size(); ++i)
      lp += (p.link_pos[i] - ref.link_pos[i]).squaredNorm();
    m.e_lp += lp;
  }

  m.e_mpjpe /= n;
  m.e_mllpe /= n;
  m.e_mulpe /= n;
  m.e_m3lpe /= n;
  m.e_mope /= n;
  m.e_morae /= n;
  m.e_mige /= n;
  m.e_mlrae /= n;
  m.e_jp /= n;
  m.e_op /= n;
  m.e_lp /= n;
  return m;
}

bool success(const EpisodeRecord& episode, const SuccessParams& params) {
  if (episode.fault || !episode.completed) return false;
  Vector2d dp = episode.final_object.position() - episode.goal_object.position();
  if (dp.norm() > params.pos_tol) return false;
  if (std::abs(wrap_angle(episode.final_object.theta -
                          episode.goal_object.theta)) > params.rot_tol)
    return false;
  if (episode.is_pick) {
    bool held_above = episode.final_attached &&
                      episode.final_object.y - 0.5 * episode.box_h >
                          episode.table_height + 1e-9;
    if (!held_above) return false;
  }
  return true;
}

}  // namespace hoi::rewards

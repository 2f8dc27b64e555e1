#include "hoi/metasac.hpp"

#include <algorithm>
#include <cmath>

namespace hoi::metasac {

using Eigen::MatrixXd;
using nnkit::ForwardCache;
using nnkit::net_backward;
using nnkit::net_forward;

double sigma_schedule(int t, double c4, double delta) {
  if (delta < 0.0 || delta > 1.0)
    throw ConfigError("sigma_schedule: delta must be in [0, 1]");
  if (t < 0) throw ContractError("sigma_schedule: t must be >= 0");
  if (t == 0) return delta;  // documented boundary
  return std::clamp(1.0 - c4 / static_cast<double>(t), delta, 1.0);
}

rewards::RewardWeights apply_weights(const rewards::RewardWeights& theta0,
                                     double sigma, const VectorXd& action,
                                     double span, WeightRule rule) {
  theta0.validate();
  if (action.size() != kK)
    throw ContractError("apply_weights: action must have K entries");
  if (span <= 0.0 || span > 1.0)
    throw ConfigError("apply_weights: span must be in (0, 1]");
  rewards::RewardWeights out;
  for (int k = 0; k < kK; ++k) {
    double v = rule == WeightRule::kModulate
                   ? theta0[k] * (1.0 + sigma * span * action[k])
                   : theta0[k] * sigma * action[k];
    out[k] = std::max(0.0, v);
  }
  return out;
}

double meta_reward(const Eigen::Vector3d& e_prev, const Eigen::Vector3d& e_cur,
                   double dt) {
  if (dt <= 0.0) throw ContractError("meta_reward: dt must be > 0");
  return -(e_cur.sum() - e_prev.sum()) / dt;
}

VectorXd build_meta_state(const std::vector<EpochStats>& window,
                          const rewards::RewardWeights& theta,
                          const rewards::RewardWeights& theta0,
                          double progress) {
  if (window.empty()) throw ContractError("build_meta_state: empty window");
  double e_jp = 0, e_op = 0, e_lp = 0, len_frac = 0, phase = 0;
  rewards::SubRewardVector sub = rewards::SubRewardVector::Zero();
  for (const EpochStats& s : window) {
    e_jp += s.e_jp;
    e_op += s.e_op;
    e_lp += s.e_lp;
    sub += s.subrewards;
    len_frac += s.ep_len_frac;
    phase += s.phase_reached;
  }
  const double n = static_cast<double>(window.size());
  VectorXd u(kMetaStateDim);
  int i = 0;
  u[i++] = e_jp / n;
  u[i++] = e_op / n;
  u[i++] = e_lp / n;
  for (int k = 0; k < kK; ++k) u[i++] = sub[k] / n;
  for (int k = 0; k < kK; ++k) {
    double scale = theta0[k] > 0.0 ? 1.0 / (2.0 * theta0[k]) : 1.0;
    u[i++] = theta[k] * scale;
  }
  u[i++] = progress;
  u[i++] = len_frac / n;
  u[i++] = phase / n;
  if (!u.allFinite()) throw NumericalFault("build_meta_state: non-finite");
  return u;
}

void MetaConfig::validate() const {
  if (lr <= 0) throw ConfigError("meta: lr must be > 0");
  if (gamma <= 0 || gamma > 1) throw ConfigError("meta: gamma must be in (0, 1]");
  if (tau <= 0 || tau >= 1) throw ConfigError("meta: tau must be in (0, 1)");
  if (alpha < 0) throw ConfigError("meta: alpha must be >= 0");
  if (batch < 1) throw ConfigError("meta: batch must be >= 1");
  if (updates_per_subtask < 0) throw ConfigError("meta: updates must be >= 0");
  if (action_span <= 0 || action_span > 1)
    throw ConfigError("meta: action span must be in (0, 1]");
  if (delta < 0 || delta > 1) throw ConfigError("meta: delta must be in [0, 1]");
  if (subtask_epochs < 1) throw ConfigError("meta: N must be >= 1");
}

MetaNets::MetaNets(const std::vector<int>& hidden, double lr,
                   double init_log_std, Rng& rng) {
  policy_spec = {kMetaStateDim, hidden, kK, nnkit::Activation::kTanh,
                 nnkit::OutputHead::kTanhGaussian};
  q_spec = {kMetaStateDim + kK, hidden, 1, nnkit::Activation::kTanh,
            nnkit::OutputHead::kLinear};
  policy = nnkit::make_params(policy_spec, rng);
  nnkit::set_log_std_bias(policy_spec, policy, init_log_std);
  q1 = nnkit::make_params(q_spec, rng);
  q2 = nnkit::make_params(q_spec, rng);
  q1_target = q1;
  q2_target = q2;
  policy_opt = nnkit::make_opt(policy, lr);
  q1_opt = nnkit::make_opt(q1, lr);
  q2_opt = nnkit::make_opt(q2, lr);
}

nnkit::GaussianSample MetaNets::sample(const VectorXd& u, Rng& rng) const {
  VectorXd out = net_forward(policy_spec, policy, u);
  return nnkit::sample_head(nnkit::OutputHead::kTanhGaussian, out.head(kK),
                            out.tail(kK), rng);
}

VectorXd MetaNets::mean_action(const VectorXd& u) const {
  VectorXd out = net_forward(policy_spec, policy, u);
  return nnkit::mean_action(nnkit::OutputHead::kTanhGaussian, out.head(kK));
}

namespace {

void polyak(nnkit::ParamSet& target, const nnkit::ParamSet& main, double tau) {
  for (std::size_t i = 0; i < target.values.size(); ++i)
    target.values[i] = (1.0 - tau) * target.values[i] + tau * main.values[i];
  target.revision++;
}

}  // namespace

SacReport sac_update(MetaNets& nets, const std::vector<SubtaskRecord>& buffer,
                     const MetaConfig& config, Rng& rng) {
  config.validate();
  SacReport report;
  const int B = config.batch;
  if (static_cast<int>(buffer.size()) < B) {
    report.skipped = true;
    return report;
  }

  std::vector<int> idx(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b)
    idx[static_cast<std::size_t>(b)] = static_cast<int>(
        rng.uniform_int(static_cast<std::uint64_t>(buffer.size())));

  const int ud = kMetaStateDim, ad = kK;

  // ---- critic targets: y = g + gamma (1-done) (min Q_target - alpha logp') --
  MatrixXd next_in(ud, B);
  for (int b = 0; b < B; ++b)
    next_in.col(b) = buffer[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])].u_next;
  ForwardCache pol_cache;
  const MatrixXd& next_out =
      net_forward(nets.policy_spec, nets.policy, next_in, pol_cache);
  MatrixXd qt_in(ud + ad, B);
  VectorXd next_logp(B);
  for (int b = 0; b < B; ++b) {
    VectorXd mean = next_out.col(b).head(ad);
    VectorXd log_std = next_out.col(b).tail(ad);
    nnkit::GaussianSample s =
        nnkit::sample_head(nnkit::OutputHead::kTanhGaussian, mean, log_std, rng);
    qt_in.col(b).head(ud) = next_in.col(b);
    qt_in.col(b).tail(ad) = s.action;
    next_logp[b] = s.log_prob;
  }
  ForwardCache qt1_cache, qt2_cache;
  const MatrixXd q1t = net_forward(nets.q_spec, nets.q1_target, qt_in, qt1_cache);
  const MatrixXd q2t = net_forward(nets.q_spec, nets.q2_target, qt_in, qt2_cache);

  VectorXd y(B);
  MatrixXd q_in(ud + ad, B);
  for (int b = 0; b < B; ++b) {
    const SubtaskRecord& r = buffer[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
    double qmin = std::min(q1t(0, b), q2t(0, b));
    double not_done = r.done ? 0.0 : 1.0;
    y[b] = r.g + config.gamma * not_done * (qmin - config.alpha * next_logp[b]);
    q_in.col(b).head(ud) = r.u;
    q_in.col(b).tail(ad) = r.action;
  }

  ForwardCache q1_cache, q2_cache;
  for (auto* net : {&nets.q1, &nets.q2}) {
    ForwardCache& cache = net == &nets.q1 ? q1_cache : q2_cache;
    const MatrixXd q = net_forward(nets.q_spec, *net, q_in, cache);
    MatrixXd grad(1, B);
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
      double err = q(0, b) - y[b];
      loss += err * err;
      grad(0, b) = 2.0 * err / B;
    }
    loss /= B;
    net_backward(nets.q_spec, *net, cache, grad);
    if (net == &nets.q1) {
      nnkit::opt_step(nets.q1, nets.q1.grads, nets.q1_opt);
      report.q1_loss = loss;
    } else {
      nnkit::opt_step(nets.q2, nets.q2.grads, nets.q2_opt);
      report.q2_loss = loss;
    }
  }

  // ---- policy: minimize mean(alpha logpi - min Q(u, a(xi))) ----
  MatrixXd u_in(ud, B);
  for (int b = 0; b < B; ++b)
    u_in.col(b) = buffer[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])].u;
  ForwardCache pol2_cache;
  const MatrixXd& pol_out =
      net_forward(nets.policy_spec, nets.policy, u_in, pol2_cache);
  MatrixXd xi(ad, B), z(ad, B), act_in(ud + ad, B);
  VectorXd logp(B);
  for (int b = 0; b < B; ++b) {
    VectorXd mean = pol_out.col(b).head(ad);
    VectorXd log_std = pol_out.col(b).tail(ad);
    double lp = 0.0;
    for (int k = 0; k < ad; ++k) {
      double s = std::exp(log_std[k]);
      double x = rng.normal();
      xi(k, b) = x;
      double zz = mean[k] + s * x;
      z(k, b) = zz;
      lp += -0.5 * x * x - log_std[k] - 0.5 * std::log(2.0 * kPi) -
            nnkit::log_one_minus_tanh_sq(zz);
      act_in.col(b)[ud + k] = std::tanh(zz);
    }
    act_in.col(b).head(ud) = u_in.col(b);
    logp[b] = lp;
  }

  ForwardCache pq1_cache, pq2_cache;
  const MatrixXd pq1 = net_forward(nets.q_spec, nets.q1, act_in, pq1_cache);
  const MatrixXd pq2 = net_forward(nets.q_spec, nets.q2, act_in, pq2_cache);

  // dQ/d(action) via the per-sample argmin critic's input gradient.
  MatrixXd sel1 = MatrixXd::Zero(1, B), sel2 = MatrixXd::Zero(1, B);
  for (int b = 0; b < B; ++b)
    (pq1(0, b) <= pq2(0, b) ? sel1 : sel2)(0, b) = 1.0;
  MatrixXd in_grad1 = net_backward(nets.q_spec, nets.q1, pq1_cache, sel1);
  MatrixXd in_grad2 = net_backward(nets.q_spec, nets.q2, pq2_cache, sel2);

  MatrixXd pol_grad = MatrixXd::Zero(2 * ad, B);
  double policy_loss = 0.0;
  for (int b = 0; b < B; ++b) {
    double qmin = std::min(pq1(0, b), pq2(0, b));
    policy_loss += (config.alpha * logp[b] - qmin) / B;
    const MatrixXd& in_grad = pq1(0, b) <= pq2(0, b) ? in_grad1 : in_grad2;
    VectorXd log_std = pol_out.col(b).tail(ad);
    for (int k = 0; k < ad; ++k) {
      double sigma = std::exp(log_std[k]);
      double th = std::tanh(z(k, b));
      double dtanh = 1.0 - th * th;
      double qg = in_grad(ud + k, b);
      double dlogp_dmu = 2.0 * th;
      double dlogp_dls = -1.0 + 2.0 * th * xi(k, b) * sigma;
      pol_grad(k, b) = (config.alpha * dlogp_dmu - qg * dtanh) / B;
      pol_grad(ad + k, b) =
          (config.alpha * dlogp_dls - qg * dtanh * xi(k, b) * sigma) / B;
    }
  }
  net_backward(nets.policy_spec, nets.policy, pol2_cache, pol_grad);
  nnkit::opt_step(nets.policy, nets.policy.grads, nets.policy_opt);

  polyak(nets.q1_target, nets.q1, config.tau);
  polyak(nets.q2_target, nets.q2, config.tau);

  report.policy_loss = policy_loss;
  report.entropy = -logp.mean();
  return report;
}

OuterLoop::OuterLoop(const rewards::RewardWeights& theta0,
                     const MetaConfig& config, Rng rng)
    : theta0_(theta0), current_(theta0), config_(config), rng_(rng) {
  config_.validate();
  theta0_.validate();
  nets_ = MetaNets(config_.hidden, config_.lr, config_.init_log_std, rng_);
}

rewards::RewardWeights OuterLoop::step(int epoch,
                                       const std::vector<EpochStats>& window,
                                       double progress, bool final_boundary) {
  VectorXd u = build_meta_state(window, current_, theta0_, progress);
  Eigen::Vector3d errors{u[0], u[1], u[2]};
  boundaries_++;

  BoundaryLog log;
  log.subtask = boundaries_;
  log.epoch = epoch;

  if (record_open_) {
    open_record_.g = meta_reward(prev_errors_, errors, 1.0);
    open_record_.u_next = u;
    open_record_.done = final_boundary;
    log.g = open_record_.g;
    buffer_.push_back(open_record_);
    record_open_ = false;
  }
  prev_errors_ = errors;

  bool ran = false;
  for (int i = 0; i < config_.updates_per_subtask; ++i) {
    SacReport r = sac_update(nets_, buffer_, config_, rng_);
    ran = ran || !r.skipped;
  }
  log.sac_ran = ran;

  if (!final_boundary) {
    nnkit::GaussianSample s = nets_.sample(u, rng_);
    double sigma = sigma_schedule(epoch, config_.c4, config_.delta);
    current_ = apply_weights(theta0_, sigma, s.action, config_.action_span,
                             config_.rule);
    open_record_.u = u;
    open_record_.action = s.action;
    open_record_.pre_tanh = s.pre_tanh;
    open_record_.theta_applied = current_;
    record_open_ = true;
    log.sigma = sigma;
    log.action = s.action;
    log.theta = current_;
  } else {
    log.sigma = sigma_schedule(epoch, config_.c4, config_.delta);
    log.action = VectorXd::Zero(kK);
    log.theta = current_;
  }
  logs_.push_back(log);
  return current_;
}

}  // namespace hoi::metasac

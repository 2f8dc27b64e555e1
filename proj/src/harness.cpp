#include "hoi/harness.hpp"

#include <chrono>
#include <filesystem>
#include <optional>

namespace hoi::harness {

namespace fs = std::filesystem;
using Eigen::VectorXd;
using kin::JointVec;

std::vector<std::string> event_log_columns() {
  std::vector<std::string> cols = {"epoch",     "policy_loss", "value_loss",
                                   "clip_frac", "mean_f_t",    "e_jp",
                                   "e_op",      "e_lp",        "sigma"};
  for (int k = 0; k < rewards::kNumTerms; ++k)
    cols.push_back("theta_" + std::to_string(k + 1));
  return cols;
}

motion::MotionSet prepare_motions(const RunConfig& config) {
  if (!config.motions.empty()) {
    motion::MotionSet set = motion::load_motion_or_set(config.motions);
    for (const auto& v : set.variants)
      if (v.motion.dt != config.sim.dt)
        throw ConfigError("motions: dt " + fmt_double(v.motion.dt) +
                          " does not match sim.dt " + fmt_double(config.sim.dt));
    return set;
  }
  if (config.gen.table_height != config.sim.table_height)
    throw ConfigError("config: gen.table_height must match sim.table_height");
  motion::HoiMotion anchor = motion::generate_reference(
      motion::task_from_string(config.task), config.gen, config.robot,
      config.seed);
  return motion::augment_motion(anchor, config.robot, config.augment);
}

namespace {

// One evaluation episode from phase 0 of the given variant. The expert mode
// replays the reference joint targets open loop.
rewards::MetricsReport run_episode(sim::Environment& env,
                                   const ppo::PolicyPair* policy,
                                   const RunConfig& config, int variant,
                                   bool deterministic, bool expert,
                                   Rng& action_rng) {
  env.reset_to(variant, 0);
  std::vector<rewards::TrajPoint> traj;
  traj.reserve(static_cast<std::size_t>(env.frames_total()));
  bool fault = false;
  bool completed = false;
  const kin::RobotModel& model = env.model();

  const int cap = env.frames_total() + 8;
  for (int step = 0; step < cap && !env.episode_done(); ++step) {
    JointVec action;
    if (expert) {
      int next = std::min(env.frame_index() + 1, env.frames_total() - 1);
      action = model.normalize_q(env.ref_frame_at(next).q);
    } else {
      sim::ImperfectState im = env.observe(env.state());
      VectorXd out = policy->actor_forward(im.flatten(config.sim.qd_scale));
      const int d = kin::kNumJoints;
      if (deterministic) {
        VectorXd a =
            nnkit::mean_action(nnkit::OutputHead::kTanhGaussian, out.head(d));
        for (int j = 0; j < d; ++j) action[j] = a[j];
      } else {
        nnkit::GaussianSample s = nnkit::sample_head(
            nnkit::OutputHead::kTanhGaussian, out.head(d), out.tail(d),
            action_rng);
        for (int j = 0; j < d; ++j) action[j] = s.action[j];
      }
    }
    sim::StepResult sr = env.step(action);
    rewards::TrajPoint p;
    p.q = env.state().q;
    p.link_pos = env.fk().link_positions();
    p.link_heading = env.fk().link_headings();
    p.object_pos = env.state().object_pos;
    p.object_rot = env.state().object_rot;
    p.s_ig = env.state().s_ig;
    p.frame = env.frame_index();
    traj.push_back(p);
    fault = fault || sr.fault;
    completed = completed || sr.completed;
  }

  rewards::MetricsReport metrics =
      rewards::tracking_errors(traj, env.ref_frames());

  rewards::EpisodeRecord record;
  record.fault = fault;
  record.completed = completed;
  record.final_object = kin::Pose2{env.state().object_pos.x(),
                                   env.state().object_pos.y(),
                                   env.state().object_rot};
  const sim::RefFrame& goal = env.ref_frame_at(env.frames_total() - 1);
  record.goal_object = goal.object;
  record.final_attached = env.grasp_attached();
  record.table_height = config.sim.table_height;
  record.box_h = env.box().h;
  record.is_pick = motion::task_from_string(config.task) == motion::Task::kBoxPick;
  metrics.success = rewards::success(record, config.success);
  return metrics;
}

EvalResult evaluate_with_ref(const RunConfig& config,
                             std::shared_ptr<const sim::RefData> ref,
                             const ppo::PolicyPair* policy,
                             const EvalOptions& options,
                             const std::string& csv_path) {
  if (!options.expert && policy == nullptr)
    throw ContractError("evaluate: policy required unless expert mode");

  sim::EnvParams params = config.env;
  sim::DrRanges ranges = config.dr;
  if (!options.degrade_obs) {
    params.obs_noise_std = 0.0;
    params.obs_latency = 0;
    params.obs_dropout = 0.0;
    params.action_delay = 0;
    ranges.obs_noise_lo = ranges.obs_noise_hi = 0.0;
    ranges.latency_lo = ranges.latency_hi = 0;
    ranges.dropout_lo = ranges.dropout_hi = 0.0;
    ranges.delay_lo = ranges.delay_hi = 0;
  }
  sim::Environment env(ref, config.sim, params, ranges, options.use_dr,
                       Rng::derive(options.seed, "eval-env"));
  Rng action_rng = Rng::derive(options.seed, "eval-action");

  EvalResult result;
  const int variants = static_cast<int>(ref->variants.size());
  std::optional<CsvWriter> csv;
  if (!csv_path.empty()) {
    std::vector<std::string> cols = {"episode", "variant"};
    for (const std::string& c : rewards::MetricsReport::column_names())
      cols.push_back(c);
    csv.emplace(csv_path, cols);
  }
  for (int ep = 0; ep < options.episodes; ++ep) {
    int variant = ep % variants;
    rewards::MetricsReport m =
        run_episode(env, policy, config, variant, options.deterministic,
                    options.expert, action_rng);
    result.episodes.push_back(m);
    if (m.success) result.successes++;
    if (csv) {
      std::vector<double> row = {static_cast<double>(ep),
                                 static_cast<double>(variant)};
      for (double v : m.to_row()) row.push_back(v);
      csv->write_row(row);
    }
  }
  const double n = static_cast<double>(options.episodes);
  rewards::MetricsReport& agg = result.aggregate;
  for (const rewards::MetricsReport& m : result.episodes) {
    agg.e_mpjpe += m.e_mpjpe / n;
    agg.e_mllpe += m.e_mllpe / n;
    agg.e_mulpe += m.e_mulpe / n;
    agg.e_m3lpe += m.e_m3lpe / n;
    agg.e_mope += m.e_mope / n;
    agg.e_morae += m.e_morae / n;
    agg.e_mige += m.e_mige / n;
    agg.e_mlrae += m.e_mlrae / n;
    agg.e_jp += m.e_jp / n;
    agg.e_op += m.e_op / n;
    agg.e_lp += m.e_lp / n;
  }
  agg.success = result.successes == options.episodes;
  result.success_rate = result.successes / n;
  return result;
}

}  // namespace

EvalResult evaluate(const RunConfig& config, const motion::MotionSet& motions,
                    const ppo::PolicyPair* policy, const EvalOptions& options,
                    const std::string& csv_path) {
  auto ref = sim::RefData::build(motions, config.robot);
  return evaluate_with_ref(config, ref, policy, options, csv_path);
}

EvalResult evaluate_run(const std::string& run_dir, const std::string& which,
                        const EvalOptions& options,
                        const std::string& csv_path) {
  RunPaths paths{run_dir};
  RunConfig config = load_config(paths.config());
  config.resolve();
  motion::MotionSet motions = motion::load_motion_set(paths.motions());
  ppo::PolicyPair policy;
  if (!options.expert) {
    std::string actor = which == "best" ? paths.actor_best() : paths.actor_latest();
    std::string critic = which == "best" ? paths.critic_best() : paths.critic_latest();
    policy.load(actor, critic);
  }
  return evaluate(config, motions, options.expert ? nullptr : &policy, options,
                  csv_path);
}

TrainResult train(RunConfig config) {
  const auto t_start = std::chrono::steady_clock::now();
  config.resolve();
  RunPaths paths{config.out_dir};
  fs::create_directories(paths.dir);
  save_config(config, paths.config());

  motion::MotionSet motions = prepare_motions(config);
  motion::save_motion_set(motions, paths.motions(), config.augment);
  auto ref = sim::RefData::build(std::move(motions), config.robot);

  // Rollout workers, each with a private stream and a DR draw logger.
  CsvWriter dr_csv(paths.dr_log(),
                   {"episode", "env", "variant", "start_frame", "box_mass",
                    "friction_static", "friction_kinetic", "pd_scale",
                    "obs_noise_std", "obs_latency", "obs_dropout",
                    "action_delay"});
  long episode_counter = 0;
  std::vector<sim::Environment> envs;
  envs.reserve(static_cast<std::size_t>(config.inner.num_envs));
  for (int e = 0; e < config.inner.num_envs; ++e) {
    envs.emplace_back(ref, config.sim, config.env, config.dr, config.dr_enabled,
                      Rng::derive(config.seed, "env", static_cast<std::uint64_t>(e)));
    envs.back().on_reset = [&dr_csv, &episode_counter, e](
                               const sim::EnvParams& p, int variant, int frame) {
      dr_csv.write_row({static_cast<double>(episode_counter++),
                        static_cast<double>(e), static_cast<double>(variant),
                        static_cast<double>(frame), p.box_mass,
                        p.friction_static, p.friction_kinetic, p.pd_scale,
                        p.obs_noise_std, static_cast<double>(p.obs_latency),
                        p.obs_dropout, static_cast<double>(p.action_delay)});
    };
  }

  Rng policy_rng = Rng::derive(config.seed, "policy-init");
  ppo::PolicyPair policy(config.inner_hidden, config.inner.lr,
                         config.inner.init_log_std, policy_rng);
  Rng action_rng = Rng::derive(config.seed, "action");
  Rng shuffle_rng = Rng::derive(config.seed, "shuffle");

  std::optional<metasac::OuterLoop> outer;
  if (config.outer_enabled)
    outer.emplace(config.weights, config.outer, Rng::derive(config.seed, "meta"));

  rewards::RewardWeights theta = config.weights;
  double sigma_active = 0.0;

  CsvWriter event_csv(paths.event_log(), event_log_columns());
  CsvWriter eval_csv(paths.eval_log(),
                     {"epoch", "e_jp", "e_op", "e_lp", "score", "success_rate"});

  const int n_variants = static_cast<int>(ref->variants.size());
  EvalOptions eval_opts;
  eval_opts.episodes = n_variants;
  eval_opts.deterministic = true;
  eval_opts.use_dr = false;
  eval_opts.degrade_obs = false;
  eval_opts.seed = splitmix64(config.seed ^ 0x5EEDull);

  auto run_eval = [&](int epoch) {
    EvalResult r = evaluate_with_ref(config, ref, &policy, eval_opts, "");
    double score = r.aggregate.e_jp + r.aggregate.e_op + r.aggregate.e_lp;
    eval_csv.write_row({static_cast<double>(epoch), r.aggregate.e_jp,
                        r.aggregate.e_op, r.aggregate.e_lp, score,
                        r.success_rate});
    eval_csv.flush();
    return score;
  };

  TrainResult result;
  result.paths = paths;
  result.initial_eval_score = run_eval(0);
  result.best_eval_score = result.initial_eval_score;
  policy.save(paths.actor_best(), paths.critic_best());

  std::vector<metasac::EpochStats> history;
  history.reserve(static_cast<std::size_t>(config.total_epochs));
  double last_len_frac = 1.0;
  double last_phase = 0.0;
  const int n_boundary =
      (config.total_epochs / config.outer.subtask_epochs) *
      config.outer.subtask_epochs;  // last full subtask boundary

  for (int epoch = 1; epoch <= config.total_epochs; ++epoch) {
    ppo::RolloutBuffer buffer = ppo::collect_rollouts(
        policy, envs, config.inner.horizon, theta, action_rng, config.inner);
    ppo::AdvantageResult adv =
        config.inner.mc_advantage
            ? ppo::mc_advantages(buffer, config.inner.gamma)
            : ppo::gae_advantages(buffer, config.inner.gamma,
                                  config.inner.lambda);
    ppo::LossReport losses =
        ppo::ppo_update(policy, buffer, adv, config.inner, shuffle_rng);

    metasac::EpochStats stats;
    stats.e_jp = buffer.mean_e_jp;
    stats.e_op = buffer.mean_e_op;
    stats.e_lp = buffer.mean_e_lp;
    stats.subrewards = buffer.mean_subrewards;
    if (buffer.episodes_ended > 0) {
      last_len_frac = buffer.ep_len_frac_sum / buffer.episodes_ended;
      last_phase = buffer.phase_reached_sum / buffer.episodes_ended;
    }
    stats.ep_len_frac = last_len_frac;
    stats.phase_reached = last_phase;
    history.push_back(stats);

    std::vector<double> row = {static_cast<double>(epoch), losses.policy_loss,
                               losses.value_loss,          losses.clip_fraction,
                               buffer.mean_f,              stats.e_jp,
                               stats.e_op,                 stats.e_lp,
                               sigma_active};
    for (int k = 0; k < rewards::kNumTerms; ++k) row.push_back(theta[k]);
    event_csv.write_row(row);

    if (outer && epoch % config.outer.subtask_epochs == 0) {
      std::vector<metasac::EpochStats> window(
          history.end() - config.outer.subtask_epochs, history.end());
      const bool final_boundary = epoch == n_boundary;
      theta = outer->step(epoch, window,
                          static_cast<double>(epoch) / config.total_epochs,
                          final_boundary);
      sigma_active = outer->logs().back().sigma;
    }

    if (epoch % config.eval_every == 0 || epoch == config.total_epochs) {
      double score = run_eval(epoch);
      result.final_eval_score = score;
      if (score < result.best_eval_score) {
        result.best_eval_score = score;
        policy.save(paths.actor_best(), paths.critic_best());
      }
      event_csv.flush();
    }
  }

  policy.save(paths.actor_latest(), paths.critic_latest());
  if (outer) {
    nnkit::save_net(paths.meta_policy(), outer->nets().policy_spec,
                    outer->nets().policy);
    nnkit::save_net(paths.meta_q1(), outer->nets().q_spec, outer->nets().q1);
    nnkit::save_net(paths.meta_q2(), outer->nets().q_spec, outer->nets().q2);

    std::vector<std::string> cols = {"subtask", "sigma"};
    for (int k = 0; k < rewards::kNumTerms; ++k)
      cols.push_back("a_" + std::to_string(k + 1));
    for (int k = 0; k < rewards::kNumTerms; ++k)
      cols.push_back("theta_" + std::to_string(k + 1));
    cols.push_back("G");
    CsvWriter meta_csv(paths.meta_log(), cols);
    for (const metasac::BoundaryLog& log : outer->logs()) {
      std::vector<double> mrow = {static_cast<double>(log.subtask), log.sigma};
      for (int k = 0; k < rewards::kNumTerms; ++k)
        mrow.push_back(log.action.size() == rewards::kNumTerms ? log.action[k]
                                                               : 0.0);
      for (int k = 0; k < rewards::kNumTerms; ++k) mrow.push_back(log.theta[k]);
      mrow.push_back(log.g);
      meta_csv.write_row(mrow);
    }
  }

  result.epochs = config.total_epochs;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return result;
}

std::vector<nnkit::NetSpec> configured_net_specs(const RunConfig& config) {
  std::vector<nnkit::NetSpec> specs;
  specs.push_back({sim::ImperfectState::kFlatDim, config.inner_hidden,
                   kin::kNumJoints, nnkit::Activation::kTanh,
                   nnkit::OutputHead::kTanhGaussian});
  specs.push_back({sim::PerfectState::kFlatDim, config.inner_hidden, 1,
                   nnkit::Activation::kTanh, nnkit::OutputHead::kLinear});
  specs.push_back({metasac::kMetaStateDim, config.outer.hidden, metasac::kK,
                   nnkit::Activation::kTanh, nnkit::OutputHead::kTanhGaussian});
  specs.push_back({metasac::kMetaStateDim + metasac::kK, config.outer.hidden, 1,
                   nnkit::Activation::kTanh, nnkit::OutputHead::kLinear});
  return specs;
}

GradCheckSummary run_grad_check(const RunConfig& config, double tol,
                                std::uint64_t seed) {
  GradCheckSummary summary;
  int idx = 0;
  for (const nnkit::NetSpec& spec : configured_net_specs(config)) {
    Rng rng = Rng::derive(seed, "grad-check", static_cast<std::uint64_t>(idx++));
    nnkit::ParamSet params = nnkit::make_params(spec, rng);
    VectorXd input(spec.input_dim);
    for (int i = 0; i < spec.input_dim; ++i) input[i] = rng.uniform(-1, 1);
    nnkit::GradCheckReport report = nnkit::grad_check(spec, params, input, tol);
    summary.entries.push_back({spec, report});
    summary.pass = summary.pass && report.pass;
    summary.max_rel_err = std::max(summary.max_rel_err, report.max_rel_err);
  }
  return summary;
}

}  // namespace hoi::harness

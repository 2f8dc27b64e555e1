#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hoi/config.hpp"

namespace hoi::harness {

// Fixed artifact layout inside a run directory.
struct RunPaths {
  std::string dir;
  std::string config() const { return dir + "/config.cfg"; }
  std::string motions() const { return dir + "/motions"; }
  std::string event_log() const { return dir + "/event_log.csv"; }
  std::string meta_log() const { return dir + "/meta_log.csv"; }
  std::string eval_log() const { return dir + "/eval_log.csv"; }
  std::string dr_log() const { return dir + "/dr_log.csv"; }
  std::string actor_latest() const { return dir + "/actor_latest.irnk"; }
  std::string critic_latest() const { return dir + "/critic_latest.irnk"; }
  std::string actor_best() const { return dir + "/actor_best.irnk"; }
  std::string critic_best() const { return dir + "/critic_best.irnk"; }
  std::string meta_policy() const { return dir + "/meta_policy_latest.irnk"; }
  std::string meta_q1() const { return dir + "/meta_q1_latest.irnk"; }
  std::string meta_q2() const { return dir + "/meta_q2_latest.irnk"; }
};

std::vector<std::string> event_log_columns();

// Prepares the motion set for a config: loads run.motions when set,
// otherwise generates the task reference and augments it.
motion::MotionSet prepare_motions(const RunConfig& config);

struct TrainResult {
  RunPaths paths;
  double initial_eval_score = 0.0;  // e_jp + e_op + e_lp before training
  double final_eval_score = 0.0;
  double best_eval_score = 0.0;
  double wall_seconds = 0.0;
  int epochs = 0;
};

// Runs T_total inner epochs with outer-loop boundaries every N, periodic
// deterministic evaluation, checkpointing, and CSV logs. Fully determined
// by (config, seed).
TrainResult train(RunConfig config);

struct EvalOptions {
  int episodes = 100;
  bool deterministic = true;
  bool use_dr = false;          // nominal DR ranges when enabled
  bool degrade_obs = false;     // apply env.obs_* channel during evaluation
  std::uint64_t seed = 1;
  bool expert = false;          // open-loop reference replay instead of policy
};

struct EvalResult {
  rewards::MetricsReport aggregate;  // means over episodes
  std::vector<rewards::MetricsReport> episodes;
  int successes = 0;
  double success_rate = 0.0;
};

// Episode-wise evaluation: episode i runs variant (i mod V) from phase 0.
EvalResult evaluate(const RunConfig& config, const motion::MotionSet& motions,
                    const ppo::PolicyPair* policy, const EvalOptions& options,
                    const std::string& csv_path = "");

// Convenience wrapper: loads the run config + checkpoint from a run
// directory and evaluates against the stored motions.
EvalResult evaluate_run(const std::string& run_dir, const std::string& which,
                        const EvalOptions& options,
                        const std::string& csv_path = "");

// Network shapes the current configuration puts in play (actor, critic,
// meta policy, meta critics), for gradient checking.
std::vector<nnkit::NetSpec> configured_net_specs(const RunConfig& config);

struct GradCheckSummary {
  struct Entry {
    nnkit::NetSpec spec;
    nnkit::GradCheckReport report;
  };
  std::vector<Entry> entries;
  bool pass = true;
  double max_rel_err = 0.0;
};

GradCheckSummary run_grad_check(const RunConfig& config, double tol = 1e-4,
                                std::uint64_t seed = 1234);

}  // namespace hoi::harness

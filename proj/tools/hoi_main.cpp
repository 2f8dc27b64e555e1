// Command-line front end: gen-ref, verify, augment, train, eval, plot,
// grad-check. Exit codes: 0 ok, 2 config error, 3 verification failure,
// 4 numerical fault, 1 anything else.
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hoi/harness.hpp"
#include "hoi/plot.hpp"

using namespace hoi;

namespace {

harness::RunConfig build_config(const std::string& config_path,
                                const std::vector<std::string>& sets) {
  harness::RunConfig config;
  if (!config_path.empty()) config = harness::load_config(config_path);
  for (const std::string& kv : sets) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got `" + kv + "`");
    harness::apply_kv(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

void print_metrics(const rewards::MetricsReport& m) {
  const auto& names = rewards::MetricsReport::column_names();
  const auto row = m.to_row();
  for (std::size_t i = 0; i + 1 < names.size(); ++i)  // success printed by caller
    std::printf("  %-8s %s\n", names[i].c_str(), fmt_double(row[i]).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar human-object-interaction imitation trainer"};
  app.fallthrough(true);
  app.require_subcommand(0, 1);

  std::string config_path;
  std::vector<std::string> sets;
  bool dump_defaults = false;
  app.add_option("--config", config_path, "configuration file");
  app.add_option("--set", sets, "override a config key (key=value)");
  app.add_flag("--dump-default-config", dump_defaults,
               "print the full default configuration and exit");

  // gen-ref
  auto* gen = app.add_subcommand("gen-ref", "generate a reference motion");
  std::string gen_out = "motion.json";
  gen->add_option("--out", gen_out, "output motion file");

  // verify
  auto* verify = app.add_subcommand("verify", "verify a motion file");
  std::string verify_motion;
  verify->add_option("--motion", verify_motion, "motion file")->required();

  // augment
  auto* augment = app.add_subcommand("augment", "augment a motion into a set");
  std::string augment_motion, augment_out = "motions";
  augment->add_option("--motion", augment_motion, "anchor motion file")->required();
  augment->add_option("--out", augment_out, "output motion-set directory");
  double augment_eps = -1.0;
  int augment_c3 = -1;
  std::string augment_span;
  augment->add_option("--epsilon", augment_eps, "offset half-range (m)");
  augment->add_option("--c3", augment_c3, "variant count (perfect square)");
  augment->add_option("--shift-span", augment_span,
                      "contact_coupled (default) or all");

  // train
  auto* train_cmd = app.add_subcommand("train", "run a training session");
  std::string train_out;
  train_cmd->add_option("--out", train_out, "run directory (overrides run.out_dir)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained policy");
  std::string eval_run, eval_csv, eval_mode = "deterministic", eval_which = "best";
  int eval_episodes = 100;
  std::uint64_t eval_seed = 1;
  bool eval_dr = false, eval_degrade = false, eval_expert = false;
  eval_cmd->add_option("--run", eval_run, "run directory")->required();
  eval_cmd->add_option("--episodes", eval_episodes, "episode count");
  eval_cmd->add_option("--mode", eval_mode, "deterministic | stochastic");
  eval_cmd->add_option("--checkpoint", eval_which, "best | latest");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
  eval_cmd->add_option("--csv", eval_csv, "per-episode metrics CSV path");
  eval_cmd->add_flag("--dr", eval_dr, "sample domain randomization per episode");
  eval_cmd->add_flag("--degrade-obs", eval_degrade,
                     "apply the noisy/delayed/dropout object channel");
  eval_cmd->add_flag("--expert", eval_expert,
                     "replay reference joint targets open loop");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "emit tidy CSVs and SVG charts");
  std::vector<std::string> plot_runs;
  std::string plot_out;
  plot_cmd->add_option("--run", plot_runs, "run directory (repeat for a sweep)")
      ->required();
  plot_cmd->add_option("--out", plot_out, "output directory (default <run>/plots)");

  // grad-check
  auto* grad_cmd = app.add_subcommand("grad-check",
                                      "finite-difference check of every "
                                      "configured network shape");
  double grad_tol = 1e-4;
  grad_cmd->add_option("--tol", grad_tol, "relative error tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    harness::RunConfig config = build_config(config_path, sets);
    if (dump_defaults) {
      std::fputs(harness::dump_config(harness::RunConfig{}).c_str(), stdout);
      return 0;
    }

    if (gen->parsed()) {
      config.resolve();
      motion::HoiMotion m = motion::generate_reference(
          motion::task_from_string(config.task), config.gen, config.robot,
          config.seed);
      motion::save_motion(m, gen_out);
      std::printf("wrote %s (%d frames, %.2f s)\n", gen_out.c_str(),
                  m.frame_count(), m.duration());
      return 0;
    }

    if (verify->parsed()) {
      config.resolve();
      motion::HoiMotion m = motion::load_motion(verify_motion);
      motion::VerificationReport report = motion::verify_motion(m, config.robot);
      if (report.pass()) {
        std::printf("PASS: %s (%d frames)\n", verify_motion.c_str(),
                    m.frame_count());
        return 0;
      }
      std::printf("FAIL: %zu violations\n", report.violations.size());
      for (const auto& v : report.violations)
        std::printf("  %s\n", v.describe().c_str());
      return 3;
    }

    if (augment->parsed()) {
      config.resolve();
      motion::AugmentParams params = config.augment;
      if (augment_eps >= 0) params.epsilon = augment_eps;
      if (augment_c3 > 0) params.c3 = augment_c3;
      if (!augment_span.empty()) {
        if (augment_span == "all")
          params.shift_span = motion::ShiftSpan::kAll;
        else if (augment_span == "contact_coupled")
          params.shift_span = motion::ShiftSpan::kContactCoupled;
        else
          throw ConfigError("--shift-span must be contact_coupled or all");
      }
      motion::HoiMotion anchor = motion::load_motion(augment_motion);
      motion::MotionSet set = motion::augment_motion(anchor, config.robot, params);
      motion::save_motion_set(set, augment_out, params);
      std::printf("wrote %d variants to %s\n", set.count(), augment_out.c_str());
      return 0;
    }

    if (train_cmd->parsed()) {
      if (!train_out.empty()) config.out_dir = train_out;
      harness::TrainResult result = harness::train(config);
      std::printf("run %s: %d epochs in %.1f s\n", result.paths.dir.c_str(),
                  result.epochs, result.wall_seconds);
      std::printf("eval e_jp+e_op+e_lp: initial %s, best %s, final %s\n",
                  fmt_double(result.initial_eval_score).c_str(),
                  fmt_double(result.best_eval_score).c_str(),
                  fmt_double(result.final_eval_score).c_str());
      return 0;
    }

    if (eval_cmd->parsed()) {
      harness::EvalOptions options;
      options.episodes = eval_episodes;
      if (eval_mode == "deterministic")
        options.deterministic = true;
      else if (eval_mode == "stochastic")
        options.deterministic = false;
      else
        throw ConfigError("--mode must be deterministic or stochastic");
      options.use_dr = eval_dr;
      options.degrade_obs = eval_degrade;
      options.seed = eval_seed;
      options.expert = eval_expert;
      harness::EvalResult result =
          harness::evaluate_run(eval_run, eval_which, options, eval_csv);
      std::printf("episodes: %d  successes: %d  success_rate: %s\n",
                  eval_episodes, result.successes,
                  fmt_double(result.success_rate).c_str());
      print_metrics(result.aggregate);
      return 0;
    }

    if (plot_cmd->parsed()) {
      plot::PlotOutputs outputs;
      if (plot_runs.size() == 1) {
        std::string out = plot_out.empty() ? plot_runs[0] + "/plots" : plot_out;
        outputs = plot::plot_run(plot_runs[0], out);
      } else {
        std::string out = plot_out.empty() ? "sweep_plots" : plot_out;
        outputs = plot::plot_sweep(plot_runs, out);
      }
      for (const std::string& w : outputs.warnings)
        std::fprintf(stderr, "warning: %s\n", w.c_str());
      for (const std::string& f : outputs.svgs)
        std::printf("wrote %s\n", f.c_str());
      for (const std::string& f : outputs.tidy_csvs)
        std::printf("wrote %s\n", f.c_str());
      return 0;
    }

    if (grad_cmd->parsed()) {
      harness::GradCheckSummary summary =
          harness::run_grad_check(config, grad_tol);
      for (const auto& entry : summary.entries) {
        std::printf("%-14s in=%-3d hidden=", nnkit::to_string(entry.spec.head).c_str(),
                    entry.spec.input_dim);
        for (int h : entry.spec.hidden_dims) std::printf("%d,", h);
        std::printf(" out=%-3d max_rel_err=%s %s\n", entry.spec.output_dim,
                    fmt_double(entry.report.max_rel_err).c_str(),
                    entry.report.pass ? "PASS" : "FAIL");
      }
      std::printf("%s (max_rel_err %s, tol %s)\n",
                  summary.pass ? "PASS" : "FAIL",
                  fmt_double(summary.max_rel_err).c_str(),
                  fmt_double(grad_tol).c_str());
      return summary.pass ? 0 : 4;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const VerificationError& e) {
    std::fprintf(stderr, "verification failure: %s\n", e.what());
    return 3;
  } catch (const NumericalFault& e) {
    std::fprintf(stderr, "numerical fault: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

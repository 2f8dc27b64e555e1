#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hoi/harness.hpp"
#include "hoi/plot.hpp"

using namespace hoi;
using namespace hoi::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny_config(const std::string& out_dir, std::uint64_t seed = 1) {
  RunConfig config;
  config.task = "box_push";
  config.seed = seed;
  config.total_epochs = 6;
  config.eval_every = 3;
  config.out_dir = out_dir;
  config.inner.num_envs = 4;
  config.inner.horizon = 8;
  config.inner_hidden = {16, 16};
  config.outer.hidden = {16, 16};
  config.outer.subtask_epochs = 3;
  config.outer.batch = 2;
  config.augment.c3 = 4;
  config.augment.epsilon = 0.03;
  return config;
}

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name)
      : path((fs::temp_directory_path() / name).string()) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config: dump -> parse -> dump is a fixed point") {
  RunConfig config;
  config.outer.delta = 0.25;
  config.robot.upper_len = 0.37;
  config.inner_hidden = {64, 32};
  std::string a = dump_config(config);
  RunConfig parsed = parse_config_text(a);
  std::string b = dump_config(parsed);
  CHECK(a == b);
}

TEST_CASE("config: every registry key is dumped and parseable") {
  RunConfig config;
  std::string text = dump_config(config);
  for (const std::string& key : config_keys())
    CHECK(text.find(key + " = ") != std::string::npos);
  CHECK(config_keys().size() > 90);  // the registry covers every tunable
}

TEST_CASE("config: unknown keys and malformed values are config errors") {
  RunConfig config;
  CHECK_THROWS_AS(apply_kv(config, "nope.key", "1"), ConfigError);
  CHECK_THROWS_AS(apply_kv(config, "inner.lr", "fast"), ConfigError);
  CHECK_THROWS_AS(apply_kv(config, "dr.enabled", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_kv(config, "robot.kp", "1,2,3"), ConfigError);
  apply_kv(config, "outer.delta", "0.25");
  CHECK(config.outer.delta == 0.25);
  apply_kv(config, "inner.hidden", "8,8");
  CHECK(config.inner_hidden == std::vector<int>{8, 8});
}

TEST_CASE("config: comments and blank lines parse; bad lines do not") {
  RunConfig c = parse_config_text("# comment\n\nrun.seed = 9 # trailing\n");
  CHECK(c.seed == 9);
  CHECK_THROWS_AS(parse_config_text("run.seed 9\n"), ConfigError);
}

TEST_CASE("config: resolve pins c4 to the epoch budget by default") {
  RunConfig config;
  config.total_epochs = 321;
  config.resolve();
  CHECK(config.outer.c4 == 321.0);
  RunConfig pinned;
  pinned.outer.c4 = 50.0;
  pinned.resolve();
  CHECK(pinned.outer.c4 == 50.0);
}

TEST_CASE("train: artifacts, event-log schema, and boundary counting") {
  TempDir tmp("hoi_train_artifacts");
  RunConfig config = tiny_config(tmp.path + "/run");
  config.total_epochs = 20;
  config.outer.subtask_epochs = 10;
  TrainResult result = train(config);
  RunPaths paths = result.paths;
  for (const std::string& f :
       {paths.config(), paths.event_log(), paths.eval_log(), paths.dr_log(),
        paths.meta_log(), paths.actor_latest(), paths.critic_latest(),
        paths.actor_best(), paths.critic_best()})
    CHECK(fs::exists(f));
  CsvTable events = read_csv(paths.event_log());
  CHECK(events.columns == event_log_columns());
  CHECK(events.rows.size() == 20);
  // T_total = 20, N = 10: exactly 2 outer-loop boundaries recorded
  CsvTable meta = read_csv(paths.meta_log());
  CHECK(meta.rows.size() == 2);
}

TEST_CASE("train: identical config and seed reproduce byte-identical logs") {
  TempDir tmp("hoi_train_determinism");
  RunConfig a = tiny_config(tmp.path + "/a", 42);
  RunConfig b = tiny_config(tmp.path + "/b", 42);
  TrainResult ra = train(a);
  TrainResult rb = train(b);
  CHECK(slurp(ra.paths.event_log()) == slurp(rb.paths.event_log()));
  CHECK(slurp(ra.paths.eval_log()) == slurp(rb.paths.eval_log()));
  CHECK(slurp(ra.paths.dr_log()) == slurp(rb.paths.dr_log()));
  CHECK(slurp(ra.paths.actor_latest()) == slurp(rb.paths.actor_latest()));
  // and a different seed diverges
  RunConfig c = tiny_config(tmp.path + "/c", 43);
  TrainResult rc = train(c);
  CHECK(slurp(ra.paths.event_log()) != slurp(rc.paths.event_log()));
}

TEST_CASE("train: rerunning from the serialized config reproduces the run") {
  TempDir tmp("hoi_train_rerun");
  RunConfig a = tiny_config(tmp.path + "/a", 7);
  TrainResult ra = train(a);
  RunConfig reloaded = load_config(ra.paths.config());
  reloaded.out_dir = tmp.path + "/b";
  TrainResult rb = train(reloaded);
  CHECK(slurp(ra.paths.event_log()) == slurp(rb.paths.event_log()));
}

TEST_CASE("train: delta=0 with c4=T_total is bit-identical to outer disabled") {
  TempDir tmp("hoi_train_equiv");
  RunConfig with = tiny_config(tmp.path + "/with", 5);
  with.outer_enabled = true;
  with.outer.delta = 0.0;
  with.outer.c4 = 0.0;  // resolves to total_epochs
  RunConfig without = tiny_config(tmp.path + "/without", 5);
  without.outer_enabled = false;
  TrainResult rw = train(with);
  TrainResult ro = train(without);
  CHECK(slurp(rw.paths.event_log()) == slurp(ro.paths.event_log()));
  CHECK(slurp(rw.paths.actor_latest()) == slurp(ro.paths.actor_latest()));
  CHECK(slurp(rw.paths.critic_latest()) == slurp(ro.paths.critic_latest()));
}

TEST_CASE("expert replay completes both tasks in the noise-free env") {
  for (const char* task : {"box_push", "box_pick"}) {
    RunConfig config;
    config.task = task;
    config.resolve();
    motion::MotionSet set = motion::MotionSet::single(motion::generate_reference(
        motion::task_from_string(task), config.gen, config.robot, 1));
    EvalOptions options;
    options.episodes = 3;
    options.expert = true;
    options.use_dr = false;
    EvalResult r = evaluate(config, set, nullptr, options);
    CAPTURE(task);
    CHECK(r.success_rate == 1.0);
    CHECK(r.aggregate.e_mope < 0.05);
  }
}

TEST_CASE("evaluate: aggregate equals the column means of the emitted CSV") {
  TempDir tmp("hoi_eval_csv");
  RunConfig config;
  config.resolve();
  motion::MotionSet set = motion::MotionSet::single(motion::generate_reference(
      motion::Task::kBoxPush, config.gen, config.robot, 1));
  EvalOptions options;
  options.episodes = 4;
  options.expert = true;
  std::string csv_path = tmp.path + "/episodes.csv";
  EvalResult r = evaluate(config, set, nullptr, options, csv_path);
  CsvTable table = read_csv(csv_path);
  REQUIRE(table.rows.size() == 4);
  int c = table.column_index("E_mope");
  REQUIRE(c >= 0);
  double mean = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) mean += table.value(i, c);
  mean /= 4;
  CHECK(r.aggregate.e_mope == doctest::Approx(mean).epsilon(1e-12));
  int cs = table.column_index("success");
  double rate = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) rate += table.value(i, cs);
  CHECK(r.success_rate == doctest::Approx(rate / 4));
}

TEST_CASE("evaluate: fixed seeds reproduce the success count under DR") {
  RunConfig config;
  config.resolve();
  motion::MotionSet set = motion::MotionSet::single(motion::generate_reference(
      motion::Task::kBoxPush, config.gen, config.robot, 1));
  EvalOptions options;
  options.episodes = 10;
  options.expert = true;
  options.use_dr = true;
  options.degrade_obs = true;
  options.seed = 77;
  EvalResult a = evaluate(config, set, nullptr, options);
  EvalResult b = evaluate(config, set, nullptr, options);
  CHECK(a.successes == b.successes);
  for (std::size_t i = 0; i < a.episodes.size(); ++i)
    CHECK(a.episodes[i].e_mope == b.episodes[i].e_mope);
}

TEST_CASE("plot: tidy CSVs, charts, and the replot byte-match oracle") {
  TempDir tmp("hoi_plot");
  RunConfig config = tiny_config(tmp.path + "/run");
  TrainResult result = train(config);
  std::string out = tmp.path + "/plots";
  plot::PlotOutputs outputs = plot::plot_run(result.paths.dir, out);
  REQUIRE(outputs.svgs.size() == 2);
  REQUIRE(outputs.tidy_csvs.size() == 2);
  for (const std::string& f : outputs.svgs) CHECK(fs::exists(f));

  // stage 2 is a pure function of the tidy CSV: re-rendering byte-matches
  std::string svg_before = slurp(outputs.svgs[0]);
  plot::plot_from_tidy(outputs.tidy_csvs[0], outputs.svgs[0],
                       "normalized tracking error", "epoch",
                       "(e_jp+e_op+e_lp) / initial");
  CHECK(slurp(outputs.svgs[0]) == svg_before);
}

TEST_CASE("plot: constant weights draw flat curves") {
  TempDir tmp("hoi_plot_flat");
  RunConfig config = tiny_config(tmp.path + "/run");
  config.outer.delta = 0.0;  // sigma = 0: theta stays at theta0
  config.outer.c4 = 0.0;
  TrainResult result = train(config);
  std::string out = tmp.path + "/plots";
  plot::PlotOutputs outputs = plot::plot_run(result.paths.dir, out);
  bool found = false;
  for (const std::string& csv : outputs.tidy_csvs) {
    if (csv.find("weights") == std::string::npos) continue;
    found = true;
    for (const plot::Series& s : plot::series_from_tidy_csv(csv))
      for (std::size_t i = 1; i < s.y.size(); ++i) CHECK(s.y[i] == s.y[0]);
  }
  CHECK(found);
}

TEST_CASE("plot: a two-run sweep emits one labeled comparison figure") {
  TempDir tmp("hoi_plot_sweep");
  RunConfig a = tiny_config(tmp.path + "/a");
  a.outer.delta = 0.0;
  RunConfig b = tiny_config(tmp.path + "/b");
  b.outer.delta = 0.1;
  TrainResult ra = train(a);
  TrainResult rb = train(b);
  std::string out = tmp.path + "/plots";
  plot::PlotOutputs outputs = plot::plot_sweep({ra.paths.dir, rb.paths.dir}, out);
  REQUIRE(outputs.svgs.size() == 1);
  std::string svg = slurp(outputs.svgs[0]);
  CHECK(svg.find("delta=0") != std::string::npos);
  CHECK(svg.find("delta=0.1") != std::string::npos);
}

TEST_CASE("plot: missing logs are skipped with a warning") {
  TempDir tmp("hoi_plot_missing");
  plot::PlotOutputs outputs = plot::plot_run(tmp.path, tmp.path + "/plots");
  CHECK(outputs.svgs.empty());
  CHECK_FALSE(outputs.warnings.empty());
}

TEST_CASE("grad check covers the configured shapes and passes") {
  RunConfig config;
  config.inner_hidden = {32, 32};
  config.outer.hidden = {16, 16};
  GradCheckSummary summary = run_grad_check(config, 1e-4);
  CHECK(summary.entries.size() == 4);
  CHECK(summary.pass);
}

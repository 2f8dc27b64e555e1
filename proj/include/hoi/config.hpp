#pragma once

#include <string>
#include <vector>

#include "hoi/kinematics.hpp"
#include "hoi/metasac.hpp"
#include "hoi/motion.hpp"
#include "hoi/ppo.hpp"
#include "hoi/rewards.hpp"
#include "hoi/simenv.hpp"

namespace hoi::harness {

// Every tunable in the repo lives here and is reachable through the flat
// `section.key = value` registry, so a serialized run config is complete.
struct RunConfig {
  std::string task = "box_push";
  std::string motions;  // motion file or set directory; empty -> generate
  std::uint64_t seed = 1;
  int total_epochs = 2000;  // T_total
  int eval_every = 50;
  std::string out_dir = "runs/run";

  kin::RobotModel robot;
  motion::GenParams gen;
  motion::AugmentParams augment;
  sim::SimConfig sim;
  sim::EnvParams env;
  sim::DrRanges dr;
  bool dr_enabled = true;
  rewards::RewardWeights weights = rewards::RewardWeights::defaults();
  rewards::Sensitivities sens;
  rewards::SuccessParams success;
  ppo::PpoConfig inner;
  std::vector<int> inner_hidden = {128, 128};
  metasac::MetaConfig outer;
  bool outer_enabled = true;

  // Resolves derived defaults (outer.c4 <= 0 means "total_epochs") and
  // validates every block; call once before use.
  void resolve();
};

// Flat-key access. Unknown keys or malformed values raise ConfigError.
void apply_kv(RunConfig& config, const std::string& key,
              const std::string& value);
std::string dump_config(const RunConfig& config);
// `section.key = value` lines with `#` comments.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);
std::vector<std::string> config_keys();

}  // namespace hoi::harness

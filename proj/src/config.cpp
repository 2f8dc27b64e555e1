#include "hoi/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace hoi::harness {

namespace {

struct Binding {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key `" + key + "` expects a number, got `" + v + "`");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config: key `" + key + "` expects an integer, got `" + v + "`");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key `" + key + "` expects a boolean, got `" + v + "`");
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

class Registry {
 public:
  Registry() { build(); }

  const std::vector<Binding>& bindings() const { return bindings_; }

  const Binding* find(const std::string& key) const {
    for (const Binding& b : bindings_)
      if (b.key == key) return &b;
    return nullptr;
  }

 private:
  std::vector<Binding> bindings_;

  void dbl(const std::string& key, std::function<double&(RunConfig&)> ref) {
    bindings_.push_back(Binding{
        key,
        [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); },
        [ref, key](RunConfig& c, const std::string& v) { ref(c) = parse_double(key, v); }});
  }

  void integer(const std::string& key, std::function<int&(RunConfig&)> ref) {
    bindings_.push_back(Binding{
        key,
        [ref](const RunConfig& c) {
          return std::to_string(ref(const_cast<RunConfig&>(c)));
        },
        [ref, key](RunConfig& c, const std::string& v) {
          ref(c) = static_cast<int>(parse_int(key, v));
        }});
  }

  void u64(const std::string& key, std::function<std::uint64_t&(RunConfig&)> ref) {
    bindings_.push_back(Binding{
        key,
        [ref](const RunConfig& c) {
          return std::to_string(ref(const_cast<RunConfig&>(c)));
        },
        [ref, key](RunConfig& c, const std::string& v) {
          long long i = parse_int(key, v);
          if (i < 0) throw ConfigError("config: key `" + key + "` must be >= 0");
          ref(c) = static_cast<std::uint64_t>(i);
        }});
  }

  void boolean(const std::string& key, std::function<bool&(RunConfig&)> ref) {
    bindings_.push_back(Binding{
        key,
        [ref](const RunConfig& c) {
          return ref(const_cast<RunConfig&>(c)) ? std::string("true")
                                                : std::string("false");
        },
        [ref, key](RunConfig& c, const std::string& v) {
          ref(c) = parse_bool(key, v);
        }});
  }

  void str(const std::string& key, std::function<std::string&(RunConfig&)> ref) {
    bindings_.push_back(Binding{
        key,
        [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); },
        [ref](RunConfig& c, const std::string& v) { ref(c) = v; }});
  }

  void int_list(const std::string& key,
                std::function<std::vector<int>&(RunConfig&)> ref) {
    bindings_.push_back(Binding{
        key,
        [ref](const RunConfig& c) {
          const auto& v = ref(const_cast<RunConfig&>(c));
          std::vector<std::string> parts;
          for (int i : v) parts.push_back(std::to_string(i));
          return join(parts, ",");
        },
        [ref, key](RunConfig& c, const std::string& v) {
          std::vector<int> out;
          for (const std::string& item : split_commas(v))
            out.push_back(static_cast<int>(parse_int(key, trim(item))));
          if (out.empty())
            throw ConfigError("config: key `" + key + "` expects a list");
          ref(c) = out;
        }});
  }

  void joint_array(const std::string& key,
                   std::function<std::array<double, kin::kNumJoints>&(RunConfig&)> ref) {
    bindings_.push_back(Binding{
        key,
        [ref](const RunConfig& c) {
          const auto& a = ref(const_cast<RunConfig&>(c));
          std::vector<std::string> parts;
          for (double d : a) parts.push_back(fmt_double(d));
          return join(parts, ",");
        },
        [ref, key](RunConfig& c, const std::string& v) {
          auto parts = split_commas(v);
          if (parts.size() != kin::kNumJoints)
            throw ConfigError("config: key `" + key + "` expects " +
                              std::to_string(kin::kNumJoints) + " values");
          auto& a = ref(c);
          for (int i = 0; i < kin::kNumJoints; ++i)
            a[static_cast<std::size_t>(i)] =
                parse_double(key, trim(parts[static_cast<std::size_t>(i)]));
        }});
  }

  void build() {
    str("run.task", [](RunConfig& c) -> std::string& { return c.task; });
    str("run.motions", [](RunConfig& c) -> std::string& { return c.motions; });
    u64("run.seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; });
    integer("run.total_epochs", [](RunConfig& c) -> int& { return c.total_epochs; });
    integer("run.eval_every", [](RunConfig& c) -> int& { return c.eval_every; });
    str("run.out_dir", [](RunConfig& c) -> std::string& { return c.out_dir; });

    dbl("robot.torso_len", [](RunConfig& c) -> double& { return c.robot.torso_len; });
    dbl("robot.upper_len", [](RunConfig& c) -> double& { return c.robot.upper_len; });
    dbl("robot.fore_len", [](RunConfig& c) -> double& { return c.robot.fore_len; });
    dbl("robot.hand_len", [](RunConfig& c) -> double& { return c.robot.hand_len; });
    joint_array("robot.q_lo", [](RunConfig& c) -> std::array<double, 7>& { return c.robot.q_lo; });
    joint_array("robot.q_hi", [](RunConfig& c) -> std::array<double, 7>& { return c.robot.q_hi; });
    joint_array("robot.qd_max", [](RunConfig& c) -> std::array<double, 7>& { return c.robot.qd_max; });
    joint_array("robot.tau_max", [](RunConfig& c) -> std::array<double, 7>& { return c.robot.tau_max; });
    joint_array("robot.kp", [](RunConfig& c) -> std::array<double, 7>& { return c.robot.kp; });
    joint_array("robot.kd", [](RunConfig& c) -> std::array<double, 7>& { return c.robot.kd; });
    dbl("robot.wrist_contact_radius",
        [](RunConfig& c) -> double& { return c.robot.wrist_contact_radius; });

    dbl("gen.dt", [](RunConfig& c) -> double& { return c.gen.dt; });
    dbl("gen.hold_s", [](RunConfig& c) -> double& { return c.gen.hold_s; });
    dbl("gen.approach_s", [](RunConfig& c) -> double& { return c.gen.approach_s; });
    dbl("gen.close_s", [](RunConfig& c) -> double& { return c.gen.close_s; });
    dbl("gen.manipulate_s", [](RunConfig& c) -> double& { return c.gen.manipulate_s; });
    dbl("gen.release_s", [](RunConfig& c) -> double& { return c.gen.release_s; });
    dbl("gen.open_s", [](RunConfig& c) -> double& { return c.gen.open_s; });
    dbl("gen.table_height", [](RunConfig& c) -> double& { return c.gen.table_height; });
    dbl("gen.box_w", [](RunConfig& c) -> double& { return c.gen.box.w; });
    dbl("gen.box_h", [](RunConfig& c) -> double& { return c.gen.box.h; });
    dbl("gen.box_start_x", [](RunConfig& c) -> double& { return c.gen.box_start.x(); });
    dbl("gen.box_start_y", [](RunConfig& c) -> double& { return c.gen.box_start.y(); });
    dbl("gen.box_goal_pick_x", [](RunConfig& c) -> double& { return c.gen.box_goal_pick.x(); });
    dbl("gen.box_goal_pick_y", [](RunConfig& c) -> double& { return c.gen.box_goal_pick.y(); });
    dbl("gen.box_goal_push_x", [](RunConfig& c) -> double& { return c.gen.box_goal_push.x(); });
    dbl("gen.box_goal_push_y", [](RunConfig& c) -> double& { return c.gen.box_goal_push.y(); });
    dbl("gen.root_x", [](RunConfig& c) -> double& { return c.gen.root.x; });
    dbl("gen.root_y", [](RunConfig& c) -> double& { return c.gen.root.y; });
    dbl("gen.rest_wrist_x", [](RunConfig& c) -> double& { return c.gen.rest_wrist.x(); });
    dbl("gen.rest_wrist_y", [](RunConfig& c) -> double& { return c.gen.rest_wrist.y(); });
    dbl("gen.rest_split", [](RunConfig& c) -> double& { return c.gen.rest_split; });
    dbl("gen.standoff", [](RunConfig& c) -> double& { return c.gen.standoff; });
    dbl("gen.retreat_standoff", [](RunConfig& c) -> double& { return c.gen.retreat_standoff; });
    dbl("gen.transit_y", [](RunConfig& c) -> double& { return c.gen.transit_y; });

    dbl("augment.epsilon", [](RunConfig& c) -> double& { return c.augment.epsilon; });
    integer("augment.c3", [](RunConfig& c) -> int& { return c.augment.c3; });
    bindings_.push_back(Binding{
        "augment.shift_span",
        [](const RunConfig& c) {
          return c.augment.shift_span == motion::ShiftSpan::kAll
                     ? std::string("all")
                     : std::string("contact_coupled");
        },
        [](RunConfig& c, const std::string& v) {
          if (v == "all")
            c.augment.shift_span = motion::ShiftSpan::kAll;
          else if (v == "contact_coupled")
            c.augment.shift_span = motion::ShiftSpan::kContactCoupled;
          else
            throw ConfigError("config: augment.shift_span must be "
                              "`contact_coupled` or `all`, got `" + v + "`");
        }});
    dbl("augment.blend_s", [](RunConfig& c) -> double& { return c.augment.blend_s; });

    dbl("sim.dt", [](RunConfig& c) -> double& { return c.sim.dt; });
    dbl("sim.gravity", [](RunConfig& c) -> double& { return c.sim.gravity; });
    dbl("sim.table_height", [](RunConfig& c) -> double& { return c.sim.table_height; });
    dbl("sim.grasp_attach_radius", [](RunConfig& c) -> double& { return c.sim.grasp_attach_radius; });
    dbl("sim.grasp_detach_radius", [](RunConfig& c) -> double& { return c.sim.grasp_detach_radius; });
    dbl("sim.rsi_phase0_prob", [](RunConfig& c) -> double& { return c.sim.rsi_phase0_prob; });
    dbl("sim.rsi_max_phase", [](RunConfig& c) -> double& { return c.sim.rsi_max_phase; });
    dbl("sim.term_torso_pitch", [](RunConfig& c) -> double& { return c.sim.term_torso_pitch; });
    dbl("sim.term_link_deviation", [](RunConfig& c) -> double& { return c.sim.term_link_deviation; });
    dbl("sim.qd_scale", [](RunConfig& c) -> double& { return c.sim.qd_scale; });

    dbl("env.box_mass", [](RunConfig& c) -> double& { return c.env.box_mass; });
    dbl("env.friction_static", [](RunConfig& c) -> double& { return c.env.friction_static; });
    dbl("env.friction_kinetic", [](RunConfig& c) -> double& { return c.env.friction_kinetic; });
    dbl("env.pd_scale", [](RunConfig& c) -> double& { return c.env.pd_scale; });
    dbl("env.obs_noise_std", [](RunConfig& c) -> double& { return c.env.obs_noise_std; });
    integer("env.obs_latency", [](RunConfig& c) -> int& { return c.env.obs_latency; });
    dbl("env.obs_dropout", [](RunConfig& c) -> double& { return c.env.obs_dropout; });
    integer("env.action_delay", [](RunConfig& c) -> int& { return c.env.action_delay; });
    dbl("env.contact_stiffness", [](RunConfig& c) -> double& { return c.env.contact_stiffness; });

    boolean("dr.enabled", [](RunConfig& c) -> bool& { return c.dr_enabled; });
    dbl("dr.mass_factor_lo", [](RunConfig& c) -> double& { return c.dr.mass_factor_lo; });
    dbl("dr.mass_factor_hi", [](RunConfig& c) -> double& { return c.dr.mass_factor_hi; });
    dbl("dr.friction_factor_lo", [](RunConfig& c) -> double& { return c.dr.friction_factor_lo; });
    dbl("dr.friction_factor_hi", [](RunConfig& c) -> double& { return c.dr.friction_factor_hi; });
    dbl("dr.pd_factor_lo", [](RunConfig& c) -> double& { return c.dr.pd_factor_lo; });
    dbl("dr.pd_factor_hi", [](RunConfig& c) -> double& { return c.dr.pd_factor_hi; });
    dbl("dr.obs_noise_lo", [](RunConfig& c) -> double& { return c.dr.obs_noise_lo; });
    dbl("dr.obs_noise_hi", [](RunConfig& c) -> double& { return c.dr.obs_noise_hi; });
    integer("dr.latency_lo", [](RunConfig& c) -> int& { return c.dr.latency_lo; });
    integer("dr.latency_hi", [](RunConfig& c) -> int& { return c.dr.latency_hi; });
    dbl("dr.dropout_lo", [](RunConfig& c) -> double& { return c.dr.dropout_lo; });
    dbl("dr.dropout_hi", [](RunConfig& c) -> double& { return c.dr.dropout_hi; });
    integer("dr.delay_lo", [](RunConfig& c) -> int& { return c.dr.delay_lo; });
    integer("dr.delay_hi", [](RunConfig& c) -> int& { return c.dr.delay_hi; });

    for (int k = 0; k < rewards::kNumTerms; ++k) {
      std::string key = std::string("weights.") + rewards::kTermNames[static_cast<std::size_t>(k)];
      dbl(key, [k](RunConfig& c) -> double& { return c.weights.values[k]; });
    }
    dbl("sens.jp", [](RunConfig& c) -> double& { return c.sens.jp; });
    dbl("sens.jv", [](RunConfig& c) -> double& { return c.sens.jv; });
    dbl("sens.lp", [](RunConfig& c) -> double& { return c.sens.lp; });
    dbl("sens.lr", [](RunConfig& c) -> double& { return c.sens.lr; });
    dbl("sens.op", [](RunConfig& c) -> double& { return c.sens.op; });
    dbl("sens.orot", [](RunConfig& c) -> double& { return c.sens.orot; });
    dbl("sens.cm", [](RunConfig& c) -> double& { return c.sens.cm; });

    dbl("success.pos_tol", [](RunConfig& c) -> double& { return c.success.pos_tol; });
    dbl("success.rot_tol", [](RunConfig& c) -> double& { return c.success.rot_tol; });

    integer("inner.horizon", [](RunConfig& c) -> int& { return c.inner.horizon; });
    integer("inner.num_envs", [](RunConfig& c) -> int& { return c.inner.num_envs; });
    dbl("inner.gamma", [](RunConfig& c) -> double& { return c.inner.gamma; });
    dbl("inner.lambda", [](RunConfig& c) -> double& { return c.inner.lambda; });
    dbl("inner.clip", [](RunConfig& c) -> double& { return c.inner.clip; });
    integer("inner.epochs", [](RunConfig& c) -> int& { return c.inner.epochs; });
    integer("inner.minibatches", [](RunConfig& c) -> int& { return c.inner.minibatches; });
    dbl("inner.lr", [](RunConfig& c) -> double& { return c.inner.lr; });
    dbl("inner.entropy_coef", [](RunConfig& c) -> double& { return c.inner.entropy_coef; });
    bindings_.push_back(Binding{
        "inner.advantage",
        [](const RunConfig& c) {
          return c.inner.mc_advantage ? std::string("mc") : std::string("gae");
        },
        [](RunConfig& c, const std::string& v) {
          if (v == "mc")
            c.inner.mc_advantage = true;
          else if (v == "gae")
            c.inner.mc_advantage = false;
          else
            throw ConfigError("config: inner.advantage must be `gae` or `mc`, got `" + v + "`");
        }});
    dbl("inner.init_log_std", [](RunConfig& c) -> double& { return c.inner.init_log_std; });
    int_list("inner.hidden", [](RunConfig& c) -> std::vector<int>& { return c.inner_hidden; });

    boolean("outer.enabled", [](RunConfig& c) -> bool& { return c.outer_enabled; });
    int_list("outer.hidden", [](RunConfig& c) -> std::vector<int>& { return c.outer.hidden; });
    dbl("outer.lr", [](RunConfig& c) -> double& { return c.outer.lr; });
    dbl("outer.gamma", [](RunConfig& c) -> double& { return c.outer.gamma; });
    dbl("outer.tau", [](RunConfig& c) -> double& { return c.outer.tau; });
    dbl("outer.alpha", [](RunConfig& c) -> double& { return c.outer.alpha; });
    integer("outer.batch", [](RunConfig& c) -> int& { return c.outer.batch; });
    integer("outer.updates_per_subtask",
            [](RunConfig& c) -> int& { return c.outer.updates_per_subtask; });
    dbl("outer.action_span", [](RunConfig& c) -> double& { return c.outer.action_span; });
    dbl("outer.c4", [](RunConfig& c) -> double& { return c.outer.c4; });
    dbl("outer.delta", [](RunConfig& c) -> double& { return c.outer.delta; });
    integer("outer.subtask_epochs", [](RunConfig& c) -> int& { return c.outer.subtask_epochs; });
    dbl("outer.init_log_std", [](RunConfig& c) -> double& { return c.outer.init_log_std; });
    bindings_.push_back(Binding{
        "outer.weight_rule",
        [](const RunConfig& c) {
          return c.outer.rule == metasac::WeightRule::kLiteral
                     ? std::string("literal")
                     : std::string("modulate");
        },
        [](RunConfig& c, const std::string& v) {
          if (v == "literal")
            c.outer.rule = metasac::WeightRule::kLiteral;
          else if (v == "modulate")
            c.outer.rule = metasac::WeightRule::kModulate;
          else
            throw ConfigError("config: outer.weight_rule must be `modulate` "
                              "or `literal`, got `" + v + "`");
        }});
  }
};

const Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void RunConfig::resolve() {
  if (outer.c4 <= 0.0) outer.c4 = static_cast<double>(total_epochs);
  motion::task_from_string(task);
  if (total_epochs < 1) throw ConfigError("config: run.total_epochs must be >= 1");
  if (eval_every < 1) throw ConfigError("config: run.eval_every must be >= 1");
  if (gen.dt != sim.dt)
    throw ConfigError("config: gen.dt and sim.dt must match (reference frames "
                      "advance one per control step)");
  robot.validate();
  sim.validate();
  env.validate();
  dr.validate();
  weights.validate();
  inner.qd_scale = sim.qd_scale;
  inner.validate();
  outer.validate();
  for (int h : inner_hidden)
    if (h < 1) throw ConfigError("config: inner.hidden entries must be >= 1");
}

void apply_kv(RunConfig& config, const std::string& key,
              const std::string& value) {
  const Binding* b = registry().find(key);
  if (!b) throw ConfigError("config: unknown key `" + key + "`");
  b->set(config, value);
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const Binding& b : registry().bindings()) {
    std::string sec = b.key.substr(0, b.key.find('.'));
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "# [" + sec + "]\n";
      section = sec;
    }
    out += b.key + " = " + b.get(config) + "\n";
  }
  return out;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " is not `key = value`: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    apply_kv(config, key, value);
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HoiError("cannot write config: " + path);
  out << dump_config(config);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Binding& b : registry().bindings()) keys.push_back(b.key);
  return keys;
}

}  // namespace hoi::harness

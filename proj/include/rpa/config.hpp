#pragma once

// Flat key=value experiment configuration with documented defaults.
// Precedence: command-line --set overrides > config file > defaults.

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpa/trainer.hpp"

namespace rpa {

struct ExperimentConfig {
  // World generation and splits.
  int nodes_per_world = 16;
  int landmark_vocab = 8;
  int feature_dim = 64;
  int train_worlds = 10;
  int train_tasks_per_world = 30;
  int val_seen_worlds = 3;       // reuse the first train worlds, fresh tasks
  int val_unseen_worlds = 3;     // disjoint worlds
  int val_tasks_per_world = 10;
  int min_path_len = 2;
  int max_path_len = 6;

  // Policy network.
  int word_embed = 32;
  int hidden = 64;
  int action_embed = 32;
  real dropout = real(0.5);

  // Environment model.
  int env_action_embed = 32;
  int env_proj_width = 64;
  int env_trans_hidden = 64;
  int env_reward_hidden = 32;
  bool env_condition_instruction = false;

  // Look-ahead.
  int lookahead_depth = 2;
  int lookahead_encoder_hidden = 32;
  int lookahead_pred_hidden1 = 64;
  int lookahead_pred_hidden2 = 32;

  // Training.
  int batch_size = 16;
  int max_episode_len = 20;
  long env_iterations = 500;
  long policy_iterations = 3000;
  // Desk-scale defaults; the full-scale reference rates are 1e-4 (policy)
  // and 1e-5 (environment model), far too small for these network sizes.
  real lr_policy = real(1e-3);
  real lr_envmodel = real(3e-3);
  real clip_norm = real(5);
  real weight_decay = real(0.0005);
  real p_human = real(0.95);
  real w_floor = real(0.15);
  long schedule_T = 0;  // 0 -> policy_iterations / 5
  real gamma = real(0.95);
  std::string reward = "disc";  // gd | succ | disc | disc-succ
  double success_threshold = 3.0;
  bool reward_baseline = false;

  std::uint64_t seed = 1;
  std::string out_dir = "run";

  AgentConfig agent_config() const {
    AgentConfig c;
    c.word_embed = word_embed;
    c.hidden = hidden;
    c.action_embed = action_embed;
    c.feature_dim = feature_dim;
    c.dropout = dropout;
    return c;
  }
  EnvModelConfig envmodel_config() const {
    EnvModelConfig c;
    c.feature_dim = feature_dim;
    c.action_embed = env_action_embed;
    c.proj_width = env_proj_width;
    c.trans_hidden = env_trans_hidden;
    c.reward_hidden = env_reward_hidden;
    c.condition_instruction = env_condition_instruction;
    return c;
  }
  LookaheadConfig lookahead_config() const {
    LookaheadConfig c;
    c.depth = lookahead_depth;
    c.encoder_hidden = lookahead_encoder_hidden;
    c.pred_hidden1 = lookahead_pred_hidden1;
    c.pred_hidden2 = lookahead_pred_hidden2;
    return c;
  }
  TrainConfig train_config(long max_iterations) const {
    TrainConfig c;
    c.batch_size = batch_size;
    c.max_episode_len = max_episode_len;
    c.max_iterations = max_iterations;
    c.lr_policy = lr_policy;
    c.lr_envmodel = lr_envmodel;
    c.clip_norm = clip_norm;
    c.weight_decay = weight_decay;
    c.p_human = p_human;
    c.w_floor = w_floor;
    c.schedule_T = schedule_T > 0 ? schedule_T : std::max<long>(1, policy_iterations / 5);
    c.seed = seed;
    c.success_threshold = success_threshold;
    c.reward_baseline = reward_baseline;
    return c;
  }
  RewardSpec reward_spec() const { return {reward_variant_from_string(reward), gamma}; }
  WorldConfig world_config() const {
    WorldConfig c;
    c.feature_dim = feature_dim;
    return c;
  }
};

namespace config_detail {

struct Entry {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (is.fail() || !is.eof())
    throw std::invalid_argument("config: bad value '" + v + "' for key '" + key + "'");
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "' for key '" + key + "'");
}

inline std::string format_real(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

inline const std::vector<Entry>& entries() {
  static const std::vector<Entry> list = [] {
    std::vector<Entry> e;
    auto num = [&e](const std::string& name, auto member) {
      using T = std::decay_t<decltype(ExperimentConfig{}.*member)>;
      e.push_back({name,
                   [member](const ExperimentConfig& c) {
                     if constexpr (std::is_floating_point_v<T>)
                       return format_real(static_cast<double>(c.*member));
                     else
                       return std::to_string(c.*member);
                   },
                   [member, name](ExperimentConfig& c, const std::string& v) {
                     c.*member = parse_number<T>(v, name);
                   }});
    };
    auto flag = [&e](const std::string& name, bool ExperimentConfig::* member) {
      e.push_back({name,
                   [member](const ExperimentConfig& c) {
                     return std::string(c.*member ? "true" : "false");
                   },
                   [member, name](ExperimentConfig& c, const std::string& v) {
                     c.*member = parse_bool(v, name);
                   }});
    };
    auto str = [&e](const std::string& name, std::string ExperimentConfig::* member) {
      e.push_back({name, [member](const ExperimentConfig& c) { return c.*member; },
                   [member](ExperimentConfig& c, const std::string& v) { c.*member = v; }});
    };

    num("nodes_per_world", &ExperimentConfig::nodes_per_world);
    num("landmark_vocab", &ExperimentConfig::landmark_vocab);
    num("feature_dim", &ExperimentConfig::feature_dim);
    num("train_worlds", &ExperimentConfig::train_worlds);
    num("train_tasks_per_world", &ExperimentConfig::train_tasks_per_world);
    num("val_seen_worlds", &ExperimentConfig::val_seen_worlds);
    num("val_unseen_worlds", &ExperimentConfig::val_unseen_worlds);
    num("val_tasks_per_world", &ExperimentConfig::val_tasks_per_world);
    num("min_path_len", &ExperimentConfig::min_path_len);
    num("max_path_len", &ExperimentConfig::max_path_len);
    num("word_embed", &ExperimentConfig::word_embed);
    num("hidden", &ExperimentConfig::hidden);
    num("action_embed", &ExperimentConfig::action_embed);
    num("dropout", &ExperimentConfig::dropout);
    num("env_action_embed", &ExperimentConfig::env_action_embed);
    num("env_proj_width", &ExperimentConfig::env_proj_width);
    num("env_trans_hidden", &ExperimentConfig::env_trans_hidden);
    num("env_reward_hidden", &ExperimentConfig::env_reward_hidden);
    flag("env_condition_instruction", &ExperimentConfig::env_condition_instruction);
    num("lookahead_depth", &ExperimentConfig::lookahead_depth);
    num("lookahead_encoder_hidden", &ExperimentConfig::lookahead_encoder_hidden);
    num("lookahead_pred_hidden1", &ExperimentConfig::lookahead_pred_hidden1);
    num("lookahead_pred_hidden2", &ExperimentConfig::lookahead_pred_hidden2);
    num("batch_size", &ExperimentConfig::batch_size);
    num("max_episode_len", &ExperimentConfig::max_episode_len);
    num("env_iterations", &ExperimentConfig::env_iterations);
    num("policy_iterations", &ExperimentConfig::policy_iterations);
    num("lr_policy", &ExperimentConfig::lr_policy);
    num("lr_envmodel", &ExperimentConfig::lr_envmodel);
    num("clip_norm", &ExperimentConfig::clip_norm);
    num("weight_decay", &ExperimentConfig::weight_decay);
    num("p_human", &ExperimentConfig::p_human);
    num("w_floor", &ExperimentConfig::w_floor);
    num("schedule_T", &ExperimentConfig::schedule_T);
    num("gamma", &ExperimentConfig::gamma);
    str("reward", &ExperimentConfig::reward);
    num("success_threshold", &ExperimentConfig::success_threshold);
    flag("reward_baseline", &ExperimentConfig::reward_baseline);
    num("seed", &ExperimentConfig::seed);
    str("out_dir", &ExperimentConfig::out_dir);
    return e;
  }();
  return list;
}

}  // namespace config_detail

inline void config_set(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : config_detail::entries()) {
    if (e.name == key) {
      e.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

// One "key = value" assignment per line; '#' starts a comment.
inline void parse_config_text(ExperimentConfig& cfg, std::istream& is,
                              const std::string& origin) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    if (strip(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    config_set(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
}

inline void load_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  parse_config_text(cfg, is, path);
}

// "key=value" CLI override.
inline void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
  config_set(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

// Canonical snapshot: every key in declaration order, one per line.
inline std::string config_to_string(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& e : config_detail::entries()) out += e.name + " = " + e.get(cfg) + "\n";
  return out;
}

inline std::map<std::string, std::string> config_to_map(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& e : config_detail::entries()) out[e.name] = e.get(cfg);
  return out;
}

}  // namespace rpa

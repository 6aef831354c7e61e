#pragma once

// Experiment orchestration: dataset generation, the two training phases,
// evaluation tables, and the per-command run manifest.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "rpa/config.hpp"

namespace rpa {

constexpr const char* kToolVersion = "rpa 1.0.0";

namespace fs = std::filesystem;

// ---- manifest ----

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> artifacts;  // relative path -> content hash
  double seconds = 0;
};

inline std::uint64_t hash_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot hash missing file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::string s = buf.str();
  return fnv1a64(s.data(), s.size());
}

inline void write_manifest(const fs::path& out_dir, const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config;
  nlohmann::json arts = nlohmann::json::object();
  for (const auto& [path, hash] : m.artifacts) {
    std::ostringstream h;
    h << std::hex << hash;
    arts[path] = h.str();
  }
  j["artifacts"] = arts;
  j["tool_version"] = kToolVersion;
  j["seconds"] = m.seconds;
  std::ofstream os(out_dir / ("manifest-" + m.command + ".json"), std::ios::trunc);
  os << j.dump(2) << "\n";
  if (!os) throw std::runtime_error("manifest write failed");
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---- generate ----

// Train and val-seen share worlds (fresh tasks); val-unseen worlds come from
// a disjoint seed stream.
inline void cmd_generate(const ExperimentConfig& cfg, bool overwrite = false) {
  Stopwatch timer;
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const std::vector<std::string> files = {"train.jsonl", "val_seen.jsonl", "val_unseen.jsonl"};
  for (const auto& f : files)
    if (!overwrite && fs::exists(out / f))
      throw std::runtime_error("refusing to overwrite existing " + (out / f).string() +
                               " (pass --overwrite)");

  const auto wcfg = cfg.world_config();
  auto add_tasks = [&](Dataset& ds, int world_index, int count, std::uint64_t stream,
                       const std::string& split) {
    for (int t = 0; t < count; ++t) {
      ds.tasks.push_back(make_task(ds.worlds[world_index], mix_seed(cfg.seed, stream, t),
                                   cfg.min_path_len, cfg.max_path_len));
      ds.tasks.back().split = split;
      ds.task_world.push_back(world_index);
    }
  };

  std::vector<WorldGraph> train_worlds;
  for (int i = 0; i < cfg.train_worlds; ++i)
    train_worlds.push_back(generate_world(mix_seed(cfg.seed, 0xA11ull, i), cfg.nodes_per_world,
                                          cfg.landmark_vocab, wcfg));

  Dataset train;
  train.worlds = train_worlds;
  for (int i = 0; i < cfg.train_worlds; ++i)
    add_tasks(train, i, cfg.train_tasks_per_world, 0x1000ull + i, "train");
  save_dataset((out / "train.jsonl").string(), train);

  if (cfg.val_seen_worlds > cfg.train_worlds)
    throw std::invalid_argument("val_seen_worlds cannot exceed train_worlds");
  Dataset seen;
  for (int i = 0; i < cfg.val_seen_worlds; ++i) {
    seen.worlds.push_back(train_worlds[i]);
    add_tasks(seen, i, cfg.val_tasks_per_world, 0x2000ull + i, "val-seen");
  }
  save_dataset((out / "val_seen.jsonl").string(), seen);

  Dataset unseen;
  for (int i = 0; i < cfg.val_unseen_worlds; ++i) {
    unseen.worlds.push_back(generate_world(mix_seed(cfg.seed, 0xB22ull, i), cfg.nodes_per_world,
                                           cfg.landmark_vocab, wcfg));
    add_tasks(unseen, static_cast<int>(unseen.worlds.size()) - 1, cfg.val_tasks_per_world,
              0x3000ull + i, "val-unseen");
  }
  save_dataset((out / "val_unseen.jsonl").string(), unseen);

  RunManifest m;
  m.command = "generate";
  m.config = config_to_map(cfg);
  for (const auto& f : files) m.artifacts[f] = hash_file(out / f);
  m.seconds = timer.seconds();
  write_manifest(out, m);
}

inline Dataset load_split_file(const ExperimentConfig& cfg, const std::string& file) {
  const fs::path path = fs::path(cfg.out_dir) / file;
  if (!fs::exists(path))
    throw std::runtime_error("missing " + path.string() + "; run 'generate' first");
  return load_dataset(path.string());
}

// ---- training phases ----

inline void cmd_train_envmodel(const ExperimentConfig& cfg) {
  Stopwatch timer;
  const fs::path out(cfg.out_dir);
  auto ds = load_split_file(cfg, "train.jsonl");
  auto tcfg = cfg.train_config(cfg.env_iterations);
  const auto ecfg = cfg.envmodel_config();

  TrainState resume;
  bool resuming = false;
  const fs::path state_path = out / "envmodel_state.bin";
  if (fs::exists(state_path)) {
    resume = load_train_state(state_path.string(), "envmodel");
    resuming = resume.iteration < tcfg.max_iterations;
  }
  std::vector<EnvTrainRecord> log;
  auto st = pretrain_envmodel(ds, tcfg, ecfg, &log, resuming ? &resume : nullptr);

  save_checkpoint((out / "envmodel.ckpt").string(), "envmodel", st.store);
  save_train_state(state_path.string(), "envmodel", st.store, st.adam, st.iteration);
  {
    std::ofstream os(out / "envmodel_log.jsonl", resuming ? std::ios::app : std::ios::trunc);
    for (const auto& r : log) {
      nlohmann::json j;
      j["iteration"] = r.iteration;
      j["l_transition"] = r.l_transition;
      j["l_reward"] = r.l_reward;
      os << j.dump() << "\n";
    }
    if (!os) throw std::runtime_error("envmodel log write failed");
  }

  RunManifest m;
  m.command = "train-envmodel";
  m.config = config_to_map(cfg);
  for (const char* f : {"envmodel.ckpt", "envmodel_state.bin", "envmodel_log.jsonl"})
    m.artifacts[f] = hash_file(out / f);
  m.seconds = timer.seconds();
  write_manifest(out, m);
}

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::XE: return "xe";
    case TrainMode::ModelFreeRL: return "mfrl";
    case TrainMode::RPA: return "rpa";
  }
  throw std::invalid_argument("unknown train mode");
}

inline TrainMode train_mode_from_string(const std::string& s) {
  if (s == "xe") return TrainMode::XE;
  if (s == "mfrl") return TrainMode::ModelFreeRL;
  if (s == "rpa") return TrainMode::RPA;
  throw std::invalid_argument("unknown mode '" + s + "' (expected xe|mfrl|rpa)");
}

inline std::string policy_stem(TrainMode mode, const std::string& reward) {
  return std::string("policy-") + train_mode_name(mode) +
         (mode == TrainMode::XE ? "" : "-" + reward);
}

inline void cmd_train_policy(const ExperimentConfig& cfg, TrainMode mode) {
  Stopwatch timer;
  const fs::path out(cfg.out_dir);
  auto ds = load_split_file(cfg, "train.jsonl");
  auto tcfg = cfg.train_config(cfg.policy_iterations);
  const auto pcfg = cfg.agent_config();
  const auto ecfg = cfg.envmodel_config();
  const auto lcfg = cfg.lookahead_config();

  ParameterStore env;
  if (mode == TrainMode::RPA) {
    const fs::path env_path = out / "envmodel.ckpt";
    if (!fs::exists(env_path))
      throw std::runtime_error("missing " + env_path.string() +
                               "; run 'train-envmodel' before RPA policy training");
    env = load_checkpoint(env_path.string(), "envmodel");
  }

  const std::string stem = policy_stem(mode, cfg.reward);
  const fs::path state_path = out / (stem + "_state.bin");
  TrainState resume;
  bool resuming = false;
  if (fs::exists(state_path)) {
    resume = load_train_state(state_path.string(), "policy");
    resuming = resume.iteration < tcfg.max_iterations;
  }

  std::vector<PolicyTrainRecord> log;
  auto st = train_policy(ds, mode, cfg.reward_spec(), tcfg, pcfg, lcfg,
                         mode == TrainMode::RPA ? &env : nullptr, ecfg, &log,
                         resuming ? &resume : nullptr);

  save_checkpoint((out / (stem + ".ckpt")).string(), "policy", st.store);
  save_train_state(state_path.string(), "policy", st.store, st.adam, st.iteration);
  {
    std::ofstream os(out / (stem + "_log.jsonl"), resuming ? std::ios::app : std::ios::trunc);
    for (const auto& r : log) {
      nlohmann::json j;
      j["iteration"] = r.iteration;
      j["loss"] = r.loss;
      j["w_sl"] = r.w_sl;
      j["train_sr"] = r.train_sr;
      os << j.dump() << "\n";
    }
    if (!os) throw std::runtime_error("policy log write failed");
  }

  RunManifest m;
  m.command = "train-policy-" + stem;
  m.config = config_to_map(cfg);
  for (const std::string& f : {stem + ".ckpt", stem + "_state.bin", stem + "_log.jsonl"})
    m.artifacts[f] = hash_file(out / f);
  m.seconds = timer.seconds();
  write_manifest(out, m);
}

// ---- evaluation ----

struct EvalRow {
  std::string model;
  std::string split;
  SplitMetrics metrics;
};

inline std::string format_eval_csv(const std::vector<EvalRow>& rows) {
  std::string csv = "model,split,TL,NE,SR,OSR\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.2f,%.2f,%.1f,%.1f\n", r.model.c_str(),
                  r.split.c_str(), r.metrics.tl, r.metrics.ne, 100.0 * r.metrics.sr,
                  100.0 * r.metrics.osr);
    csv += buf;
  }
  return csv;
}

// Evaluates one policy checkpoint over a split; a checkpoint that carries
// look-ahead parameters routes through the action predictor and needs the
// environment model.
inline SplitMetrics evaluate_policy_checkpoint(const ExperimentConfig& cfg,
                                               const ParameterStore& policy,
                                               const ParameterStore* env, const Dataset& ds,
                                               const std::string& split) {
  PolicyRunContext ctx;
  ctx.policy = &policy;
  ctx.pcfg = cfg.agent_config();
  const bool lookahead = policy.params.count("lookahead/pred/l1/w") > 0;
  if (lookahead) {
    if (!env)
      throw std::runtime_error("look-ahead checkpoint needs envmodel.ckpt for evaluation");
    ctx.env = env;
    ctx.ecfg = cfg.envmodel_config();
    ctx.lcfg = cfg.lookahead_config();
  }
  return evaluate_split(ds, split,
                        [&](const WorldGraph& w, const Task& t) {
                          return greedy_trajectory(w, t, ctx, cfg.max_episode_len);
                        },
                        cfg.success_threshold);
}

// Evaluates every policy-*.ckpt in the output directory plus the Shortest
// and Random reference agents on both validation splits.
inline std::vector<EvalRow> cmd_evaluate(const ExperimentConfig& cfg) {
  Stopwatch timer;
  const fs::path out(cfg.out_dir);
  const std::vector<std::pair<std::string, Dataset>> splits = {
      {"val-seen", load_split_file(cfg, "val_seen.jsonl")},
      {"val-unseen", load_split_file(cfg, "val_unseen.jsonl")}};

  ParameterStore env;
  bool have_env = fs::exists(out / "envmodel.ckpt");
  if (have_env) env = load_checkpoint((out / "envmodel.ckpt").string(), "envmodel");

  std::vector<std::string> stems;
  for (const auto& e : fs::directory_iterator(out)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("policy-", 0) == 0 && e.path().extension() == ".ckpt")
      stems.push_back(e.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());

  std::vector<EvalRow> rows;
  for (const auto& [split, ds] : splits) {
    rows.push_back({"shortest", split,
                    evaluate_split(ds, split,
                                   [&](const WorldGraph& w, const Task& t) {
                                     return shortest_trajectory(w, t, cfg.max_episode_len);
                                   },
                                   cfg.success_threshold)});
    std::uint64_t rseed = mix_seed(cfg.seed, fnv1a64(split));
    rows.push_back({"random", split,
                    evaluate_split(ds, split,
                                   [&](const WorldGraph& w, const Task& t) {
                                     return random_trajectory(w, t, ++rseed,
                                                              cfg.max_episode_len);
                                   },
                                   cfg.success_threshold)});
    for (const auto& stem : stems) {
      auto policy = load_checkpoint((out / (stem + ".ckpt")).string(), "policy");
      rows.push_back({stem, split,
                      evaluate_policy_checkpoint(cfg, policy, have_env ? &env : nullptr, ds,
                                                 split)});
    }
  }

  {
    std::ofstream os(out / "results.csv", std::ios::trunc);
    os << format_eval_csv(rows);
    if (!os) throw std::runtime_error("results.csv write failed");
  }
  RunManifest m;
  m.command = "evaluate";
  m.config = config_to_map(cfg);
  m.artifacts["results.csv"] = hash_file(out / "results.csv");
  m.seconds = timer.seconds();
  write_manifest(out, m);
  return rows;
}

// ---- reward ablation (Table 2 analogue) ----

// Trains the model-free policy once per reward variant and tabulates the
// validation metrics per variant.
inline std::vector<EvalRow> cmd_ablate_rewards(const ExperimentConfig& cfg) {
  Stopwatch timer;
  const fs::path out(cfg.out_dir);
  const std::vector<std::pair<std::string, Dataset>> splits = {
      {"val-seen", load_split_file(cfg, "val_seen.jsonl")},
      {"val-unseen", load_split_file(cfg, "val_unseen.jsonl")}};

  std::vector<EvalRow> rows;
  for (const char* variant : {"gd", "succ", "disc", "disc-succ"}) {
    ExperimentConfig vcfg = cfg;
    vcfg.reward = variant;
    cmd_train_policy(vcfg, TrainMode::ModelFreeRL);
    const std::string stem = policy_stem(TrainMode::ModelFreeRL, variant);
    auto policy = load_checkpoint((out / (stem + ".ckpt")).string(), "policy");
    for (const auto& [split, ds] : splits)
      rows.push_back({stem, split,
                      evaluate_policy_checkpoint(vcfg, policy, nullptr, ds, split)});
  }

  {
    std::ofstream os(out / "ablation.csv", std::ios::trunc);
    os << format_eval_csv(rows);
    if (!os) throw std::runtime_error("ablation.csv write failed");
  }
  RunManifest m;
  m.command = "ablate-rewards";
  m.config = config_to_map(cfg);
  m.artifacts["ablation.csv"] = hash_file(out / "ablation.csv");
  m.seconds = timer.seconds();
  write_manifest(out, m);
  return rows;
}

}  // namespace rpa

// Command-line front end: generate worlds, train the environment model and
// policies, evaluate checkpoints, and run the reward ablation.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rpa/harness.hpp"

namespace {

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_file, "key=value config file");
  cmd->add_option("--set", opts.overrides, "override a config key (key=value), repeatable");
  cmd->add_option("--out", opts.out, "output directory (default from config: run)");
}

rpa::ExperimentConfig resolve(const CommonOpts& opts) {
  rpa::ExperimentConfig cfg;
  if (!opts.config_file.empty()) rpa::load_config_file(cfg, opts.config_file);
  for (const auto& s : opts.overrides) rpa::apply_override(cfg, s);
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"instruction-following navigation: worlds, training, evaluation"};
  app.require_subcommand(1);

  CommonOpts gen_opts, env_opts, pol_opts, eval_opts, abl_opts;
  bool overwrite = false;
  std::string mode = "rpa";
  std::string reward;

  auto* gen = app.add_subcommand("generate", "write train/val-seen/val-unseen datasets");
  add_common(gen, gen_opts);
  gen->add_flag("--overwrite", overwrite, "replace existing dataset files");

  auto* env = app.add_subcommand("train-envmodel", "pretrain the environment model");
  add_common(env, env_opts);

  auto* pol = app.add_subcommand("train-policy", "train a navigation policy");
  add_common(pol, pol_opts);
  pol->add_option("--mode", mode, "xe | mfrl | rpa")->default_str("rpa");
  pol->add_option("--reward", reward, "gd | succ | disc | disc-succ");

  auto* ev = app.add_subcommand("evaluate", "evaluate checkpoints, write results.csv");
  add_common(ev, eval_opts);

  auto* abl = app.add_subcommand("ablate-rewards",
                                 "train all four reward variants, write ablation.csv");
  add_common(abl, abl_opts);

  CommonOpts cfg_opts;
  auto* pc = app.add_subcommand("print-config",
                                "print every config key with its resolved value");
  add_common(pc, cfg_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      rpa::cmd_generate(resolve(gen_opts), overwrite);
    } else if (env->parsed()) {
      rpa::cmd_train_envmodel(resolve(env_opts));
    } else if (pol->parsed()) {
      auto cfg = resolve(pol_opts);
      if (!reward.empty()) cfg.reward = reward;
      rpa::reward_variant_from_string(cfg.reward);  // validate early
      rpa::cmd_train_policy(cfg, rpa::train_mode_from_string(mode));
    } else if (ev->parsed()) {
      auto rows = rpa::cmd_evaluate(resolve(eval_opts));
      std::cout << rpa::format_eval_csv(rows);
    } else if (abl->parsed()) {
      auto rows = rpa::cmd_ablate_rewards(resolve(abl_opts));
      std::cout << rpa::format_eval_csv(rows);
    } else if (pc->parsed()) {
      std::cout << rpa::config_to_string(resolve(cfg_opts));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

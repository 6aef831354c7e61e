#pragma once

// Training loops: environment-model pretraining under a randomized teacher,
// mixed supervised + REINFORCE policy training with an annealed supervision
// weight, the four episode-reward variants, and greedy evaluation.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpa/checkpoint.hpp"
#include "rpa/lookahead.hpp"
#include "rpa/world_io.hpp"

namespace rpa {

enum class RewardVariant { GlobalDistance, Success, Discounted, DiscountedAndSuccess };

struct RewardSpec {
  RewardVariant variant = RewardVariant::Discounted;
  real gamma = real(0.95);
};

inline RewardVariant reward_variant_from_string(const std::string& s) {
  if (s == "gd") return RewardVariant::GlobalDistance;
  if (s == "succ") return RewardVariant::Success;
  if (s == "disc") return RewardVariant::Discounted;
  if (s == "disc-succ") return RewardVariant::DiscountedAndSuccess;
  throw std::invalid_argument("unknown reward variant: " + s);
}

inline const char* reward_variant_name(RewardVariant v) {
  switch (v) {
    case RewardVariant::GlobalDistance: return "gd";
    case RewardVariant::Success: return "succ";
    case RewardVariant::Discounted: return "disc";
    case RewardVariant::DiscountedAndSuccess: return "disc-succ";
  }
  throw std::invalid_argument("unknown reward variant");
}

enum class TrainMode { XE, ModelFreeRL, RPA };

struct TrainConfig {
  int batch_size = 16;
  int max_episode_len = 20;
  long max_iterations = 100;
  real lr_policy = real(1e-4);
  real lr_envmodel = real(1e-5);
  real clip_norm = real(5);
  real weight_decay = real(0.0005);
  real p_human = real(0.95);
  real w_floor = real(0.15);
  long schedule_T = 0;  // 0 -> max_iterations / 5
  std::uint64_t seed = 1;
  double success_threshold = 3.0;
  bool reward_baseline = false;  // running-mean baseline, off by default

  void validate() const {
    if (batch_size < 1 || max_episode_len < 1 || max_iterations < 1)
      throw std::invalid_argument("train config: sizes must be positive");
    if (lr_policy <= 0 || lr_envmodel <= 0 || clip_norm <= 0 || weight_decay < 0)
      throw std::invalid_argument("train config: rates must be positive");
    if (p_human < 0 || p_human > 1 || w_floor < 0 || w_floor > 1)
      throw std::invalid_argument("train config: p_human and w_floor must be in [0,1]");
  }
  long schedule_temperature() const {
    return schedule_T > 0 ? schedule_T : std::max<long>(1, max_iterations / 5);
  }
};

struct EpisodeStep {
  Pose pose;                // pose before the action
  std::vector<real> state;  // observation at pose
  Action action = Action::Stop;
  real reward = 0;          // immediate reward of this transition
  ad::ValueRef logp;        // log pi(action), null in teacher rollouts
  ad::ValueRef demo_logp;   // log pi(teacher action at pose), null in teacher rollouts
};

struct Episode {
  std::vector<EpisodeStep> steps;
  std::vector<Pose> visited;  // start pose followed by each successor
  Pose final_pose;
  bool ended = false;  // Stop taken (as opposed to truncation)
};

inline real immediate_reward(const WorldGraph& w, const Pose& from, const Pose& to, int target) {
  return static_cast<real>(distance_to_target(w, from.node, target) -
                           distance_to_target(w, to.node, target));
}

// Randomized-teacher rollout for environment-model training: at each step the
// demonstration-aligned action (recomputed from the current pose, so the
// teacher recovers after deviations) with probability p_human, else uniform
// random. Records true next features and true immediate rewards.
inline Episode teacher_rollout(const WorldGraph& w, const Task& task, real p_human,
                               std::uint64_t seed, int max_len = 20) {
  Rng rng(splitmix64(seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any(0, kNumActions - 1);
  Episode ep;
  Pose pose = task.start;
  ep.visited.push_back(pose);
  for (int t = 0; t < max_len; ++t) {
    Action a = unit(rng) < p_human ? teacher_action(w, pose, task.target)
                                   : static_cast<Action>(any(rng));
    Pose next = step(w, pose, a);
    ep.steps.push_back({pose, observe(w, pose), a,
                        immediate_reward(w, pose, next, task.target), nullptr, nullptr});
    pose = next;
    ep.visited.push_back(pose);
    if (a == Action::Stop) {
      ep.ended = true;
      break;
    }
  }
  ep.final_pose = pose;
  return ep;
}

inline std::vector<Transition> episode_transitions(const WorldGraph& w, const Episode& ep) {
  std::vector<Transition> out;
  for (std::size_t i = 0; i < ep.steps.size(); ++i)
    out.push_back({ep.steps[i].state, ep.steps[i].action, observe(w, ep.visited[i + 1]),
                   ep.steps[i].reward});
  return out;
}

// ---- episode rewards ----

inline bool episode_success(const WorldGraph& w, const Task& task, const Episode& ep,
                            double threshold) {
  return distance_to_target(w, ep.final_pose.node, task.target) < threshold;
}

inline std::vector<real> assign_rewards(const WorldGraph& w, const Task& task, const Episode& ep,
                                        const RewardSpec& spec, double success_threshold = 3.0) {
  if (spec.gamma <= 0 || spec.gamma >= 1)
    throw std::invalid_argument("assign_rewards: gamma must be in (0,1)");
  const std::size_t n = ep.steps.size();
  std::vector<real> out(n, 0);
  if (n == 0) return out;
  switch (spec.variant) {
    case RewardVariant::GlobalDistance: {
      const real r = static_cast<real>(distance_to_target(w, ep.visited.front().node, task.target) -
                                       distance_to_target(w, ep.final_pose.node, task.target));
      std::fill(out.begin(), out.end(), r);
      return out;
    }
    case RewardVariant::Success: {
      const real r = episode_success(w, task, ep, success_threshold) ? real(1) : real(0);
      std::fill(out.begin(), out.end(), r);
      return out;
    }
    case RewardVariant::Discounted:
    case RewardVariant::DiscountedAndSuccess: {
      std::vector<real> imm(n);
      for (std::size_t i = 0; i < n; ++i) imm[i] = ep.steps[i].reward;
      if (spec.variant == RewardVariant::DiscountedAndSuccess &&
          episode_success(w, task, ep, success_threshold))
        imm.back() += real(1);
      out[n - 1] = imm[n - 1];
      for (std::size_t i = n - 1; i-- > 0;) out[i] = imm[i] + spec.gamma * out[i + 1];
      return out;
    }
  }
  throw std::invalid_argument("assign_rewards: unknown variant");
}

// ---- supervision weight schedule ----

inline real schedule_w(long iteration, long T, real w_floor) {
  if (T <= 0) throw std::invalid_argument("schedule_w: T must be positive");
  if (iteration < 0) throw std::invalid_argument("schedule_w: iteration must be >= 0");
  const real w = real(0.1) + real(0.9) * std::exp(-static_cast<real>(iteration) /
                                                  static_cast<real>(T));
  return std::max(w_floor, w);
}

// ---- mixed loss ----

// loss = -(w * J_sl + (1-w) * J_rl) with J_sl the mean teacher-action
// log-likelihood and J_rl the REINFORCE sum; rewards enter as constants.
inline ad::ValueRef mixed_loss(const Episode& ep, const std::vector<real>& rewards, real w_sl) {
  if (w_sl < 0 || w_sl > 1) throw std::invalid_argument("mixed_loss: w_sl must be in [0,1]");
  if (ep.steps.empty()) throw std::invalid_argument("mixed_loss: empty episode");
  if (rewards.size() != ep.steps.size())
    throw std::invalid_argument("mixed_loss: reward count mismatch");
  ad::ValueRef j_sl, j_rl;
  for (std::size_t i = 0; i < ep.steps.size(); ++i) {
    const auto& st = ep.steps[i];
    if (!st.logp || !st.demo_logp)
      throw std::invalid_argument("mixed_loss: episode lacks log-probabilities");
    j_sl = j_sl ? ad::add(j_sl, st.demo_logp) : st.demo_logp;
    auto term = ad::scale(st.logp, rewards[i]);
    j_rl = j_rl ? ad::add(j_rl, term) : term;
  }
  j_sl = ad::scale(j_sl, real(1) / static_cast<real>(ep.steps.size()));
  return ad::sub(ad::scale(j_sl, -w_sl), ad::scale(j_rl, real(1) - w_sl));
}

// ---- policy episode rollout ----

// Null env store means model-free decoding; with an env store the 5 non-Stop
// look-ahead rollouts run and the action predictor produces the distribution.
struct PolicyRunContext {
  const ParameterStore* policy = nullptr;
  AgentConfig pcfg;
  const ParameterStore* env = nullptr;
  EnvModelConfig ecfg;
  LookaheadConfig lcfg;
};

// Samples (or greedily selects) actions from the policy in the real world,
// recording log-probs of both the taken and the teacher action at each pose.
inline Episode run_policy_episode(const WorldGraph& w, const Task& task,
                                  const PolicyRunContext& ctx, Rng& rng, bool train,
                                  bool sample, int max_len) {
  Episode ep;
  auto enc = encode_instruction(*ctx.policy, ctx.pcfg, task.instruction);
  auto state = init_policy_state(ctx.pcfg);
  Pose pose = task.start;
  ep.visited.push_back(pose);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < max_len; ++t) {
    auto obs = ad::vector_value(observe(w, pose));
    auto snap = snapshot(state);
    auto out = decode_step(*ctx.policy, ctx.pcfg, state, enc, obs, rng, train);
    ad::ValueRef logits = out.logits;
    ad::ValueRef probs = out.probs;
    if (ctx.env) {
      std::vector<RolloutEncoding> encs;
      for (int a = 0; a < ctx.lcfg.branches; ++a) {
        auto steps = rollout(*ctx.env, ctx.ecfg, *ctx.policy, ctx.pcfg, snap, enc, obs,
                             static_cast<Action>(a), ctx.lcfg.depth);
        encs.push_back(encode_rollout(*ctx.policy, ctx.lcfg, steps, a));
      }
      auto pred = predict_action(*ctx.policy, ctx.lcfg, out.feature, encs, out.logits);
      logits = pred.logits;
      probs = pred.probs;
    }
    int action = 0;
    if (sample) {
      double u = unit(rng), acc = 0;
      for (int a = 0; a < kNumActions; ++a) {
        acc += probs->data[a];
        if (u < acc) {
          action = a;
          break;
        }
        if (a == kNumActions - 1) action = a;
      }
    } else {
      for (int a = 1; a < kNumActions; ++a)
        if (probs->data[a] > probs->data[action]) action = a;
    }

    EpisodeStep st;
    st.pose = pose;
    st.state = obs->data;
    st.action = static_cast<Action>(action);
    if (train) {
      st.logp = ad::scale(ad::nll_logits(logits, action), real(-1));
      const int demo = static_cast<int>(teacher_action(w, pose, task.target));
      st.demo_logp = ad::scale(ad::nll_logits(logits, demo), real(-1));
    }
    Pose next = step(w, pose, st.action);
    st.reward = immediate_reward(w, pose, next, task.target);
    ep.steps.push_back(std::move(st));
    commit_action(state, action);
    pose = next;
    ep.visited.push_back(pose);
    if (action == kStopAction) {
      ep.ended = true;
      break;
    }
  }
  ep.final_pose = pose;
  return ep;
}

// ---- environment-model pretraining ----

struct EnvTrainRecord {
  long iteration = 0;
  double l_transition = 0;
  double l_reward = 0;
};

inline TrainState pretrain_envmodel(const Dataset& ds, const TrainConfig& tcfg,
                                    const EnvModelConfig& ecfg,
                                    std::vector<EnvTrainRecord>* log = nullptr,
                                    const TrainState* resume = nullptr) {
  tcfg.validate();
  if (ds.tasks.empty()) throw std::invalid_argument("pretrain_envmodel: no tasks");
  std::vector<int> train_ids;
  for (std::size_t i = 0; i < ds.tasks.size(); ++i)
    if (ds.tasks[i].split == "train") train_ids.push_back(static_cast<int>(i));
  if (train_ids.empty()) throw std::invalid_argument("pretrain_envmodel: no train tasks");

  TrainState st;
  if (resume) {
    st = *resume;
  } else {
    Rng init_rng(mix_seed(tcfg.seed, 0x5E11ull));
    init_envmodel_params(st.store, ecfg, init_rng);
  }
  st.adam.lr = tcfg.lr_envmodel;
  st.adam.weight_decay = tcfg.weight_decay;

  for (; st.iteration < tcfg.max_iterations; ++st.iteration) {
    std::vector<Transition> batch;
    for (int b = 0; b < tcfg.batch_size; ++b) {
      const std::uint64_t es = mix_seed(tcfg.seed, static_cast<std::uint64_t>(st.iteration),
                                        static_cast<std::uint64_t>(b));
      const int ti = train_ids[es % train_ids.size()];
      const WorldGraph& w = ds.worlds[ds.task_world[ti]];
      auto ep = teacher_rollout(w, ds.tasks[ti], tcfg.p_human, mix_seed(es, 0x7EACull),
                                tcfg.max_episode_len);
      auto tr = episode_transitions(w, ep);
      batch.insert(batch.end(), tr.begin(), tr.end());
    }
    st.store.zero_grad();
    auto [lt, lr] = env_model_losses(st.store, ecfg, batch);
    if (log) log->push_back({st.iteration, lt->data[0], lr->data[0]});
    ad::backward(ad::add(ad::scale(lt, kTransitionLossWeight), ad::scale(lr, kRewardLossWeight)));
    clip_global_norm(st.store, tcfg.clip_norm);
    adam_step(st.store, st.adam);
  }
  return st;
}

// ---- policy training ----

struct PolicyTrainRecord {
  long iteration = 0;
  double loss = 0;
  double w_sl = 0;
  double train_sr = 0;
};

inline TrainState train_policy(const Dataset& ds, TrainMode mode, const RewardSpec& rspec,
                               const TrainConfig& tcfg, const AgentConfig& pcfg,
                               const LookaheadConfig& lcfg,
                               const ParameterStore* env_model, const EnvModelConfig& ecfg,
                               std::vector<PolicyTrainRecord>* log = nullptr,
                               const TrainState* resume = nullptr) {
  tcfg.validate();
  if (mode == TrainMode::RPA && !env_model)
    throw std::invalid_argument("train_policy: RPA mode requires a pretrained environment model");
  std::vector<int> train_ids;
  for (std::size_t i = 0; i < ds.tasks.size(); ++i)
    if (ds.tasks[i].split == "train") train_ids.push_back(static_cast<int>(i));
  if (train_ids.empty()) throw std::invalid_argument("train_policy: no train tasks");

  TrainState st;
  if (resume) {
    st = *resume;
  } else {
    Rng init_rng(mix_seed(tcfg.seed, 0x9017ull));
    init_policy_params(st.store, pcfg, init_rng);
    if (mode == TrainMode::RPA)
      init_lookahead_params(st.store, lcfg, pcfg.feature_dim, pcfg.hidden, init_rng);
  }
  st.adam.lr = tcfg.lr_policy;
  st.adam.weight_decay = tcfg.weight_decay;

  PolicyRunContext ctx;
  ctx.policy = &st.store;
  ctx.pcfg = pcfg;
  if (mode == TrainMode::RPA) {
    ctx.env = env_model;
    ctx.ecfg = ecfg;
    ctx.lcfg = lcfg;
  }
  const long T = tcfg.schedule_temperature();
  real baseline = 0;
  bool baseline_set = false;

  for (; st.iteration < tcfg.max_iterations; ++st.iteration) {
    const real w = schedule_w(st.iteration, T, tcfg.w_floor);
    st.store.zero_grad();
    ad::ValueRef total;
    int successes = 0;
    real batch_reward_mean = 0;
    for (int b = 0; b < tcfg.batch_size; ++b) {
      const std::uint64_t es = mix_seed(tcfg.seed, static_cast<std::uint64_t>(st.iteration),
                                        static_cast<std::uint64_t>(b));
      const int ti = train_ids[es % train_ids.size()];
      const Task& task = ds.tasks[ti];
      const WorldGraph& w_graph = ds.worlds[ds.task_world[ti]];
      Rng erng(splitmix64(es));
      ad::ValueRef loss;
      if (mode == TrainMode::XE) {
        // Teacher forcing along the demonstration.
        auto enc = encode_instruction(st.store, pcfg, task.instruction);
        auto pstate = init_policy_state(pcfg);
        Pose pose = task.start;
        ad::ValueRef nll;
        for (Action a : task.demonstration) {
          auto out = decode_step(st.store, pcfg, pstate, enc, ad::vector_value(observe(w_graph, pose)),
                                 erng, true);
          auto term = ad::nll_logits(out.logits, static_cast<int>(a));
          nll = nll ? ad::add(nll, term) : term;
          commit_action(pstate, static_cast<int>(a));
          pose = step(w_graph, pose, a);
        }
        loss = ad::scale(nll, real(1) / static_cast<real>(task.demonstration.size()));
        if (distance_to_target(w_graph, pose.node, task.target) < tcfg.success_threshold)
          ++successes;
      } else {
        auto ep = run_policy_episode(w_graph, task, ctx, erng, true, true, tcfg.max_episode_len);
        if (ep.steps.empty()) continue;
        auto rewards = assign_rewards(w_graph, task, ep, rspec, tcfg.success_threshold);
        real mean_r = 0;
        for (real r : rewards) mean_r += r;
        mean_r /= static_cast<real>(rewards.size());
        batch_reward_mean += mean_r / static_cast<real>(tcfg.batch_size);
        if (tcfg.reward_baseline && baseline_set)
          for (real& r : rewards) r -= baseline;
        loss = mixed_loss(ep, rewards, w);
        if (episode_success(w_graph, task, ep, tcfg.success_threshold)) ++successes;
      }
      total = total ? ad::add(total, loss) : loss;
    }
    if (!total) continue;
    total = ad::scale(total, real(1) / static_cast<real>(tcfg.batch_size));
    if (log)
      log->push_back({st.iteration, total->data[0], w,
                      static_cast<double>(successes) / tcfg.batch_size});
    ad::backward(total);
    clip_global_norm(st.store, tcfg.clip_norm);
    adam_step(st.store, st.adam);
    if (tcfg.reward_baseline) {
      baseline = baseline_set ? real(0.9) * baseline + real(0.1) * batch_reward_mean
                              : batch_reward_mean;
      baseline_set = true;
    }
  }
  return st;
}

// ---- evaluation ----

struct SplitMetrics {
  double tl = 0;   // mean trajectory length
  double ne = 0;   // mean navigation error
  double sr = 0;   // success rate in [0,1]
  double osr = 0;  // oracle success rate in [0,1]
  int count = 0;
};

// Aggregates metrics over one split; roll(world, task) must return the
// visited pose sequence starting at task.start.
template <typename Rollout>
SplitMetrics evaluate_split(const Dataset& ds, const std::string& split, Rollout&& roll,
                            double success_threshold = 3.0) {
  SplitMetrics agg;
  for (std::size_t i = 0; i < ds.tasks.size(); ++i) {
    if (ds.tasks[i].split != split) continue;
    const WorldGraph& w = ds.worlds[ds.task_world[i]];
    auto visited = roll(w, ds.tasks[i]);
    auto m = evaluate_trajectory(w, ds.tasks[i], visited, success_threshold);
    agg.tl += m.trajectory_length;
    agg.ne += m.nav_error;
    agg.sr += m.success ? 1 : 0;
    agg.osr += m.oracle_success ? 1 : 0;
    ++agg.count;
  }
  if (agg.count == 0) throw std::invalid_argument("evaluate_split: split '" + split + "' is empty");
  agg.tl /= agg.count;
  agg.ne /= agg.count;
  agg.sr /= agg.count;
  agg.osr /= agg.count;
  return agg;
}

// Greedy (argmax) policy rollout for evaluation.
inline std::vector<Pose> greedy_trajectory(const WorldGraph& w, const Task& task,
                                           const PolicyRunContext& ctx, int max_len = 20) {
  Rng rng(0);  // unused: eval mode, greedy selection
  auto ep = run_policy_episode(w, task, ctx, rng, false, false, max_len);
  return ep.visited;
}

// Shortest-path oracle agent.
inline std::vector<Pose> shortest_trajectory(const WorldGraph& w, const Task& task,
                                             int max_len = 20) {
  std::vector<Pose> visited{task.start};
  Pose pose = task.start;
  for (int t = 0; t < max_len; ++t) {
    Action a = teacher_action(w, pose, task.target);
    pose = step(w, pose, a);
    visited.push_back(pose);
    if (a == Action::Stop) break;
  }
  return visited;
}

inline std::vector<Pose> random_trajectory(const WorldGraph& w, const Task& task,
                                           std::uint64_t seed, int max_len = 20) {
  Rng rng(splitmix64(seed));
  std::vector<Pose> visited{task.start};
  Pose pose = task.start;
  for (int t = 0; t < max_len; ++t) {
    Action a = baseline_random(rng);
    pose = step(w, pose, a);
    visited.push_back(pose);
    if (a == Action::Stop) break;
  }
  return visited;
}

}  // namespace rpa

#pragma once

// Learned environment model: predicts the next state feature and the
// immediate reward from (state, action). Parameters live under "envmodel/"
// in their own store so policy and env-model checkpoints never mix.

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpa/agent.hpp"
#include "rpa/autodiff.hpp"
#include "rpa/optim.hpp"

namespace rpa {

struct EnvModelConfig {
  int feature_dim = 64;     // 2048 at full scale
  int action_embed = 32;    // 256 at full scale
  int proj_width = 64;      // 512 at full scale
  int trans_hidden = 64;    // 256 at full scale (first MLP width)
  int reward_hidden = 32;   // 256 at full scale
  // Optional language conditioning of the projection input (off by default;
  // the model is state-and-action only otherwise).
  bool condition_instruction = false;
  int lang_embed = 16;
  int vocab = static_cast<int>(instruction_vocab().size());
};

struct Prediction {
  ad::ValueRef next_state;  // (0,1)^F, sigmoid output
  ad::ValueRef reward;      // unsquashed scalar
};

inline void init_envmodel_params(ParameterStore& store, const EnvModelConfig& cfg, Rng& rng,
                                 const std::string& prefix = "envmodel/") {
  const real k = real(1) / std::sqrt(static_cast<real>(cfg.proj_width));
  store.add(prefix + "action_embed", ad::param({kNumActions, cfg.action_embed}, rng, k));
  int in = cfg.feature_dim + cfg.action_embed;
  if (cfg.condition_instruction) {
    store.add(prefix + "lang/embed", ad::param({cfg.vocab, cfg.lang_embed}, rng, k));
    in += cfg.lang_embed;
  }
  store.add(prefix + "proj/w", ad::param({cfg.proj_width, in}, rng, k));
  store.add(prefix + "proj/b", ad::param({cfg.proj_width}, rng, k));
  store.add(prefix + "trans/l1/w", ad::param({cfg.trans_hidden, cfg.proj_width}, rng, k));
  store.add(prefix + "trans/l1/b", ad::param({cfg.trans_hidden}, rng, k));
  store.add(prefix + "trans/l2/w", ad::param({cfg.feature_dim, cfg.trans_hidden}, rng, k));
  store.add(prefix + "trans/l2/b", ad::param({cfg.feature_dim}, rng, k));
  store.add(prefix + "rew/l1/w", ad::param({cfg.reward_hidden, cfg.proj_width}, rng, k));
  store.add(prefix + "rew/l1/b", ad::param({cfg.reward_hidden}, rng, k));
  store.add(prefix + "rew/l2/w", ad::param({1, cfg.reward_hidden}, rng, k));
  store.add(prefix + "rew/l2/b", ad::param({1}, rng, k));
}

// Mean-pooled instruction embedding for the optional language pathway.
inline ad::ValueRef pool_instruction(const ParameterStore& store, const EnvModelConfig& cfg,
                                     const std::vector<int>& tokens,
                                     const std::string& prefix = "envmodel/") {
  if (tokens.empty()) throw std::invalid_argument("pool_instruction: empty instruction");
  const auto& embed = store.at(prefix + "lang/embed");
  std::vector<ad::ValueRef> rows;
  for (int t : tokens) rows.push_back(ad::embedding(embed, t));
  auto sum = rows[0];
  for (std::size_t i = 1; i < rows.size(); ++i) sum = ad::add(sum, rows[i]);
  return ad::scale(sum, real(1) / static_cast<real>(rows.size()));
}

inline Prediction envmodel_predict(const ParameterStore& store, const EnvModelConfig& cfg,
                                   const ad::ValueRef& state, Action action,
                                   const ad::ValueRef& pooled_lang = nullptr,
                                   const std::string& prefix = "envmodel/") {
  if (state->shape != std::vector<int>{cfg.feature_dim})
    throw std::invalid_argument("envmodel_predict: state dimension mismatch");
  auto a = ad::embedding(store.at(prefix + "action_embed"), static_cast<int>(action));
  std::vector<ad::ValueRef> parts{state, a};
  if (cfg.condition_instruction) {
    if (!pooled_lang)
      throw std::invalid_argument("envmodel_predict: language conditioning enabled "
                                  "but no pooled instruction given");
    parts.push_back(pooled_lang);
  }
  auto z = ad::relu(ad::linear(store.at(prefix + "proj/w"), ad::concat(parts),
                               store.at(prefix + "proj/b")));
  auto t1 = ad::relu(ad::linear(store.at(prefix + "trans/l1/w"), z,
                                store.at(prefix + "trans/l1/b")));
  Prediction out;
  out.next_state = ad::sigmoid(
      ad::linear(store.at(prefix + "trans/l2/w"), t1, store.at(prefix + "trans/l2/b")));
  auto r1 = ad::relu(ad::linear(store.at(prefix + "rew/l1/w"), z,
                                store.at(prefix + "rew/l1/b")));
  out.reward = ad::linear(store.at(prefix + "rew/l2/w"), r1, store.at(prefix + "rew/l2/b"));
  return out;
}

struct Transition {
  std::vector<real> state;
  Action action = Action::Stop;
  std::vector<real> next_state;
  real reward = 0;
  const std::vector<int>* instruction = nullptr;  // only read when conditioning is on
};

// Combined training loss is 1 * l_transition + 0.001 * l_reward.
constexpr real kTransitionLossWeight = real(1);
constexpr real kRewardLossWeight = real(0.001);

inline std::pair<ad::ValueRef, ad::ValueRef> env_model_losses(
    const ParameterStore& store, const EnvModelConfig& cfg,
    const std::vector<Transition>& batch, const std::string& prefix = "envmodel/") {
  if (batch.empty()) throw std::invalid_argument("env_model_losses: empty batch");
  ad::ValueRef lt, lr;
  for (const auto& tr : batch) {
    ad::ValueRef lang;
    if (cfg.condition_instruction && tr.instruction)
      lang = pool_instruction(store, cfg, *tr.instruction, prefix);
    auto pred = envmodel_predict(store, cfg, ad::vector_value(tr.state), tr.action, lang, prefix);
    auto t = ad::mse(pred.next_state, ad::vector_value(tr.next_state));
    auto r = ad::mse(pred.reward, ad::scalar(tr.reward));
    lt = lt ? ad::add(lt, t) : t;
    lr = lr ? ad::add(lr, r) : r;
  }
  const real inv = real(1) / static_cast<real>(batch.size());
  return {ad::scale(lt, inv), ad::scale(lr, inv)};
}

}  // namespace rpa

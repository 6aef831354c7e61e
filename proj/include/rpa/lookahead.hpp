#pragma once

// Model-based path: per-action depth-m imagined rollouts through the
// environment model, an LSTM trajectory encoder, and the action predictor
// that fuses the model-free feature with all rollout encodings.

#include <stdexcept>
#include <string>
#include <vector>

#include "rpa/agent.hpp"
#include "rpa/envmodel.hpp"

namespace rpa {

struct LookaheadConfig {
  int depth = 2;            // m
  int branches = kNumActions - 1;  // one rollout per non-Stop action
  int encoder_hidden = 32;  // 256 at full scale
  int pred_hidden1 = 64;    // 512 at full scale
  int pred_hidden2 = 32;    // 256 at full scale
};

struct RolloutStep {
  ad::ValueRef state;   // predicted s'
  ad::ValueRef reward;  // predicted r', scalar
};

struct RolloutEncoding {
  ad::ValueRef tau;
  int branch_action = 0;
};

inline void init_lookahead_params(ParameterStore& store, const LookaheadConfig& cfg,
                                  int feature_dim, int policy_hidden, Rng& rng,
                                  const std::string& prefix = "lookahead/") {
  const real k = real(1) / std::sqrt(static_cast<real>(cfg.encoder_hidden));
  store.add(prefix + "enc/w_ih", ad::param({4 * cfg.encoder_hidden, feature_dim + 1}, rng, k));
  store.add(prefix + "enc/w_hh", ad::param({4 * cfg.encoder_hidden, cfg.encoder_hidden}, rng, k));
  auto b = store.add(prefix + "enc/bias", ad::param({4 * cfg.encoder_hidden}, rng, k));
  for (int i = cfg.encoder_hidden; i < 2 * cfg.encoder_hidden; ++i) b->data[i] = real(1);

  const int in = cfg.encoder_hidden * cfg.branches + 2 * policy_hidden;
  const real kp = real(1) / std::sqrt(static_cast<real>(cfg.pred_hidden1));
  store.add(prefix + "pred/l1/w", ad::param({cfg.pred_hidden1, in}, rng, kp));
  store.add(prefix + "pred/l1/b", ad::param({cfg.pred_hidden1}, rng, kp));
  store.add(prefix + "pred/l2/w", ad::param({cfg.pred_hidden2, cfg.pred_hidden1}, rng, kp));
  store.add(prefix + "pred/l2/b", ad::param({cfg.pred_hidden2}, rng, kp));
  store.add(prefix + "pred/l3/w", ad::param({kNumActions, cfg.pred_hidden2}, rng, kp));
  store.add(prefix + "pred/l3/b", ad::param({kNumActions}, rng, kp));
}

// Depth-m imagined rollout. Step 1 applies first_action; later imagined
// actions are the look-ahead policy's argmax on the previous predicted state.
// Only the predictor is ever queried; the real world is not touched.
// Predictor: (state, action) -> RolloutStep.
template <typename Predictor>
std::vector<RolloutStep> rollout_with(Predictor&& predict, const ParameterStore& policy_store,
                                      const AgentConfig& policy_cfg,
                                      const PolicyStateSnapshot& policy_state,
                                      const EncodedInstruction& enc, const ad::ValueRef& s_t,
                                      Action first_action, int m) {
  if (m < 1) throw std::invalid_argument("rollout: depth must be >= 1");
  std::vector<RolloutStep> steps;
  PolicyState la_state = restore(policy_state, policy_cfg);
  Rng dummy(0);  // dropout is inactive in imagination (eval mode)
  ad::ValueRef state = s_t;
  Action action = first_action;
  for (int i = 0; i < m; ++i) {
    RolloutStep pred = predict(state, action);
    steps.push_back(pred);
    if (i + 1 < m) {
      commit_action(la_state, static_cast<int>(action));
      auto out = decode_step(policy_store, policy_cfg, la_state, enc, pred.state, dummy,
                             /*train=*/false);
      int best = 0;
      for (int a = 1; a < kNumActions; ++a)
        if (out.probs->data[a] > out.probs->data[best]) best = a;
      action = static_cast<Action>(best);
      state = pred.state;
    }
  }
  return steps;
}

inline std::vector<RolloutStep> rollout(const ParameterStore& env_store,
                                        const EnvModelConfig& env_cfg,
                                        const ParameterStore& policy_store,
                                        const AgentConfig& policy_cfg,
                                        const PolicyStateSnapshot& policy_state,
                                        const EncodedInstruction& enc, const ad::ValueRef& s_t,
                                        Action first_action, int m,
                                        const ad::ValueRef& pooled_lang = nullptr) {
  auto predict = [&](const ad::ValueRef& state, Action action) -> RolloutStep {
    auto p = envmodel_predict(env_store, env_cfg, state, action, pooled_lang);
    return {p.next_state, p.reward};
  };
  return rollout_with(predict, policy_store, policy_cfg, policy_state, enc, s_t, first_action, m);
}

// LSTM over concat(predicted state, predicted reward); the encoding is the
// final hidden vector.
inline RolloutEncoding encode_rollout(const ParameterStore& store, const LookaheadConfig& cfg,
                                      const std::vector<RolloutStep>& steps, int branch_action,
                                      const std::string& prefix = "lookahead/") {
  if (steps.empty()) throw std::invalid_argument("encode_rollout: empty rollout");
  ad::LstmGates gates{store.at(prefix + "enc/w_ih"), store.at(prefix + "enc/w_hh"),
                      store.at(prefix + "enc/bias")};
  ad::LstmState st{ad::make_value({cfg.encoder_hidden}), ad::make_value({cfg.encoder_hidden})};
  for (const auto& s : steps) st = ad::lstm_step(gates, ad::concat({s.state, s.reward}), st);
  return {st.h, branch_action};
}

struct PredictorOutput {
  ad::ValueRef logits;
  ad::ValueRef probs;
};

// Fuses [h_t; c_t] with the rollout encodings, which must arrive in
// canonical branch order (action id ascending). When model_free_logits is
// provided the fused network outputs a correction that is added to those
// logits, so an untrained fusion head starts from the base policy's decision.
inline PredictorOutput predict_action(const ParameterStore& store, const LookaheadConfig& cfg,
                                      const ad::ValueRef& model_free_feature,
                                      const std::vector<RolloutEncoding>& encodings,
                                      const ad::ValueRef& model_free_logits = nullptr,
                                      const std::string& prefix = "lookahead/") {
  if (static_cast<int>(encodings.size()) != cfg.branches)
    throw std::invalid_argument("predict_action: expected " + std::to_string(cfg.branches) +
                                " rollout encodings, got " + std::to_string(encodings.size()));
  std::vector<ad::ValueRef> parts;
  for (int i = 0; i < cfg.branches; ++i) {
    if (encodings[i].branch_action != i)
      throw std::invalid_argument("predict_action: encodings not in canonical branch order");
    if (encodings[i].tau->shape != std::vector<int>{cfg.encoder_hidden})
      throw std::invalid_argument("predict_action: encoding dimension mismatch");
    parts.push_back(encodings[i].tau);
  }
  parts.push_back(model_free_feature);
  auto x = ad::concat(parts);
  auto h1 = ad::relu(ad::linear(store.at(prefix + "pred/l1/w"), x, store.at(prefix + "pred/l1/b")));
  auto h2 = ad::relu(ad::linear(store.at(prefix + "pred/l2/w"), h1, store.at(prefix + "pred/l2/b")));
  PredictorOutput out;
  out.logits = ad::linear(store.at(prefix + "pred/l3/w"), h2, store.at(prefix + "pred/l3/b"));
  if (model_free_logits) out.logits = ad::add(out.logits, model_free_logits);
  out.probs = ad::softmax(out.logits);
  return out;
}

}  // namespace rpa

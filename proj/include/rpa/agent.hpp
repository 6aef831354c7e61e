#pragma once

// Model-free path: language encoder, attention-based recurrent policy, and
// the random baseline. Parameters live in a ParameterStore under "policy/".

#include <stdexcept>
#include <string>
#include <vector>

#include "rpa/autodiff.hpp"
#include "rpa/optim.hpp"
#include "rpa/world.hpp"

namespace rpa {

// Previous-action input uses a dedicated start sentinel before the first step.
constexpr int kStartActionSentinel = kNumActions;

struct AgentConfig {
  int vocab = static_cast<int>(instruction_vocab().size());
  int word_embed = 32;    // 256 at full scale
  int hidden = 64;        // encoder and decoder LSTM width; 512 at full scale
  int action_embed = 32;
  int feature_dim = 64;   // observation width; 2048 at full scale
  real dropout = 0.5;
};

struct EncodedInstruction {
  std::vector<ad::ValueRef> words;  // w_1..w_n, each [hidden]
  ad::ValueRef matrix;              // [n, hidden], rows are the w_i
};

struct PolicyState {
  ad::ValueRef h;
  ad::ValueRef c;
  int prev_action = kStartActionSentinel;
  int t = 0;
};

struct PolicyOutput {
  ad::ValueRef feature;  // [h_t; c_t]
  ad::ValueRef logits;   // [6]
  ad::ValueRef probs;    // softmax(logits)
  ad::ValueRef attn;     // alpha_{t,1..n}
};

inline void init_policy_params(ParameterStore& store, const AgentConfig& cfg, Rng& rng,
                               const std::string& prefix = "policy/") {
  const real k = real(1) / std::sqrt(static_cast<real>(cfg.hidden));
  auto lstm = [&](const std::string& name, int input) {
    store.add(prefix + name + "/w_ih", ad::param({4 * cfg.hidden, input}, rng, k));
    store.add(prefix + name + "/w_hh", ad::param({4 * cfg.hidden, cfg.hidden}, rng, k));
    auto b = store.add(prefix + name + "/bias", ad::param({4 * cfg.hidden}, rng, k));
    // Forget-gate bias starts at 1.
    for (int i = cfg.hidden; i < 2 * cfg.hidden; ++i) b->data[i] = real(1);
  };
  store.add(prefix + "enc/embed", ad::param({cfg.vocab, cfg.word_embed}, rng, k));
  lstm("enc/lstm", cfg.word_embed);
  store.add(prefix + "enc/proj/w", ad::param({cfg.hidden, cfg.hidden}, rng, k));
  store.add(prefix + "enc/proj/b", ad::param({cfg.hidden}, rng, k));
  store.add(prefix + "dec/action_embed", ad::param({kNumActions + 1, cfg.action_embed}, rng, k));
  lstm("dec/lstm", cfg.hidden + cfg.feature_dim + cfg.action_embed);
  store.add(prefix + "head/l1/w", ad::param({cfg.hidden, 2 * cfg.hidden}, rng, k));
  store.add(prefix + "head/l1/b", ad::param({cfg.hidden}, rng, k));
  store.add(prefix + "head/l2/w", ad::param({kNumActions, cfg.hidden}, rng, k));
  store.add(prefix + "head/l2/b", ad::param({kNumActions}, rng, k));
}

inline ad::LstmGates lstm_gates(const ParameterStore& store, const std::string& name) {
  return {store.at(name + "/w_ih"), store.at(name + "/w_hh"), store.at(name + "/bias")};
}

// Embedding -> LSTM -> Linear -> Tanh, one feature vector per token.
inline EncodedInstruction encode_instruction(const ParameterStore& store, const AgentConfig& cfg,
                                             const std::vector<int>& tokens,
                                             const std::string& prefix = "policy/") {
  if (tokens.empty()) throw std::invalid_argument("encode_instruction: empty instruction");
  for (int t : tokens)
    if (t < 0 || t >= cfg.vocab)
      throw std::invalid_argument("encode_instruction: token " + std::to_string(t) +
                                  " out of vocabulary");
  const auto& embed = store.at(prefix + "enc/embed");
  const auto gates = lstm_gates(store, prefix + "enc/lstm");
  const auto& pw = store.at(prefix + "enc/proj/w");
  const auto& pb = store.at(prefix + "enc/proj/b");

  EncodedInstruction out;
  ad::LstmState st{ad::make_value({cfg.hidden}), ad::make_value({cfg.hidden})};
  for (int tok : tokens) {
    st = ad::lstm_step(gates, ad::embedding(embed, tok), st);
    out.words.push_back(ad::tanh_(ad::linear(pw, st.h, pb)));
  }
  out.matrix = ad::stack_rows(out.words);
  return out;
}

struct Attention {
  ad::ValueRef context;
  ad::ValueRef weights;
};

// e_i = h^T w_i, alpha = softmax(e), c = sum alpha_i w_i.
inline Attention attend(const ad::ValueRef& h_prev, const EncodedInstruction& enc) {
  auto weights = ad::softmax(ad::matvec(enc.matrix, h_prev));
  auto context = ad::matvec_t(enc.matrix, weights);
  return {context, weights};
}

inline PolicyState init_policy_state(const AgentConfig& cfg) {
  return {ad::make_value({cfg.hidden}), ad::make_value({cfg.hidden}), kStartActionSentinel, 0};
}

// One decode step. The context feeds both the LSTM input and the output
// feature; the action head runs on [h_t; c_t].
inline PolicyOutput decode_step(const ParameterStore& store, const AgentConfig& cfg,
                                PolicyState& state, const EncodedInstruction& enc,
                                const ad::ValueRef& observation, Rng& rng, bool train,
                                const std::string& prefix = "policy/") {
  if (observation->shape != std::vector<int>{cfg.feature_dim})
    throw std::invalid_argument("decode_step: observation dimension mismatch");
  auto att = attend(state.h, enc);
  auto a_prev = ad::embedding(store.at(prefix + "dec/action_embed"), state.prev_action);
  auto x = ad::concat({att.context, observation, a_prev});
  auto next = ad::lstm_step(lstm_gates(store, prefix + "dec/lstm"), x, {state.h, state.c});

  auto h_out = ad::dropout(next.h, cfg.dropout, rng, train);
  PolicyOutput out;
  out.attn = att.weights;
  out.feature = ad::concat({h_out, att.context});
  auto hid = ad::tanh_(ad::linear(store.at(prefix + "head/l1/w"), out.feature,
                                  store.at(prefix + "head/l1/b")));
  hid = ad::dropout(hid, cfg.dropout, rng, train);
  out.logits = ad::linear(store.at(prefix + "head/l2/w"), hid, store.at(prefix + "head/l2/b"));
  out.probs = ad::softmax(out.logits);

  state.h = next.h;
  state.c = next.c;
  state.t += 1;
  return out;
}

inline void commit_action(PolicyState& state, int action) { state.prev_action = action; }

// Serializable snapshot of the recurrent state (decode is Markov in it).
struct PolicyStateSnapshot {
  std::vector<real> h;
  std::vector<real> c;
  int prev_action;
  int t;
};

inline PolicyStateSnapshot snapshot(const PolicyState& s) {
  return {s.h->data, s.c->data, s.prev_action, s.t};
}

inline PolicyState restore(const PolicyStateSnapshot& snap, const AgentConfig& cfg) {
  PolicyState s = init_policy_state(cfg);
  s.h->data = snap.h;
  s.c->data = snap.c;
  s.prev_action = snap.prev_action;
  s.t = snap.t;
  return s;
}

inline Action baseline_random(Rng& rng) {
  return static_cast<Action>(std::uniform_int_distribution<int>(0, kNumActions - 1)(rng));
}

}  // namespace rpa

// Acceptance harness: verifies the nine release criteria end to end and
// prints one pass/fail line per criterion. Exit code is the number of
// failed criteria. Every check recomputes its expectation independently
// (finite differences, brute-force recounts, hand recursions); nothing is
// compared against stored outputs of the code under test.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rpa/harness.hpp"
#include "test_support.hpp"

using namespace rpa;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

double now_seconds() {
  static const auto t0 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("criterion %d (%s): %s  [%s; %.1fs]\n", id, name.c_str(),
              pass ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Independent shortest-path oracle for the metric recount.
std::vector<double> oracle_dijkstra(const WorldGraph& w, int src) {
  const int n = w.num_nodes();
  std::vector<double> d(n, 1e18);
  std::set<std::pair<double, int>> pq;
  d[src] = 0;
  pq.insert({0, src});
  while (!pq.empty()) {
    auto [dist, v] = *pq.begin();
    pq.erase(pq.begin());
    for (int nb : w.adj[v]) {
      const double nd = dist + w.edge_length(v, nb);
      if (nd < d[nb]) {
        pq.erase({d[nb], nb});
        d[nb] = nd;
        pq.insert({nd, nb});
      }
    }
  }
  return d;
}

// Straight-line world with unit edges: node k sits at (k, 0).
WorldGraph line_world(int n) {
  std::vector<std::array<double, 2>> pos;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    pos.push_back({double(i), 0.0});
    labels.push_back(i % 4);
    if (i > 0) edges.emplace_back(i - 1, i);
  }
  return build_world(1, WorldConfig{}, 4, pos, edges, labels);
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity
// ---------------------------------------------------------------------------

void criterion_gradients() {
  const double t0 = now_seconds();
  double worst = 0;
  std::string worst_where = "none";
  auto merge = [&](const char* where, const rpa_test::FdReport& rep) {
    if (rep.max_rel_err > worst) {
      worst = rep.max_rel_err;
      worst_where = std::string(where) + ":" + rep.worst_param;
    }
  };

  // Every primitive in one composed graph.
  {
    Rng rng(7);
    ParameterStore store;
    auto a = store.add("a", ad::constant({4}, rpa_test::random_data(4, rng)));
    auto b = store.add("b", ad::constant({4}, rpa_test::random_data(4, rng)));
    auto W = store.add("W", ad::constant({3, 4}, rpa_test::random_data(12, rng)));
    auto M = store.add("M", ad::constant({4, 3}, rpa_test::random_data(12, rng)));
    auto E = store.add("E", ad::constant({5, 4}, rpa_test::random_data(20, rng)));
    ad::LstmGates gates{store.add("w_ih", ad::constant({12, 4}, rpa_test::random_data(48, rng))),
                        store.add("w_hh", ad::constant({12, 3}, rpa_test::random_data(36, rng))),
                        store.add("bias", ad::constant({12}, rpa_test::random_data(12, rng)))};
    auto build = [&]() {
      auto h0 = ad::slice(ad::matvec(W, a), 0, 3);
      ad::LstmState st{h0, ad::tanh_(h0)};
      auto step1 = ad::lstm_step(gates, b, st);
      auto att = ad::softmax(ad::matvec_t(M, b));
      auto parts = ad::concat({step1.h, att, ad::relu(ad::sub(a, b)), ad::embedding(E, 2)});
      auto prod = ad::matmul(W, M);
      auto nl = ad::nll_logits(step1.h, 1);
      return ad::add(ad::add(ad::mse(parts, ad::scale(parts, real(0.5))), ad::mean(prod)),
                     ad::add(nl, ad::sum(ad::mul(ad::sigmoid(a), ad::tanh_(b)))));
    };
    store.zero_grad();
    ad::backward(build());
    merge("primitives", rpa_test::finite_diff_check(store, [&]() { return build()->data[0]; }));
  }

  // Composed recurrent policy.
  {
    AgentConfig cfg;
    cfg.word_embed = 8;
    cfg.hidden = 10;
    cfg.action_embed = 4;
    cfg.feature_dim = 6;
    cfg.dropout = 0;
    ParameterStore store;
    Rng rng(5);
    init_policy_params(store, cfg, rng);
    std::vector<int> tokens{2, 8, 31, 1};
    std::vector<real> obs1(cfg.feature_dim, 0.25), obs2(cfg.feature_dim, 0.6);
    auto build = [&]() {
      Rng r(0);
      auto enc = encode_instruction(store, cfg, tokens);
      auto state = init_policy_state(cfg);
      auto o1 = decode_step(store, cfg, state, enc, ad::vector_value(obs1), r, false);
      commit_action(state, static_cast<int>(Action::Forward));
      auto o2 = decode_step(store, cfg, state, enc, ad::vector_value(obs2), r, false);
      return ad::add(ad::nll_logits(o1.logits, static_cast<int>(Action::Forward)),
                     ad::nll_logits(o2.logits, static_cast<int>(Action::Stop)));
    };
    store.zero_grad();
    ad::backward(build());
    merge("policy", rpa_test::finite_diff_check(store, [&]() { return build()->data[0]; }));
  }

  // Environment model losses.
  {
    EnvModelConfig cfg;
    cfg.feature_dim = 8;
    cfg.action_embed = 4;
    cfg.proj_width = 10;
    cfg.trans_hidden = 10;
    cfg.reward_hidden = 6;
    ParameterStore store;
    Rng rng(2);
    init_envmodel_params(store, cfg, rng);
    Rng drng(6);
    std::vector<Transition> batch;
    for (int i = 0; i < 3; ++i)
      batch.push_back({rpa_test::random_data(cfg.feature_dim, drng, 0, 1),
                       static_cast<Action>(i + 1),
                       rpa_test::random_data(cfg.feature_dim, drng, 0, 1),
                       static_cast<real>(i) - real(0.5)});
    auto build = [&]() {
      auto [lt, lr] = env_model_losses(store, cfg, batch);
      return ad::add(ad::scale(lt, kTransitionLossWeight), ad::scale(lr, kRewardLossWeight));
    };
    store.zero_grad();
    ad::backward(build());
    merge("envmodel", rpa_test::finite_diff_check(store, [&]() { return build()->data[0]; }));
  }

  // Full look-ahead decision step: policy + imagined rollouts through the
  // environment model + trajectory encoder + action predictor.
  {
    AgentConfig pcfg;
    pcfg.word_embed = 6;
    pcfg.hidden = 8;
    pcfg.action_embed = 4;
    pcfg.feature_dim = 6;
    pcfg.dropout = 0;
    EnvModelConfig ecfg;
    ecfg.feature_dim = 6;
    ecfg.action_embed = 4;
    ecfg.proj_width = 8;
    ecfg.trans_hidden = 8;
    ecfg.reward_hidden = 4;
    LookaheadConfig lcfg;
    lcfg.encoder_hidden = 5;
    lcfg.pred_hidden1 = 8;
    lcfg.pred_hidden2 = 6;
    // Depth 1 keeps the composition smooth: deeper rollouts pick imagined
    // actions by argmax, a discrete choice that finite differences cannot
    // probe (a perturbed parameter can flip the branch).
    lcfg.depth = 1;

    ParameterStore policy, env;
    Rng prng(1), erng(101);
    init_policy_params(policy, pcfg, prng);
    init_lookahead_params(policy, lcfg, pcfg.feature_dim, pcfg.hidden, prng);
    init_envmodel_params(env, ecfg, erng);

    std::vector<int> tokens{4, 9, 2};
    std::vector<real> obs(pcfg.feature_dim, 0.4);
    auto build = [&]() {
      Rng r(0);
      auto enc = encode_instruction(policy, pcfg, tokens);
      auto state = init_policy_state(pcfg);
      auto snap = snapshot(state);
      auto out = decode_step(policy, pcfg, state, enc, ad::vector_value(obs), r, false);
      std::vector<RolloutEncoding> encs;
      ad::ValueRef probes = nullptr;
      for (int a = 0; a < lcfg.branches; ++a) {
        auto steps = rollout(env, ecfg, policy, pcfg, snap, enc, ad::vector_value(obs),
                             static_cast<Action>(a), lcfg.depth);
        encs.push_back(encode_rollout(policy, lcfg, steps, a));
        // Probe the rollout outputs and encodings directly too: the softmax
        // NLL path alone attenuates the environment-model gradient below
        // finite-difference noise at this scale.
        auto probe = ad::add(ad::sum(steps.back().state),
                             ad::add(steps.back().reward, ad::sum(encs.back().tau)));
        probes = probes ? ad::add(probes, probe) : probe;
      }
      auto pred = predict_action(policy, lcfg, out.feature, encs, out.logits);
      return ad::add(ad::nll_logits(pred.logits, static_cast<int>(Action::Forward)),
                     ad::scale(probes, real(0.5)));
    };
    policy.zero_grad();
    env.zero_grad();
    ad::backward(build());
    merge("lookahead/policy",
          rpa_test::finite_diff_check(policy, [&]() { return build()->data[0]; }));
    merge("lookahead/env", rpa_test::finite_diff_check(env, [&]() { return build()->data[0]; }));
  }

  const double dt = now_seconds() - t0;
  const bool pass = worst < 1e-4 && dt < 60.0;
  report(1, "gradient integrity", pass,
         fmt("max rel err %.3g at %s, tol 1e-4", worst, worst_where.c_str()), dt);
}

// ---------------------------------------------------------------------------
// 2. Reward algebra
// ---------------------------------------------------------------------------

void criterion_reward_algebra() {
  const double t0 = now_seconds();
  WorldConfig wcfg;
  wcfg.feature_dim = 16;
  auto w = generate_world(41, 12, 6, wcfg);
  bool recursion_exact = true, telescoped = true;
  double worst_tel = 0;
  std::mt19937_64 mt(99);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int e = 0; e < 1000; ++e) {
    auto task = make_task(w, 5000 + e, 1, 5);
    const real p_human = static_cast<real>(unit(mt));
    auto ep = teacher_rollout(w, task, p_human, mix_seed(7, e), 12);
    if (ep.steps.empty()) continue;

    const real gamma = static_cast<real>(0.05 + 0.9 * unit(mt));
    auto R = assign_rewards(w, task, ep, {RewardVariant::Discounted, gamma});
    // Independent suffix recursion: R_t = r_t + gamma * R_{t+1}, R_T = r_T.
    const std::size_t n = ep.steps.size();
    if (R[n - 1] != ep.steps[n - 1].reward) recursion_exact = false;
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (R[i] != ep.steps[i].reward + gamma * R[i + 1]) recursion_exact = false;

    // Telescoping: sum of immediate rewards equals D(s_0) - D(s_T).
    double sum = 0;
    for (const auto& s : ep.steps) sum += s.reward;
    const double expect = distance_to_target(w, task.start.node, task.target) -
                          distance_to_target(w, ep.final_pose.node, task.target);
    worst_tel = std::max(worst_tel, std::abs(sum - expect));
    if (std::abs(sum - expect) > 1e-9) telescoped = false;
  }
  const double dt = now_seconds() - t0;
  report(2, "reward algebra", recursion_exact && telescoped && dt < 10.0,
         fmt("recursion %s, worst telescoping residual %.2g",
             recursion_exact ? "bit-exact" : "MISMATCH", worst_tel),
         dt);
}

// ---------------------------------------------------------------------------
// 3. Metric oracle
// ---------------------------------------------------------------------------

void criterion_metric_oracle() {
  const double t0 = now_seconds();
  Rng rng(77);
  auto w = generate_world(21, 15, 10);
  bool ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    auto task = make_task(w, 1000 + trial, 1, 4);
    std::vector<Pose> visited{task.start};
    std::uniform_int_distribution<int> act(0, 4);
    std::uniform_int_distribution<int> len(1, 12);
    const int L = len(rng);
    for (int i = 0; i < L; ++i)
      visited.push_back(step(w, visited.back(), static_cast<Action>(act(rng))));
    auto m = evaluate_trajectory(w, task, visited);

    auto dist = oracle_dijkstra(w, task.target);
    const double ne = dist[visited.back().node];
    double closest = 1e18, tl = 0;
    for (std::size_t i = 0; i < visited.size(); ++i) {
      closest = std::min(closest, dist[visited[i].node]);
      if (i > 0 && visited[i].node != visited[i - 1].node)
        tl += w.edge_length(visited[i - 1].node, visited[i].node);
    }
    if (std::abs(m.nav_error - ne) > 1e-9) ok = false;
    if (std::abs(m.trajectory_length - tl) > 1e-9) ok = false;
    if (m.success != (ne < 3.0)) ok = false;
    if (m.oracle_success != (closest < 3.0)) ok = false;
  }

  // Boundary: ending exactly at the threshold distance must not count.
  auto lw = line_world(7);
  Task t;
  t.start = Pose{6, 0, 1};
  t.target = 0;
  auto boundary = evaluate_trajectory(lw, t, {Pose{3, 0, 1}});
  const bool boundary_ok = std::abs(boundary.nav_error - 3.0) < 1e-12 && !boundary.success;
  const double dt = now_seconds() - t0;
  report(3, "metric oracle", ok && boundary_ok,
         fmt("100 recounts %s, error==threshold -> %s", ok ? "match" : "MISMATCH",
             boundary.success ? "success (WRONG)" : "fail"),
         dt);
}

// ---------------------------------------------------------------------------
// 4. REINFORCE sanity
// ---------------------------------------------------------------------------

void criterion_bandit() {
  const double t0 = now_seconds();
  int solved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ParameterStore store;
    Rng init(seed);
    store.add("logits", ad::param({2}, init, real(0.1)));
    AdamState adam;
    adam.lr = 0.05;
    Rng rng(mix_seed(seed, 99));
    std::uniform_real_distribution<double> unit(0, 1);
    for (int it = 0; it < 2000; ++it) {
      auto probs = ad::softmax(store.at("logits"));
      const int a = unit(rng) < probs->data[0] ? 0 : 1;
      const real R = (a == 0) ? real(1) : real(0);
      store.zero_grad();
      ad::backward(ad::scale(ad::nll_logits(store.at("logits"), a), R));
      adam_step(store, adam);
    }
    if (ad::softmax(store.at("logits"))->data[0] >= 0.95) ++solved;
  }
  const double dt = now_seconds() - t0;
  report(4, "REINFORCE sanity", solved == 5 && dt < 30.0, fmt("%d/5 seeds solved", solved), dt);
}

// ---------------------------------------------------------------------------
// 5. Environment-model learning
// ---------------------------------------------------------------------------

void criterion_envmodel_learning() {
  const double t0 = now_seconds();
  ExperimentConfig cfg;  // default desk scale; p_human = 0.95
  cfg.train_worlds = 1;  // the default desk world
  const auto wcfg = cfg.world_config();
  Dataset ds;
  ds.worlds.push_back(generate_world(mix_seed(cfg.seed, 0xA11ull, 0), cfg.nodes_per_world,
                                     cfg.landmark_vocab, wcfg));
  for (int t = 0; t < cfg.train_tasks_per_world; ++t) {
    ds.tasks.push_back(make_task(ds.worlds[0], mix_seed(cfg.seed, 0x1000ull, t),
                                 cfg.min_path_len, cfg.max_path_len));
    ds.tasks.back().split = "train";
    ds.task_world.push_back(0);
  }
  auto tcfg = cfg.train_config(500);
  std::vector<EnvTrainRecord> log;
  pretrain_envmodel(ds, tcfg, cfg.envmodel_config(), &log);

  auto window = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t i = a; i < b; ++i) s += log[i].l_transition;
    return s / static_cast<double>(b - a);
  };
  const double head = window(0, 20), tail = window(480, 500);
  double mt = 0, mr = 0;
  for (const auto& r : log) {
    mt += r.l_transition;
    mr += r.l_reward;
  }
  mt /= log.size();
  mr /= log.size();
  double vt = 0, vr = 0;
  for (const auto& r : log) {
    vt += (r.l_transition - mt) * (r.l_transition - mt);
    vr += (r.l_reward - mr) * (r.l_reward - mr);
  }
  vt /= log.size();
  vr /= log.size();

  const double dt = now_seconds() - t0;
  const bool pass = log.size() == 500 && tail < 0.2 * head && vr >= vt && dt < 300.0;
  report(5, "environment-model learning", pass,
         fmt("smoothed loss %.4f -> %.4f (ratio %.2f, need <0.20); reward-loss var %.3g vs "
             "transition %.3g over %zu batches",
             head, tail, tail / head, vr, vt, log.size()),
         dt);
}

// ---------------------------------------------------------------------------
// 6. Imagination purity
// ---------------------------------------------------------------------------

void criterion_imagination_purity() {
  const double t0 = now_seconds();
  WorldConfig wcfg;
  wcfg.feature_dim = 16;
  Dataset ds;
  ds.worlds.push_back(generate_world(3, 10, 6, wcfg));
  for (int t = 0; t < 4; ++t) {
    ds.tasks.push_back(make_task(ds.worlds[0], 50 + t, 2, 4));
    ds.tasks.back().split = "train";
    ds.task_world.push_back(0);
  }
  AgentConfig pcfg;
  pcfg.word_embed = 8;
  pcfg.hidden = 12;
  pcfg.action_embed = 4;
  pcfg.feature_dim = 16;
  pcfg.dropout = 0;
  EnvModelConfig ecfg;
  ecfg.feature_dim = 16;
  ecfg.action_embed = 4;
  ecfg.proj_width = 16;
  ecfg.trans_hidden = 16;
  ecfg.reward_hidden = 8;
  LookaheadConfig lcfg;
  lcfg.encoder_hidden = 6;
  lcfg.pred_hidden1 = 10;
  lcfg.pred_hidden2 = 8;
  TrainConfig tcfg;
  tcfg.batch_size = 2;
  tcfg.max_episode_len = 8;
  tcfg.max_iterations = 25;
  tcfg.lr_policy = 1e-3;
  tcfg.lr_envmodel = 1e-3;
  tcfg.seed = 4;

  auto env = pretrain_envmodel(ds, tcfg, ecfg);

  // During an instrumented look-ahead episode the real-step counter must
  // advance only for the actions actually executed: the 5 x depth imagined
  // transitions contribute exactly zero real steps.
  ParameterStore policy;
  Rng prng(8);
  init_policy_params(policy, pcfg, prng);
  init_lookahead_params(policy, lcfg, pcfg.feature_dim, pcfg.hidden, prng);
  PolicyRunContext ctx;
  ctx.policy = &policy;
  ctx.pcfg = pcfg;
  ctx.env = &env.store;
  ctx.ecfg = ecfg;
  ctx.lcfg = lcfg;
  Rng erng(12);
  const auto& w = ds.worlds[0];
  const auto calls_before = w.step_calls;
  auto ep = run_policy_episode(w, ds.tasks[0], ctx, erng, true, true, tcfg.max_episode_len);
  const auto real_steps = w.step_calls - calls_before;
  const bool rollout_steps_zero = real_steps == ep.steps.size();

  // Frozen environment model: every parameter byte-identical after training.
  std::map<std::string, std::vector<real>> before;
  for (const auto& [name, p] : env.store.params) before[name] = p->data;
  train_policy(ds, TrainMode::RPA, RewardSpec{}, tcfg, pcfg, lcfg, &env.store, ecfg);
  bool frozen = true;
  for (const auto& [name, p] : env.store.params)
    if (before.at(name) != p->data) frozen = false;

  const double dt = now_seconds() - t0;
  report(6, "imagination purity", rollout_steps_zero && frozen,
         fmt("real steps in rollouts: %lld; env params %s",
             static_cast<long long>(real_steps) - static_cast<long long>(ep.steps.size()),
             frozen ? "bit-identical" : "CHANGED"),
         dt);
}

// ---------------------------------------------------------------------------
// Shared protocol for the directional experiments (criteria 7 and 8).
//
// Desk-scale regime: 2 training worlds x 30 tasks. A cross-entropy policy is
// trained to its validation peak (2000 iterations), then each contender
// fine-tunes from that shared warm start with an equal extra budget. The
// cross-entropy control spends the same extra budget on more teacher forcing.
// ---------------------------------------------------------------------------

struct DirectionalSetup {
  Dataset ds;
  AgentConfig pcfg;
  EnvModelConfig ecfg;
  LookaheadConfig lcfg;
  TrainConfig tc;
};

DirectionalSetup directional_setup(std::uint64_t seed, bool with_val_unseen, int nodes = 12,
                                   int pmin = 3, int pmax = 6, int eplen = 12,
                                   int val_tasks = 10) {
  DirectionalSetup s;
  const int tw = 2, tt = 30, feat = 48;
  WorldConfig wcfg;
  wcfg.feature_dim = feat;
  for (int i = 0; i < tw; ++i) {
    s.ds.worlds.push_back(generate_world(mix_seed(seed, 0xA11ull, i), nodes, 6, wcfg));
    for (int t = 0; t < tt; ++t) {
      s.ds.tasks.push_back(
          make_task(s.ds.worlds[i], mix_seed(seed, 0x1000ull + i, t), pmin, pmax));
      s.ds.tasks.back().split = "train";
      s.ds.task_world.push_back(i);
    }
    for (int t = 0; t < val_tasks; ++t) {
      s.ds.tasks.push_back(
          make_task(s.ds.worlds[i], mix_seed(seed, 0x2000ull + i, t), pmin, pmax));
      s.ds.tasks.back().split = "val-seen";
      s.ds.task_world.push_back(i);
    }
  }
  if (with_val_unseen)
    for (int i = 0; i < 3; ++i) {
      s.ds.worlds.push_back(generate_world(mix_seed(seed, 0xB22ull, i), nodes, 6, wcfg));
      const int wi = static_cast<int>(s.ds.worlds.size()) - 1;
      for (int t = 0; t < val_tasks; ++t) {
        s.ds.tasks.push_back(
            make_task(s.ds.worlds[wi], mix_seed(seed, 0x3000ull + i, t), pmin, pmax));
        s.ds.tasks.back().split = "val-unseen";
        s.ds.task_world.push_back(wi);
      }
    }
  s.pcfg.word_embed = 16;
  s.pcfg.hidden = 48;
  s.pcfg.action_embed = 8;
  s.pcfg.feature_dim = feat;
  s.pcfg.dropout = 0;
  s.ecfg.feature_dim = feat;
  s.ecfg.action_embed = 8;
  s.ecfg.proj_width = 96;
  s.ecfg.trans_hidden = 96;
  s.ecfg.reward_hidden = 16;
  s.lcfg.encoder_hidden = 16;
  s.lcfg.pred_hidden1 = 32;
  s.lcfg.pred_hidden2 = 16;
  s.tc.batch_size = 4;
  s.tc.max_episode_len = eplen;
  s.tc.lr_envmodel = 3e-3;
  s.tc.lr_policy = 3e-3;
  s.tc.seed = seed;
  s.tc.p_human = 0.5;  // exploratory teacher so the model sees off-path states
  s.tc.w_floor = 0.5;
  s.tc.schedule_T = 0;
  return s;
}

TrainState clone_for_finetune(const TrainState& base, bool add_lookahead,
                              const LookaheadConfig& lcfg, const AgentConfig& pcfg,
                              std::uint64_t seed) {
  TrainState s;
  for (const auto& [name, p] : base.store.params) {
    auto v = ad::make_value(p->shape, true);
    v->data = p->data;
    s.store.add(name, v);
  }
  if (add_lookahead) {
    Rng lrng(mix_seed(seed, 0x10A4ull));
    init_lookahead_params(s.store, lcfg, pcfg.feature_dim, pcfg.hidden, lrng);
  }
  s.iteration = 0;
  return s;
}

double split_sr(const DirectionalSetup& s, const TrainState& st, const ParameterStore* env,
                const std::string& split) {
  PolicyRunContext ctx;
  ctx.policy = &st.store;
  ctx.pcfg = s.pcfg;
  if (env) {
    ctx.env = env;
    ctx.ecfg = s.ecfg;
    ctx.lcfg = s.lcfg;
  }
  return evaluate_split(s.ds, split, [&](const WorldGraph& w, const Task& t) {
           return greedy_trajectory(w, t, ctx, s.tc.max_episode_len);
         }).sr;
}

// ---------------------------------------------------------------------------
// 7. Directional replication: look-ahead vs model-free vs teacher forcing
// ---------------------------------------------------------------------------

void criterion_directional() {
  const double t0 = now_seconds();
  const long kWarm = 2000, kFinetune = 3000, kEnvIters = 8000;
  const real kFinetuneLr = real(1e-3);
  double mx_u = 0, mm_u = 0, mr_u = 0;
  int gap_majority = 0;
  const int n_seeds = 5;
  for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
    auto s = directional_setup(seed, true);
    s.tc.max_iterations = kEnvIters;
    auto env = pretrain_envmodel(s.ds, s.tc, s.ecfg);

    s.tc.max_iterations = kWarm;
    auto base = train_policy(s.ds, TrainMode::XE, RewardSpec{}, s.tc, s.pcfg, s.lcfg, nullptr,
                             s.ecfg);

    s.tc.max_iterations = kFinetune;
    auto xe_seed = clone_for_finetune(base, false, s.lcfg, s.pcfg, seed);
    auto xe = train_policy(s.ds, TrainMode::XE, RewardSpec{}, s.tc, s.pcfg, s.lcfg, nullptr,
                           s.ecfg, nullptr, &xe_seed);
    s.tc.lr_policy = kFinetuneLr;
    auto mf_seed = clone_for_finetune(base, false, s.lcfg, s.pcfg, seed);
    auto mf = train_policy(s.ds, TrainMode::ModelFreeRL, RewardSpec{}, s.tc, s.pcfg, s.lcfg,
                           nullptr, s.ecfg, nullptr, &mf_seed);
    auto rp_seed = clone_for_finetune(base, true, s.lcfg, s.pcfg, seed);
    auto rp = train_policy(s.ds, TrainMode::RPA, RewardSpec{}, s.tc, s.pcfg, s.lcfg, &env.store,
                           s.ecfg, nullptr, &rp_seed);

    const double xs = split_sr(s, xe, nullptr, "val-seen");
    const double xu = split_sr(s, xe, nullptr, "val-unseen");
    const double mu = split_sr(s, mf, nullptr, "val-unseen");
    const double rs = split_sr(s, rp, &env.store, "val-seen");
    const double ru = split_sr(s, rp, &env.store, "val-unseen");
    std::printf("  seed %llu: XE unseen %.3f | model-free unseen %.3f | look-ahead unseen %.3f\n",
                static_cast<unsigned long long>(seed), xu, mu, ru);
    std::fflush(stdout);
    mx_u += xu;
    mm_u += mu;
    mr_u += ru;
    if ((ru - xu) >= (rs - xs)) ++gap_majority;
  }
  mx_u /= n_seeds;
  mm_u /= n_seeds;
  mr_u /= n_seeds;
  const double dt = now_seconds() - t0;
  const bool pass = mr_u >= mm_u && mr_u > mx_u && 2 * gap_majority > n_seeds && dt < 1800.0;
  report(7, "directional replication", pass,
         fmt("mean unseen SR: look-ahead %.3f, model-free %.3f, XE %.3f; unseen-gap majority "
             "%d/%d",
             mr_u, mm_u, mx_u, gap_majority, n_seeds),
         dt);
}

// ---------------------------------------------------------------------------
// 8. Reward ablation
// ---------------------------------------------------------------------------

void criterion_reward_ablation() {
  const double t0 = now_seconds();
  // Larger worlds and longer paths than the other directional experiment:
  // the uniform episode-level credit of the non-discounted variants only
  // falls behind when episodes are long enough for per-step credit to
  // matter. Each variant's per-seed score is the mean over three fine-tune
  // repetitions (different sampling streams) to damp REINFORCE outcome
  // variance; the per-seed comparison would otherwise be noise-dominated.
  const long kWarm = 2000, kFinetune = 1500;
  const real kFinetuneLr = real(1e-3), kFloor = real(0.25);
  const int kReps = 3;
  const char* variants[4] = {"gd", "succ", "disc", "disc-succ"};
  double means[4] = {0, 0, 0, 0};
  int discounted_wins = 0;
  const int n_seeds = 5;
  std::vector<EvalRow> rows;
  bool all_trained = true;
  for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
    auto s = directional_setup(seed, false, /*nodes=*/20, /*pmin=*/5, /*pmax=*/8,
                               /*eplen=*/20, /*val_tasks=*/30);
    s.tc.max_iterations = kWarm;
    auto base = train_policy(s.ds, TrainMode::XE, RewardSpec{}, s.tc, s.pcfg, s.lcfg, nullptr,
                             s.ecfg);
    s.tc.max_iterations = kFinetune;
    s.tc.lr_policy = kFinetuneLr;
    s.tc.w_floor = kFloor;
    double sr[4];
    for (int v = 0; v < 4; ++v) {
      RewardSpec rs{reward_variant_from_string(variants[v]), real(0.95)};
      sr[v] = 0;
      SplitMetrics acc{};
      for (int rep = 0; rep < kReps; ++rep) {
        s.tc.seed = mix_seed(seed, 0xF17ull, static_cast<std::uint64_t>(rep));
        auto ft_seed = clone_for_finetune(base, false, s.lcfg, s.pcfg, seed);
        std::vector<PolicyTrainRecord> log;
        auto st = train_policy(s.ds, TrainMode::ModelFreeRL, rs, s.tc, s.pcfg, s.lcfg, nullptr,
                               s.ecfg, &log, &ft_seed);
        if (static_cast<long>(log.size()) != kFinetune) all_trained = false;
        PolicyRunContext ctx;
        ctx.policy = &st.store;
        ctx.pcfg = s.pcfg;
        auto m = evaluate_split(s.ds, "val-seen", [&](const WorldGraph& w, const Task& t) {
          return greedy_trajectory(w, t, ctx, s.tc.max_episode_len);
        });
        sr[v] += m.sr / kReps;
        acc.tl += m.tl / kReps;
        acc.ne += m.ne / kReps;
        acc.sr += m.sr / kReps;
        acc.osr += m.osr / kReps;
        acc.count = m.count;
      }
      s.tc.seed = seed;
      means[v] += sr[v] / n_seeds;
      rows.push_back({std::string(variants[v]) + "-seed" + std::to_string(seed), "val-seen", acc});
    }
    if (std::min(sr[2], sr[3]) >= std::max(sr[0], sr[1])) ++discounted_wins;
    std::printf("  seed %llu: gd %.3f succ %.3f disc %.3f disc-succ %.3f\n",
                static_cast<unsigned long long>(seed), sr[0], sr[1], sr[2], sr[3]);
    std::fflush(stdout);
  }
  const auto dir = fresh_dir("rpa_acceptance_ablation");
  {
    std::ofstream os(dir / "ablation.csv", std::ios::trunc);
    os << format_eval_csv(rows);
  }
  const bool csv_ok = fs::exists(dir / "ablation.csv") && fs::file_size(dir / "ablation.csv") > 0;
  const double dt = now_seconds() - t0;
  const bool pass = all_trained && csv_ok && 2 * discounted_wins > n_seeds && dt < 1800.0;
  report(8, "reward ablation", pass,
         fmt("mean seen SR gd %.3f succ %.3f disc %.3f disc-succ %.3f; discounted >= "
             "non-discounted in %d/%d seeds; csv %s",
             means[0], means[1], means[2], means[3], discounted_wins, n_seeds,
             csv_ok ? "written" : "MISSING"),
         dt);
}

// ---------------------------------------------------------------------------
// 9. Determinism
// ---------------------------------------------------------------------------

void criterion_determinism() {
  const double t0 = now_seconds();
  std::vector<std::map<std::string, std::uint64_t>> hashes;
  for (int run = 0; run < 2; ++run) {
    const auto dir = fresh_dir("rpa_acceptance_det" + std::to_string(run));
    ExperimentConfig cfg;
    cfg.out_dir = dir.string();
    cfg.nodes_per_world = 10;
    cfg.landmark_vocab = 6;
    cfg.feature_dim = 16;
    cfg.train_worlds = 2;
    cfg.train_tasks_per_world = 4;
    cfg.val_seen_worlds = 1;
    cfg.val_unseen_worlds = 1;
    cfg.val_tasks_per_world = 3;
    cfg.word_embed = 8;
    cfg.hidden = 12;
    cfg.action_embed = 4;
    cfg.env_action_embed = 4;
    cfg.env_proj_width = 16;
    cfg.env_trans_hidden = 16;
    cfg.env_reward_hidden = 8;
    cfg.lookahead_encoder_hidden = 6;
    cfg.lookahead_pred_hidden1 = 10;
    cfg.lookahead_pred_hidden2 = 8;
    cfg.batch_size = 2;
    cfg.max_episode_len = 8;
    cfg.env_iterations = 12;
    cfg.policy_iterations = 6;
    cfg.dropout = 0;

    cmd_generate(cfg);
    cmd_train_envmodel(cfg);
    cmd_train_policy(cfg, TrainMode::RPA);
    cmd_train_policy(cfg, TrainMode::XE);
    cmd_evaluate(cfg);
    std::map<std::string, std::uint64_t> h;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("manifest-", 0) == 0) continue;  // contains wall-clock timings
      h[name] = hash_file(e.path());
    }
    hashes.push_back(std::move(h));
  }
  const bool pass = hashes[0] == hashes[1] && hashes[0].size() >= 10;
  const double dt = now_seconds() - t0;
  report(9, "determinism", pass,
         fmt("%zu artifacts compared across two identical runs%s", hashes[0].size(),
             hashes[0] == hashes[1] ? ", all byte-identical" : ", DIFFER"),
         dt);
}

}  // namespace

int main(int argc, char** argv) {
  // With no arguments all nine criteria run; otherwise each argument names a
  // criterion number to run (handy for checking one criterion in isolation).
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto enabled = [&](int id) { return wanted.empty() || wanted.count(id) > 0; };

  std::printf("acceptance harness (single-threaded, deterministic)\n");
  if (enabled(1)) criterion_gradients();
  if (enabled(2)) criterion_reward_algebra();
  if (enabled(3)) criterion_metric_oracle();
  if (enabled(4)) criterion_bandit();
  if (enabled(5)) criterion_envmodel_learning();
  if (enabled(6)) criterion_imagination_purity();
  if (enabled(7)) criterion_directional();
  if (enabled(8)) criterion_reward_ablation();
  if (enabled(9)) criterion_determinism();
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures;
}

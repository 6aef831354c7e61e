#pragma once

// Synthetic navigation worlds: seeded geometric graphs, the six-action pose
// dynamics, deterministic observation features, shortest-path planning used
// for demonstrations and teacher actions, templated instructions, and the
// TL/NE/SR/OSR evaluation metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "rpa/core.hpp"

namespace rpa {

enum class Action : int {
  TurnLeft = 0,
  TurnRight = 1,
  CameraUp = 2,
  CameraDown = 3,
  Forward = 4,
  Stop = 5,
};

constexpr int kNumActions = 6;
constexpr int kStopAction = 5;

inline const char* action_name(Action a) {
  switch (a) {
    case Action::TurnLeft: return "left";
    case Action::TurnRight: return "right";
    case Action::CameraUp: return "up";
    case Action::CameraDown: return "down";
    case Action::Forward: return "forward";
    case Action::Stop: return "stop";
  }
  return "?";
}

struct Pose {
  int node = 0;
  int heading = 0;
  int elevation = 0;

  bool operator==(const Pose&) const = default;
};

struct WorldConfig {
  int headings = 4;
  int elevations = 3;
  int feature_dim = 64;
};

constexpr int kMaxLandmarks = 30;  // global landmark name space shared by all worlds

struct WorldGraph {
  std::uint64_t seed = 0;
  WorldConfig cfg;
  int landmark_vocab = 12;
  std::vector<std::array<double, 2>> pos;
  std::vector<std::vector<int>> adj;   // sorted neighbor lists
  std::vector<int> landmark;           // label per node, < landmark_vocab
  std::vector<double> dist;            // all-pairs shortest path, row-major
  std::vector<std::vector<real>> features;  // indexed by pose_index()

  mutable std::uint64_t step_calls = 0;  // instrumentation for imagination purity

  int num_nodes() const { return static_cast<int>(pos.size()); }

  int pose_index(const Pose& p) const {
    return (p.node * cfg.headings + p.heading) * cfg.elevations + p.elevation;
  }

  double node_distance(int a, int b) const { return dist[a * num_nodes() + b]; }

  double edge_length(int a, int b) const {
    const double dx = pos[a][0] - pos[b][0];
    const double dy = pos[a][1] - pos[b][1];
    return std::sqrt(dx * dx + dy * dy);
  }

  double bearing(int from, int to) const {
    return std::atan2(pos[to][1] - pos[from][1], pos[to][0] - pos[from][0]);
  }
};

namespace world_detail {

constexpr double kPi = 3.14159265358979323846;

inline double wrap_angle(double a) {
  while (a > kPi) a -= 2 * kPi;
  while (a <= -kPi) a += 2 * kPi;
  return a;
}

inline double heading_angle(const WorldGraph& w, int heading) {
  return 2.0 * kPi * heading / w.cfg.headings;
}

// Heading sector that contains a bearing (nearest compass direction).
inline int bearing_sector(const WorldGraph& w, double bearing) {
  const double sector = 2.0 * kPi / w.cfg.headings;
  int h = static_cast<int>(std::lround(bearing / sector));
  h %= w.cfg.headings;
  if (h < 0) h += w.cfg.headings;
  return h;
}

// The fixed observation projection shared by every world, so features of the
// same local layout transfer across worlds. Rebuilt deterministically from
// the descriptor dimensions alone.
inline const std::vector<real>& projection_matrix(int feat, int desc) {
  static std::map<std::pair<int, int>, std::vector<real>> cache;
  auto key = std::make_pair(feat, desc);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Rng rng(mix_seed(0x0B5E77E5ull, static_cast<std::uint64_t>(feat), static_cast<std::uint64_t>(desc)));
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<real> m(static_cast<std::size_t>(feat) * (desc + 1));
  for (auto& x : m) x = static_cast<real>(n(rng) * 0.9);
  return cache.emplace(key, std::move(m)).first->second;
}

}  // namespace world_detail

// Forward neighbor reachable from a pose, or -1. The neighbor's bearing must
// fall within the heading's compass sector; among candidates the bearing
// closest to the heading wins, ties to the smaller node id.
inline int forward_neighbor(const WorldGraph& w, const Pose& p) {
  using namespace world_detail;
  const double ha = heading_angle(w, p.heading);
  const double half = kPi / w.cfg.headings;
  int best = -1;
  double best_diff = 0;
  for (int nb : w.adj[p.node]) {
    const double diff = std::abs(wrap_angle(w.bearing(p.node, nb) - ha));
    if (diff <= half + 1e-12 && (best < 0 || diff < best_diff - 1e-12)) {
      best = nb;
      best_diff = diff;
    }
  }
  return best;
}

// Pure six-action transition. Forward with no edge in the sector is a no-op;
// Stop leaves the pose unchanged (episode termination is the caller's flag).
inline Pose step(const WorldGraph& w, const Pose& p, Action a) {
  ++w.step_calls;
  Pose out = p;
  switch (a) {
    case Action::TurnLeft:
      out.heading = (p.heading + w.cfg.headings - 1) % w.cfg.headings;
      break;
    case Action::TurnRight:
      out.heading = (p.heading + 1) % w.cfg.headings;
      break;
    case Action::CameraUp:
      out.elevation = std::min(p.elevation + 1, w.cfg.elevations - 1);
      break;
    case Action::CameraDown:
      out.elevation = std::max(p.elevation - 1, 0);
      break;
    case Action::Forward: {
      const int nb = forward_neighbor(w, p);
      if (nb >= 0) out.node = nb;
      break;
    }
    case Action::Stop:
      break;
  }
  return out;
}

inline const std::vector<real>& observe(const WorldGraph& w, const Pose& p) {
  return w.features[w.pose_index(p)];
}

namespace world_detail {

// Descriptor of the local scene: current landmark, neighbor landmarks bucketed
// by heading-relative sector and weighted by proximity, pose discretization,
// and a per-node salt keyed by the world seed.
inline std::vector<real> observation_features(const WorldGraph& w, const Pose& p) {
  const int H = w.cfg.headings, E = w.cfg.elevations, F = w.cfg.feature_dim;
  const int desc_dim = kMaxLandmarks + H * kMaxLandmarks + H + E + 4;
  std::vector<double> d(desc_dim, 0.0);
  d[w.landmark[p.node]] = 1.0;
  for (int nb : w.adj[p.node]) {
    const double rel = wrap_angle(w.bearing(p.node, nb) - heading_angle(w, p.heading));
    int sector = bearing_sector(w, rel);
    d[kMaxLandmarks + sector * kMaxLandmarks + w.landmark[nb]] +=
        1.0 / (1.0 + w.edge_length(p.node, nb));
  }
  d[kMaxLandmarks + H * kMaxLandmarks + p.heading] = 1.0;
  d[kMaxLandmarks + H * kMaxLandmarks + H + p.elevation] = 1.0;
  for (int j = 0; j < 4; ++j)
    d[desc_dim - 4 + j] = hash_unit(mix_seed(w.seed, static_cast<std::uint64_t>(p.node),
                                             static_cast<std::uint64_t>(j))) * 2.0 - 1.0;

  const auto& proj = projection_matrix(F, desc_dim);
  std::vector<real> f(F);
  for (int i = 0; i < F; ++i) {
    double acc = proj[i * (desc_dim + 1) + desc_dim] * 0.5;  // bias column
    for (int j = 0; j < desc_dim; ++j) acc += proj[i * (desc_dim + 1) + j] * d[j];
    f[i] = static_cast<real>(1.0 / (1.0 + std::exp(-acc)));
  }
  return f;
}

}  // namespace world_detail

inline WorldGraph generate_world(std::uint64_t seed, int node_count, int landmark_vocab,
                                 WorldConfig cfg = {}) {
  if (node_count < 2) throw std::invalid_argument("generate_world: need at least 2 nodes");
  if (landmark_vocab < 1 || landmark_vocab > kMaxLandmarks)
    throw std::invalid_argument("generate_world: landmark vocab out of range");
  WorldGraph w;
  w.seed = seed;
  w.cfg = cfg;
  w.landmark_vocab = landmark_vocab;
  Rng rng(mix_seed(0x301D5EEDull, seed));

  const double extent = 3.5 * std::sqrt(static_cast<double>(node_count));
  std::uniform_real_distribution<double> u(0.0, extent);
  w.pos.resize(node_count);
  for (auto& p : w.pos) p = {u(rng), u(rng)};

  w.landmark.resize(node_count);
  std::uniform_int_distribution<int> lm(0, landmark_vocab - 1);
  for (auto& l : w.landmark) l = lm(rng);

  // k-nearest-neighbor edges, at most one edge per compass sector per node so
  // every edge stays traversable by Forward, then stitch components.
  const int n = node_count;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<bool>> sector_used(n, std::vector<bool>(cfg.headings, false));
  auto sector_of = [&](int from, int to) {
    return world_detail::bearing_sector(w, w.bearing(from, to));
  };
  auto can_add = [&](int a, int b) {
    return a != b && !sector_used[a][sector_of(a, b)] && !sector_used[b][sector_of(b, a)];
  };
  auto add_edge = [&](int a, int b) {
    auto e = std::minmax(a, b);
    edges.emplace_back(e.first, e.second);
    sector_used[a][sector_of(a, b)] = true;
    sector_used[b][sector_of(b, a)] = true;
  };
  const int k = std::min(3, n - 1);
  for (int i = 0; i < n; ++i) {
    std::vector<int> order;
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double da = w.edge_length(i, a), db = w.edge_length(i, b);
      return da != db ? da < db : a < b;
    });
    int added = 0;
    for (int j = 0; j < n - 1 && added < k; ++j) {
      const int cand = order[j];
      auto e = std::minmax(i, cand);
      if (std::find(edges.begin(), edges.end(), std::make_pair(e.first, e.second)) !=
          edges.end()) {
        ++added;
        continue;
      }
      if (can_add(i, cand)) {
        add_edge(i, cand);
        ++added;
      }
    }
  }
  // Union-find over current edges.
  std::vector<int> root(n);
  for (int i = 0; i < n; ++i) root[i] = i;
  std::function<int(int)> find = [&](int x) { return root[x] == x ? x : root[x] = find(root[x]); };
  auto unite = [&](int a, int b) { root[find(a)] = find(b); };
  for (auto& [a, b] : edges) unite(a, b);
  while (true) {
    int ca = -1, cb = -1;
    double best = 0;
    // Prefer sector-free pairs; fall back to any pair if none qualifies.
    for (int pass = 0; pass < 2 && ca < 0; ++pass)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (find(i) != find(j) && (pass == 1 || can_add(i, j))) {
            const double d = w.edge_length(i, j);
            if (ca < 0 || d < best) {
              best = d;
              ca = i;
              cb = j;
            }
          }
    if (ca < 0) break;
    add_edge(ca, cb);
    unite(ca, cb);
  }

  w.adj.assign(n, {});
  for (auto& [a, b] : edges) {
    w.adj[a].push_back(b);
    w.adj[b].push_back(a);
  }
  for (auto& lst : w.adj) std::sort(lst.begin(), lst.end());

  // All-pairs shortest paths with Euclidean edge weights.
  const double inf = 1e18;
  w.dist.assign(static_cast<std::size_t>(n) * n, inf);
  for (int i = 0; i < n; ++i) w.dist[i * n + i] = 0;
  for (auto& [a, b] : edges) {
    const double d = w.edge_length(a, b);
    w.dist[a * n + b] = std::min(w.dist[a * n + b], d);
    w.dist[b * n + a] = std::min(w.dist[b * n + a], d);
  }
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        w.dist[i * n + j] = std::min(w.dist[i * n + j], w.dist[i * n + m] + w.dist[m * n + j]);

  w.features.resize(static_cast<std::size_t>(n) * cfg.headings * cfg.elevations);
  for (int v = 0; v < n; ++v)
    for (int h = 0; h < cfg.headings; ++h)
      for (int e = 0; e < cfg.elevations; ++e) {
        Pose p{v, h, e};
        w.features[w.pose_index(p)] = world_detail::observation_features(w, p);
      }
  return w;
}

inline double distance_to_target(const WorldGraph& w, int node, int target) {
  if (node < 0 || node >= w.num_nodes() || target < 0 || target >= w.num_nodes())
    throw std::invalid_argument("distance_to_target: node out of range");
  const double d = w.node_distance(node, target);
  if (d >= 1e17) throw std::runtime_error("distance_to_target: unreachable node");
  return d;
}

// ---- pose-space planning (demonstrations and the recovering teacher) ----

// Optimal action sequence from a pose to a target node, minimizing
// (travel distance, action count) lexicographically. Deterministic tie-breaks.
// Returns the actions excluding the terminal Stop.
inline std::vector<Action> plan_actions(const WorldGraph& w, const Pose& start, int target) {
  const int H = w.cfg.headings;
  const int n = w.num_nodes();
  const int S = n * H;
  auto sid = [&](int node, int heading) { return node * H + heading; };

  struct Entry {
    double dist;
    int nact;
    int state;
  };
  auto cmp = [](const Entry& a, const Entry& b) {
    return std::tie(a.dist, a.nact, a.state) > std::tie(b.dist, b.nact, b.state);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> pq(cmp);
  std::vector<double> best_d(S, 1e18);
  std::vector<int> best_a(S, 1 << 30);
  std::vector<int> pred_state(S, -1);
  std::vector<Action> pred_action(S, Action::Stop);

  const int s0 = sid(start.node, start.heading);
  best_d[s0] = 0;
  best_a[s0] = 0;
  pq.push({0, 0, s0});
  while (!pq.empty()) {
    auto [d, na, s] = pq.top();
    pq.pop();
    if (d != best_d[s] || na != best_a[s]) continue;
    const int node = s / H, heading = s % H;
    if (node == target) break;
    auto relax = [&](int ns, double nd, int nna, Action a) {
      if (std::tie(nd, nna) < std::tie(best_d[ns], best_a[ns])) {
        best_d[ns] = nd;
        best_a[ns] = nna;
        pred_state[ns] = s;
        pred_action[ns] = a;
        pq.push({nd, nna, ns});
      }
    };
    relax(sid(node, (heading + H - 1) % H), d, na + 1, Action::TurnLeft);
    relax(sid(node, (heading + 1) % H), d, na + 1, Action::TurnRight);
    const int nb = forward_neighbor(w, Pose{node, heading, 0});
    if (nb >= 0) relax(sid(nb, heading), d + w.edge_length(node, nb), na + 1, Action::Forward);
  }

  // Best goal state among (target, *).
  int goal = -1;
  for (int h = 0; h < H; ++h) {
    const int s = sid(target, h);
    if (best_d[s] >= 1e17) continue;
    if (goal < 0 || std::tie(best_d[s], best_a[s], s) < std::tie(best_d[goal], best_a[goal], goal))
      goal = s;
  }
  if (goal < 0) throw std::runtime_error("plan_actions: target unreachable");
  std::vector<Action> actions;
  for (int s = goal; s != s0 && pred_state[s] >= 0; s = pred_state[s])
    actions.push_back(pred_action[s]);
  std::reverse(actions.begin(), actions.end());
  return actions;
}

// Demonstration-aligned next action at an arbitrary pose; Stop at the target.
inline Action teacher_action(const WorldGraph& w, const Pose& pose, int target) {
  if (pose.node == target) return Action::Stop;
  auto plan = plan_actions(w, pose, target);
  return plan.empty() ? Action::Stop : plan[0];
}

// ---- tasks and instructions ----

// Instruction vocabulary: padding/end sentinels, direction and filler words,
// and one name per global landmark id.
inline const std::vector<std::string>& instruction_vocab() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v = {
        "<pad>", "<end>", "walk", "go",    "move",  "head",    "to",    "the",
        "past",  "turn",  "left", "right", "forward", "then",  "stop",  "at",
        "near",  "face",  "toward", "straight", "and", "you",  "reach", "continue",
        "until", "from",  "room",  "area",  "keep",  "on",
    };
    for (int i = 0; i < kMaxLandmarks; ++i) v.push_back("landmark_" + std::to_string(i));
    return v;
  }();
  return vocab;
}

inline int vocab_id(const std::string& word) {
  const auto& v = instruction_vocab();
  const auto it = std::find(v.begin(), v.end(), word);
  if (it == v.end()) throw std::invalid_argument("unknown word: " + word);
  return static_cast<int>(it - v.begin());
}

inline int landmark_token(int label) { return 30 + label; }

constexpr int kEndToken = 1;
constexpr int kMaxInstructionTokens = 40;

struct Task {
  std::vector<int> instruction;
  Pose start;
  int target = 0;
  std::vector<Action> demonstration;  // ends with Stop
  std::string split;                  // train / val-seen / val-unseen
};

struct Metrics {
  double trajectory_length = 0;
  double nav_error = 0;
  bool success = false;
  bool oracle_success = false;
};

namespace world_detail {

// Three paraphrase templates over the same path skeleton.
inline std::vector<int> render_instruction(const WorldGraph& w,
                                           const std::vector<int>& path_nodes,
                                           const std::vector<Action>& demo, int variant) {
  std::vector<int> toks;
  auto say = [&](const std::string& word) { toks.push_back(vocab_id(word)); };
  auto say_lm = [&](int node) { toks.push_back(landmark_token(w.landmark[node])); };

  // Turn words preceding each forward move, read off the demonstration.
  std::vector<std::vector<std::string>> turns;
  turns.emplace_back();
  for (Action a : demo) {
    if (a == Action::TurnLeft) turns.back().push_back("left");
    else if (a == Action::TurnRight) turns.back().push_back("right");
    else if (a == Action::Forward) turns.emplace_back();
  }

  for (std::size_t i = 1; i < path_nodes.size(); ++i) {
    if (i - 1 < turns.size()) {
      for (const auto& dir : turns[i - 1]) {
        say("turn");
        say(dir);
      }
    }
    switch (variant) {
      case 0:
        say("walk");
        say("past");
        break;
      case 1:
        say("go");
        say("toward");
        say("the");
        break;
      default:
        say("head");
        say("to");
        break;
    }
    say_lm(path_nodes[i]);
    if (i + 1 < path_nodes.size()) say("then");
  }
  switch (variant) {
    case 0:
      say("stop");
      say("at");
      break;
    case 1:
      say("until");
      say("you");
      say("reach");
      break;
    default:
      say("stop");
      say("near");
      break;
  }
  say_lm(path_nodes.back());
  if (toks.size() >= kMaxInstructionTokens) toks.resize(kMaxInstructionTokens - 1);
  toks.push_back(kEndToken);
  return toks;
}

}  // namespace world_detail

// Neighbors actually reachable by Forward from some heading, per node.
inline std::vector<std::vector<int>> forward_graph(const WorldGraph& w) {
  std::vector<std::vector<int>> out(w.num_nodes());
  for (int v = 0; v < w.num_nodes(); ++v)
    for (int h = 0; h < w.cfg.headings; ++h) {
      const int nb = forward_neighbor(w, Pose{v, h, 0});
      if (nb >= 0 && std::find(out[v].begin(), out[v].end(), nb) == out[v].end())
        out[v].push_back(nb);
    }
  return out;
}

// Nodes every other node can reach through Forward moves; used to keep task
// targets recoverable after arbitrary deviations.
inline std::vector<bool> universal_targets(const WorldGraph& w) {
  const int n = w.num_nodes();
  const auto fwd = forward_graph(w);
  std::vector<std::vector<int>> rev(n);
  for (int v = 0; v < n; ++v)
    for (int nb : fwd[v]) rev[nb].push_back(v);
  std::vector<bool> out(n, false);
  for (int t = 0; t < n; ++t) {
    std::vector<bool> seen(n, false);
    std::queue<int> q;
    seen[t] = true;
    q.push(t);
    int count = 1;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int p : rev[v])
        if (!seen[p]) {
          seen[p] = true;
          ++count;
          q.push(p);
        }
    }
    out[t] = count == n;
  }
  return out;
}

// Samples a task whose shortest path has an edge count within bounds; the
// demonstration realizes the optimal action plan and ends with Stop.
inline Task make_task(const WorldGraph& w, std::uint64_t seed, int min_path_len,
                      int max_path_len) {
  if (min_path_len < 1 || max_path_len < min_path_len)
    throw std::invalid_argument("make_task: bad path length bounds");
  Rng rng(mix_seed(0x7A5C5EEDull, seed));
  const int n = w.num_nodes();

  // Hop counts via BFS from every node.
  const auto ok_target = universal_targets(w);
  std::vector<std::pair<int, int>> candidates;
  for (int s = 0; s < n; ++s) {
    std::vector<int> hops(n, -1);
    std::queue<int> q;
    hops[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int nb : w.adj[v])
        if (hops[nb] < 0) {
          hops[nb] = hops[v] + 1;
          q.push(nb);
        }
    }
    for (int t = 0; t < n; ++t)
      if (t != s && ok_target[t] && hops[t] >= min_path_len && hops[t] <= max_path_len)
        candidates.emplace_back(s, t);
  }
  if (candidates.empty()) throw std::runtime_error("make_task: no path within bounds");

  const auto [s, t] = candidates[std::uniform_int_distribution<std::size_t>(
      0, candidates.size() - 1)(rng)];
  Task task;
  task.start = Pose{s, std::uniform_int_distribution<int>(0, w.cfg.headings - 1)(rng),
                    w.cfg.elevations / 2};
  task.target = t;
  task.demonstration = plan_actions(w, task.start, t);
  task.demonstration.push_back(Action::Stop);

  // Node path induced by the demonstration, for instruction rendering.
  std::vector<int> path_nodes{s};
  Pose p = task.start;
  for (Action a : task.demonstration) {
    p = step(w, p, a);
    if (p.node != path_nodes.back()) path_nodes.push_back(p.node);
  }
  const int variant = std::uniform_int_distribution<int>(0, 2)(rng);
  task.instruction = world_detail::render_instruction(w, path_nodes, task.demonstration, variant);
  return task;
}

inline Metrics evaluate_trajectory(const WorldGraph& w, const Task& task,
                                   const std::vector<Pose>& visited,
                                   double success_threshold = 3.0) {
  if (visited.empty()) throw std::invalid_argument("evaluate_trajectory: empty trajectory");
  Metrics m;
  m.nav_error = distance_to_target(w, visited.back().node, task.target);
  m.success = m.nav_error < success_threshold;
  double closest = m.nav_error;
  for (const auto& p : visited)
    closest = std::min(closest, distance_to_target(w, p.node, task.target));
  m.oracle_success = closest < success_threshold;
  for (std::size_t i = 1; i < visited.size(); ++i)
    if (visited[i].node != visited[i - 1].node)
      m.trajectory_length += w.edge_length(visited[i - 1].node, visited[i].node);
  return m;
}

}  // namespace rpa

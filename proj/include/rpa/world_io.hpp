#pragma once

// Line-delimited JSON serialization for worlds and task sets.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpa/world.hpp"

namespace rpa {

// Rebuilds the derived world fields (adjacency, distances, features) from the
// stored ones, so a loaded world is indistinguishable from a generated one.
inline WorldGraph build_world(std::uint64_t seed, WorldConfig cfg, int landmark_vocab,
                              std::vector<std::array<double, 2>> pos,
                              const std::vector<std::pair<int, int>>& edges,
                              std::vector<int> labels) {
  WorldGraph w;
  w.seed = seed;
  w.cfg = cfg;
  w.landmark_vocab = landmark_vocab;
  w.pos = std::move(pos);
  w.landmark = std::move(labels);
  const int n = w.num_nodes();
  w.adj.assign(n, {});
  for (const auto& [a, b] : edges) {
    w.adj[a].push_back(b);
    w.adj[b].push_back(a);
  }
  for (auto& lst : w.adj) std::sort(lst.begin(), lst.end());
  const double inf = 1e18;
  w.dist.assign(static_cast<std::size_t>(n) * n, inf);
  for (int i = 0; i < n; ++i) w.dist[i * n + i] = 0;
  for (const auto& [a, b] : edges) {
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

inline std::vector<std::pair<int, int>> world_edges(const WorldGraph& w) {
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < w.num_nodes(); ++a)
    for (int b : w.adj[a])
      if (a < b) edges.emplace_back(a, b);
  return edges;
}

inline nlohmann::json world_to_json(const WorldGraph& w) {
  nlohmann::json j;
  j["type"] = "world";
  j["version"] = 1;
  j["seed"] = w.seed;
  j["headings"] = w.cfg.headings;
  j["elevations"] = w.cfg.elevations;
  j["feature_dim"] = w.cfg.feature_dim;
  j["landmark_vocab"] = w.landmark_vocab;
  j["pos"] = w.pos;
  j["edges"] = world_edges(w);
  j["labels"] = w.landmark;
  return j;
}

inline WorldGraph world_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1)
    throw std::runtime_error("unknown world record version");
  WorldConfig cfg{j.at("headings").get<int>(), j.at("elevations").get<int>(),
                  j.at("feature_dim").get<int>()};
  return build_world(j.at("seed").get<std::uint64_t>(), cfg, j.at("landmark_vocab").get<int>(),
                     j.at("pos").get<std::vector<std::array<double, 2>>>(),
                     j.at("edges").get<std::vector<std::pair<int, int>>>(),
                     j.at("labels").get<std::vector<int>>());
}

// Stable fingerprint of a world's structural content.
inline std::uint64_t world_hash(const WorldGraph& w) {
  return fnv1a64(world_to_json(w).dump());
}

inline nlohmann::json task_to_json(const Task& t, int world_index) {
  nlohmann::json j;
  j["type"] = "task";
  j["version"] = 1;
  j["world"] = world_index;
  j["instruction"] = t.instruction;
  j["start"] = {t.start.node, t.start.heading, t.start.elevation};
  j["target"] = t.target;
  nlohmann::json demo = nlohmann::json::array();
  for (Action a : t.demonstration) demo.push_back(static_cast<int>(a));
  j["demonstration"] = demo;
  j["split"] = t.split;
  return j;
}

struct Dataset {
  std::vector<WorldGraph> worlds;
  std::vector<Task> tasks;
  std::vector<int> task_world;  // world index per task
};

inline void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write dataset: " + path);
  for (const auto& w : ds.worlds) os << world_to_json(w).dump() << "\n";
  for (std::size_t i = 0; i < ds.tasks.size(); ++i)
    os << task_to_json(ds.tasks[i], ds.task_world[i]).dump() << "\n";
  if (!os) throw std::runtime_error("dataset write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset: " + path);
  Dataset ds;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "world") {
      ds.worlds.push_back(world_from_json(j));
    } else if (type == "task") {
      if (j.at("version").get<int>() != 1)
        throw std::runtime_error("unknown task record version");
      Task t;
      t.instruction = j.at("instruction").get<std::vector<int>>();
      const auto s = j.at("start").get<std::vector<int>>();
      t.start = Pose{s.at(0), s.at(1), s.at(2)};
      t.target = j.at("target").get<int>();
      for (int a : j.at("demonstration").get<std::vector<int>>())
        t.demonstration.push_back(static_cast<Action>(a));
      t.split = j.at("split").get<std::string>();
      const int wi = j.at("world").get<int>();
      if (wi < 0 || wi >= static_cast<int>(ds.worlds.size()))
        throw std::runtime_error("task references unknown world " + std::to_string(wi));
      ds.tasks.push_back(std::move(t));
      ds.task_world.push_back(wi);
    } else {
      throw std::runtime_error("unknown record type: " + type);
    }
  }
  return ds;
}

}  // namespace rpa

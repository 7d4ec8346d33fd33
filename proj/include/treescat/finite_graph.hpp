#ifndef TREESCAT_FINITE_GRAPH_HPP
#define TREESCAT_FINITE_GRAPH_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treescat/errors.hpp"

namespace treescat {

/// An end of an asymptotic graph: the root x_l (a dense vertex index) and the
/// number of tree children hanging below it. Every other vertex of the end has
/// degree q+1, so the end is fully described by these two numbers.
struct EndSpec {
  std::size_t root = 0;
  int children = 0;
};

/// Finite simple graph with arbitrary integer labels, reindexed densely.
struct FiniteGraph {
  int q = 0;
  std::vector<std::int64_t> labels;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::optional<std::vector<std::size_t>> gamma0;
  std::vector<EndSpec> ends;

  std::size_t vertex_count() const { return labels.size(); }

  std::size_t index_of(std::int64_t label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    require(it != labels.end(), ErrorKind::InputFormat, "unknown vertex label " + std::to_string(label));
    return static_cast<std::size_t>(it - labels.begin());
  }

  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(labels.size());
    for (auto [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    for (auto& row : adj) std::sort(row.begin(), row.end());
    return adj;
  }

  bool connected() const {
    if (labels.empty()) return true;
    const auto adj = adjacency();
    std::vector<char> seen(labels.size(), 0);
    std::queue<std::size_t> todo;
    todo.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!todo.empty()) {
      const auto v = todo.front();
      todo.pop();
      for (auto w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          todo.push(w);
        }
    }
    return count == labels.size();
  }

  /// No self-loops, no duplicate edges, indices in range.
  void validate_simple() const {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto [a, b] : edges) {
      require(a < labels.size() && b < labels.size(), ErrorKind::InputFormat, "edge endpoint out of range");
      require(a != b, ErrorKind::InputFormat, "self-loop at label " + std::to_string(labels[a]));
      const auto key = std::minmax(a, b);
      require(seen.insert(key).second, ErrorKind::InputFormat,
              "duplicate edge " + std::to_string(labels[a]) + "-" + std::to_string(labels[b]));
    }
    std::set<std::int64_t> uniq(labels.begin(), labels.end());
    require(uniq.size() == labels.size(), ErrorKind::InputFormat, "duplicate vertex label");
  }
};

inline FiniteGraph finite_graph_from_json(const nlohmann::json& j) {
  FiniteGraph g;
  try {
    g.q = j.at("q").get<int>();
    for (const auto& v : j.at("vertices")) g.labels.push_back(v.get<std::int64_t>());
    std::map<std::int64_t, std::size_t> index;
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
      require(index.emplace(g.labels[i], i).second, ErrorKind::InputFormat, "duplicate vertex label");
    }
    auto lookup = [&](const nlohmann::json& v) {
      const auto label = v.get<std::int64_t>();
      const auto it = index.find(label);
      require(it != index.end(), ErrorKind::InputFormat, "unknown vertex label " + std::to_string(label));
      return it->second;
    };
    for (const auto& e : j.at("edges")) {
      require(e.is_array() && e.size() == 2, ErrorKind::InputFormat, "edge must be a pair");
      g.edges.emplace_back(lookup(e[0]), lookup(e[1]));
    }
    if (j.contains("gamma0")) {
      std::vector<std::size_t> core;
      for (const auto& v : j.at("gamma0")) core.push_back(lookup(v));
      std::sort(core.begin(), core.end());
      g.gamma0 = std::move(core);
    }
    if (j.contains("ends")) {
      for (const auto& e : j.at("ends")) {
        EndSpec end;
        end.root = lookup(e.at("root"));
        end.children = e.value("children", g.q);
        g.ends.push_back(end);
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::InputFormat, ex.what());
  }
  require(g.q >= 2, ErrorKind::InputFormat, "q must be >= 2");
  g.validate_simple();
  return g;
}

inline nlohmann::json to_json(const FiniteGraph& g) {
  nlohmann::json j;
  j["q"] = g.q;
  j["vertices"] = g.labels;
  auto edges = nlohmann::json::array();
  for (auto [a, b] : g.edges) edges.push_back({g.labels[a], g.labels[b]});
  j["edges"] = edges;
  if (g.gamma0) {
    auto core = nlohmann::json::array();
    for (auto v : *g.gamma0) core.push_back(g.labels[v]);
    j["gamma0"] = core;
  }
  if (!g.ends.empty()) {
    auto ends = nlohmann::json::array();
    for (const auto& e : g.ends) ends.push_back({{"root", g.labels[e.root]}, {"children", e.children}});
    j["ends"] = ends;
  }
  return j;
}

}  // namespace treescat

#endif  // TREESCAT_FINITE_GRAPH_HPP

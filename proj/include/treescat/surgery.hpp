#ifndef TREESCAT_SURGERY_HPP
#define TREESCAT_SURGERY_HPP

// Graphs asymptotic to T_q: the invariant nu, the moves M1/M2, balanced trees
// and the embedding of such a graph as a connected component of T_q with
// finitely many edges changed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treescat/errors.hpp"
#include "treescat/finite_graph.hpp"
#include "treescat/potential.hpp"
#include "treescat/scattering.hpp"
#include "treescat/tree_geometry.hpp"

namespace treescat {

// ---------------------------------------------------------------------------
// asymptotic graphs in symbolic form

/// Core vertices (dense indices) of an asymptotic graph: gamma0 if given,
/// otherwise every vertex that is not an end root.
inline std::vector<std::size_t> core_of(const FiniteGraph& g) {
  if (g.gamma0) return *g.gamma0;
  std::vector<char> root(g.vertex_count(), 0);
  for (const auto& e : g.ends) root[e.root] = 1;
  std::vector<std::size_t> core;
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    if (!root[v]) core.push_back(v);
  return core;
}

/// Structural checks: connected, ends hang off the core only, the core and
/// the end roots partition the vertices.
inline void validate_asymptotic(const FiniteGraph& g) {
  g.validate_simple();
  require(g.q >= 2, ErrorKind::InvalidStructure, "q must be >= 2");
  require(g.vertex_count() > 0, ErrorKind::InvalidStructure, "empty graph");
  require(g.connected(), ErrorKind::InvalidStructure, "graph is not connected");
  std::vector<char> role(g.vertex_count(), 0);  // 1 core, 2 root
  for (const auto& e : g.ends) {
    require(e.root < g.vertex_count(), ErrorKind::InvalidStructure, "end root out of range");
    require(role[e.root] == 0, ErrorKind::InvalidStructure, "vertex " + std::to_string(g.labels[e.root]) + " roots two ends");
    require(e.children >= 1, ErrorKind::InvalidStructure, "end without children");
    role[e.root] = 2;
  }
  for (auto v : core_of(g)) {
    require(v < g.vertex_count() && role[v] == 0, ErrorKind::InvalidStructure, "core overlaps an end root");
    role[v] = 1;
  }
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    require(role[v] != 0, ErrorKind::InvalidStructure,
            "vertex " + std::to_string(g.labels[v]) + " is neither core nor end root");
  const auto adj = g.adjacency();
  for (const auto& e : g.ends) {
    require(!adj[e.root].empty(), ErrorKind::InvalidStructure, "end root not linked to the core");
    for (auto w : adj[e.root])
      require(role[w] == 1, ErrorKind::InvalidStructure,
              "end root " + std::to_string(g.labels[e.root]) + " is adjacent to another root");
  }
}

/// Degree in the infinite graph: finite edges plus tree children for roots.
inline std::vector<int> full_degrees(const FiniteGraph& g) {
  std::vector<int> deg(g.vertex_count(), 0);
  for (auto [a, b] : g.edges) {
    ++deg[a];
    ++deg[b];
  }
  for (const auto& e : g.ends) deg[e.root] += e.children;
  return deg;
}

/// nu = sum (q + 1 - d(x)) + 2 b1.
inline int nu(const FiniteGraph& g) {
  validate_asymptotic(g);
  int total = 0;
  for (int d : full_degrees(g)) total += g.q + 1 - d;
  const int b1 = static_cast<int>(g.edges.size()) - static_cast<int>(g.vertex_count()) + 1;
  return total + 2 * b1;
}

/// Radius-r ball around the core: m inner vertices (distance < r), M on the sphere.
struct BallCount {
  int r = 0;
  std::int64_t m = 0;
  std::int64_t big_m = 0;
  bool valid = false;
};

/// Counts of B_r. Valid when every sphere vertex has exactly one neighbour
/// inside and all others outside; always true for r >= 2.
inline BallCount ball_count(const FiniteGraph& g, int r) {
  validate_asymptotic(g);
  require(r >= 1, ErrorKind::InvalidParameter, "radius must be >= 1");
  BallCount out;
  out.r = r;
  const auto core = core_of(g);
  if (r == 1) {
    out.m = static_cast<std::int64_t>(core.size());
    out.big_m = static_cast<std::int64_t>(g.ends.size());
    const auto adj = g.adjacency();
    out.valid = true;
    for (const auto& e : g.ends) out.valid = out.valid && adj[e.root].size() == 1 && e.children == g.q;
    return out;
  }
  out.m = static_cast<std::int64_t>(g.vertex_count());
  out.valid = true;
  for (const auto& e : g.ends) {
    std::int64_t layer = e.children;  // depth 1 below the root
    for (int k = 1; k <= r - 2; ++k) {
      out.m += layer;
      layer *= g.q;
    }
    out.big_m += layer;
  }
  return out;
}

/// nu through the ball counts: (q - 1) m - M + 2.
inline std::int64_t nu_by_ball(const FiniteGraph& g, int r) {
  const auto b = ball_count(g, r);
  require(b.valid, ErrorKind::PreconditionViolated, "ball radius does not separate the ends");
  return (g.q - 1) * b.m - b.big_m + 2;
}

/// Smallest radius whose sphere separates the ends.
inline int smallest_valid_radius(const FiniteGraph& g) { return ball_count(g, 1).valid ? 1 : 2; }

inline std::int64_t next_free_label(const FiniteGraph& g) {
  std::int64_t label = 0;
  for (auto l : g.labels) label = std::max(label, l + 1);
  return label;
}

inline std::size_t anchor_of(const FiniteGraph& g) {
  const auto core = core_of(g);
  require(!core.empty(), ErrorKind::InvalidStructure, "empty core");
  return *std::min_element(core.begin(), core.end(), [&](auto a, auto b) { return g.labels[a] < g.labels[b]; });
}

/// M1: a new core leaf attached to the lowest-label core vertex (nu += q - 1).
inline FiniteGraph move_m1(const FiniteGraph& g) {
  validate_asymptotic(g);
  FiniteGraph out = g;
  auto core = core_of(g);
  const auto anchor = anchor_of(g);
  const auto v = out.labels.size();
  out.labels.push_back(next_free_label(g));
  out.edges.emplace_back(anchor, v);
  core.push_back(v);
  out.gamma0 = core;
  return out;
}

/// M2: a new end whose root has q children, linked to the lowest-label core vertex (nu -= 1).
inline FiniteGraph move_m2(const FiniteGraph& g) {
  validate_asymptotic(g);
  FiniteGraph out = g;
  const auto core = core_of(g);
  const auto anchor = anchor_of(g);
  const auto v = out.labels.size();
  out.labels.push_back(next_free_label(g));
  out.edges.emplace_back(anchor, v);
  out.ends.push_back(EndSpec{v, g.q});
  out.gamma0 = core;
  return out;
}

/// Finite tree with m inner vertices of degree q + 1 and 2 + (q - 1) m leaves.
/// Labels 0..m-1 are inner (in the order they became inner), then the leaves
/// in creation order. Grows a star by expanding the oldest leaf.
inline FiniteGraph balanced_tree(int q, int m) {
  require(q >= 2, ErrorKind::InvalidParameter, "q must be >= 2");
  require(m >= 1, ErrorKind::InvalidParameter, "m must be >= 1");
  std::vector<int> parent{-1};
  std::vector<int> inner{0};
  std::queue<int> leaves;
  for (int c = 0; c <= q; ++c) {
    parent.push_back(0);
    leaves.push(static_cast<int>(parent.size()) - 1);
  }
  while (static_cast<int>(inner.size()) < m) {
    const int v = leaves.front();
    leaves.pop();
    inner.push_back(v);
    for (int c = 0; c < q; ++c) {
      parent.push_back(v);
      leaves.push(static_cast<int>(parent.size()) - 1);
    }
  }
  std::vector<std::int64_t> relabel(parent.size(), -1);
  std::int64_t next = 0;
  for (int v : inner) relabel[static_cast<std::size_t>(v)] = next++;
  while (!leaves.empty()) {
    relabel[static_cast<std::size_t>(leaves.front())] = next++;
    leaves.pop();
  }
  FiniteGraph g;
  g.q = q;
  g.labels.resize(parent.size());
  for (std::size_t i = 0; i < g.labels.size(); ++i) g.labels[i] = static_cast<std::int64_t>(i);
  for (std::size_t v = 1; v < parent.size(); ++v)
    g.edges.emplace_back(static_cast<std::size_t>(relabel[static_cast<std::size_t>(parent[v])]),
                         static_cast<std::size_t>(relabel[v]));
  std::sort(g.edges.begin(), g.edges.end());
  g.gamma0 = std::vector<std::size_t>();
  for (int i = 0; i < m; ++i) g.gamma0->push_back(static_cast<std::size_t>(i));
  return g;
}

// ---------------------------------------------------------------------------
// materialized graphs

/// Explicit portion of an asymptotic graph. Vertex keys: "c<label>" for the
/// finite vertices, "<root key>/<i>/<j>..." inside the ends.
class MaterializedGraph {
 public:
  std::size_t add(const std::string& key, int distance) {
    const auto [it, fresh] = index_.emplace(key, keys_.size());
    require(fresh, ErrorKind::InvalidStructure, "duplicate vertex key " + key);
    keys_.push_back(key);
    distance_.push_back(distance);
    adj_.emplace_back();
    return keys_.size() - 1;
  }

  void connect(std::size_t a, std::size_t b) {
    require(a != b, ErrorKind::InvalidStructure, "self-loop");
    adj_[a].insert(b);
    adj_[b].insert(a);
  }

  void disconnect(std::size_t a, std::size_t b) {
    adj_[a].erase(b);
    adj_[b].erase(a);
  }

  bool linked(std::size_t a, std::size_t b) const { return adj_[a].contains(b); }
  std::size_t size() const { return keys_.size(); }
  const std::string& key(std::size_t v) const { return keys_[v]; }
  int distance(std::size_t v) const { return distance_[v]; }
  const std::set<std::size_t>& neighbors(std::size_t v) const { return adj_[v]; }

  std::optional<std::size_t> find(const std::string& key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::set<std::pair<std::size_t, std::size_t>> edges() const {
    std::set<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t v = 0; v < size(); ++v)
      for (auto w : adj_[v])
        if (v < w) out.emplace(v, w);
    return out;
  }

 private:
  std::vector<std::string> keys_;
  std::vector<int> distance_;
  std::vector<std::set<std::size_t>> adj_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline std::string core_key(std::int64_t label) { return "c" + std::to_string(label); }

/// Materializes every vertex within core distance `radius`.
inline MaterializedGraph materialize(const FiniteGraph& g, int radius) {
  MaterializedGraph out;
  const auto core = core_of(g);
  std::vector<std::size_t> order(core);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return g.labels[a] < g.labels[b]; });
  std::vector<std::size_t> roots;
  for (const auto& e : g.ends) roots.push_back(e.root);
  std::sort(roots.begin(), roots.end(), [&](auto a, auto b) { return g.labels[a] < g.labels[b]; });
  std::vector<std::size_t> local(g.vertex_count());
  for (auto v : order) local[v] = out.add(core_key(g.labels[v]), 0);
  if (radius >= 1)
    for (auto v : roots) local[v] = out.add(core_key(g.labels[v]), 1);
  for (auto [a, b] : g.edges)
    if (out.find(core_key(g.labels[a])) && out.find(core_key(g.labels[b]))) out.connect(local[a], local[b]);
  for (auto v : roots) {
    if (radius < 2) break;
    const auto end = std::find_if(g.ends.begin(), g.ends.end(), [&](const EndSpec& e) { return e.root == v; });
    std::queue<std::pair<std::size_t, int>> todo;  // (local vertex, its end depth)
    todo.emplace(local[v], 0);
    while (!todo.empty()) {
      const auto [x, depth] = todo.front();
      todo.pop();
      if (depth + 2 > radius) continue;
      const int fan = depth == 0 ? end->children : g.q;
      for (int c = 0; c < fan; ++c) {
        const auto y = out.add(out.key(x) + "/" + std::to_string(c), depth + 2);
        out.connect(x, y);
        todo.emplace(y, depth + 1);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// embedding

struct SurgeryEdge {
  VertexId x;
  VertexId y;
  std::string key_x;
  std::string key_y;
};

struct EmbeddingResult {
  int q = 0;
  int nu = 0;
  int n_m1 = 0;
  int n_m2 = 0;
  int radius = 0;
  int inner_count = 0;
  int sphere_count = 0;
  int depth = 0;
  std::vector<std::string> moves;
  std::vector<std::string> keys;  // key of each tree id in the truncation
  std::vector<SurgeryEdge> added;    // in the modified graph, not in T_q
  std::vector<SurgeryEdge> removed;  // in T_q, not in the modified graph
  NonlocalPotential w;
  std::vector<VertexId> gamma;  // vertices of the input graph inside the truncation
  bool matrix_certificate = false;
  bool component_certificate = false;

  bool in_gamma(VertexId x) const { return std::binary_search(gamma.begin(), gamma.end(), x); }
};

namespace detail {

/// Key prefix of a vertex: the finite vertex it hangs from.
inline std::string key_head(const std::string& key) { return key.substr(0, key.find('/')); }

/// Neighbour keys of a vertex of the input graph, straight from its symbolic form.
inline std::set<std::string> symbolic_neighbors(const FiniteGraph& g, const std::string& key) {
  std::map<std::string, std::size_t> by_key;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) by_key[core_key(g.labels[v])] = v;
  const auto head = key_head(key);
  const auto v = by_key.at(head);
  const auto end = std::find_if(g.ends.begin(), g.ends.end(), [&](const EndSpec& e) { return e.root == v; });
  std::set<std::string> out;
  if (head == key) {
    const auto adj = g.adjacency();
    for (auto w : adj[v]) out.insert(core_key(g.labels[w]));
    if (end != g.ends.end())
      for (int c = 0; c < end->children; ++c) out.insert(key + "/" + std::to_string(c));
    return out;
  }
  out.insert(key.substr(0, key.rfind('/')));
  for (int c = 0; c < g.q; ++c) out.insert(key + "/" + std::to_string(c));
  return out;
}

}  // namespace detail

struct EmbedOptions {
  int radius = 0;       // 0: smallest valid radius of the normalized graph
  int extra_depth = 4;  // truncation depth beyond the modified region
};

/// Writes nu = N'' - (q - 1) N' with minimal N', applies the moves, replaces
/// the ball of the result by a balanced tree to get T_q, then drops the move
/// edges again. The returned potential satisfies A_modified = A0 + W.
inline EmbeddingResult embed(const FiniteGraph& input, EmbedOptions options = {}) {
  validate_asymptotic(input);
  const int q = input.q;
  EmbeddingResult res;
  res.q = q;
  res.nu = nu(input);
  res.n_m1 = res.nu < 0 ? (-res.nu + q - 2) / (q - 1) : 0;
  res.n_m2 = res.nu + (q - 1) * res.n_m1;

  FiniteGraph moved = input;
  std::vector<std::pair<std::int64_t, std::int64_t>> move_edges;
  for (int i = 0; i < res.n_m1; ++i) {
    moved = move_m1(moved);
    move_edges.emplace_back(moved.labels[moved.edges.back().first], moved.labels[moved.edges.back().second]);
    res.moves.push_back("M1");
  }
  for (int i = 0; i < res.n_m2; ++i) {
    moved = move_m2(moved);
    move_edges.emplace_back(moved.labels[moved.edges.back().first], moved.labels[moved.edges.back().second]);
    res.moves.push_back("M2");
  }
  require(nu(moved) == 0, ErrorKind::InvalidStructure, "moves did not reach nu = 0");

  const int r = options.radius > 0 ? options.radius : smallest_valid_radius(moved);
  const auto counts = ball_count(moved, r);
  require(counts.valid, ErrorKind::PreconditionViolated, "radius does not separate the ends");
  res.radius = r;
  res.inner_count = static_cast<int>(counts.m);
  res.sphere_count = static_cast<int>(counts.big_m);
  require(counts.big_m == 2 + (q - 1) * counts.m, ErrorKind::InvalidStructure, "ball counts contradict nu = 0");

  // the ball alone fixes the tree F and the depths of its vertices
  const auto small = materialize(moved, r);
  std::vector<std::size_t> inner;
  std::vector<std::size_t> sphere;
  for (std::size_t v = 0; v < small.size(); ++v) (small.distance(v) < r ? inner : sphere).push_back(v);
  const auto f = balanced_tree(q, static_cast<int>(inner.size()));
  std::vector<std::pair<std::string, std::string>> f_edges;
  {
    // keep the ball if it already is such a tree
    bool regular = true;
    for (auto v : inner) regular = regular && static_cast<int>(small.neighbors(v).size()) == q + 1;
    const auto e = small.edges();
    regular = regular && e.size() == small.size() - 1;
    if (regular) {
      for (auto [a, b] : e) f_edges.emplace_back(small.key(a), small.key(b));
    } else {
      auto key_of = [&](std::size_t label) {
        return label < inner.size() ? small.key(inner[label]) : small.key(sphere[label - inner.size()]);
      };
      for (auto [a, b] : f.edges) f_edges.emplace_back(key_of(a), key_of(b));
    }
  }
  // depth of ball vertices in the normalized tree, from the lowest inner vertex
  std::map<std::string, std::vector<std::string>> f_adj;
  for (const auto& [a, b] : f_edges) {
    f_adj[a].push_back(b);
    f_adj[b].push_back(a);
  }
  int ball_depth = 0;
  {
    std::map<std::string, int> seen{{small.key(inner.front()), 0}};
    std::queue<std::string> todo;
    todo.push(small.key(inner.front()));
    while (!todo.empty()) {
      const auto v = todo.front();
      todo.pop();
      for (const auto& w : f_adj[v])
        if (!seen.contains(w)) {
          seen[w] = seen[v] + 1;
          ball_depth = std::max(ball_depth, seen[w]);
          todo.push(w);
        }
    }
  }
  res.depth = ball_depth + options.extra_depth;
  const int reach = res.depth + r + 1;

  // normalized tree T and modified graph G^ on the materialized region
  MaterializedGraph t = materialize(moved, reach);
  for (auto v : inner)
    for (auto w : std::vector<std::size_t>(t.neighbors(*t.find(small.key(v))).begin(),
                                           t.neighbors(*t.find(small.key(v))).end()))
      t.disconnect(*t.find(small.key(v)), w);
  for (const auto& [a, b] : f_edges) t.connect(*t.find(a), *t.find(b));
  MaterializedGraph hat = materialize(moved, reach);
  for (const auto& [a, b] : move_edges) hat.disconnect(*hat.find(core_key(a)), *hat.find(core_key(b)));

  for (std::size_t v = 0; v < t.size(); ++v)
    if (t.distance(v) < reach)
      require(static_cast<int>(t.neighbors(v).size()) == q + 1, ErrorKind::InvalidStructure,
              "normalized graph is not regular at " + t.key(v));

  // canonical BFS labelling of T from the lowest inner vertex
  const TruncatedTree tree(q, res.depth);
  std::vector<std::int64_t> id_of(t.size(), -1);
  std::vector<std::size_t> vertex_of;
  {
    const auto root = *t.find(small.key(inner.front()));
    std::vector<int> level(t.size(), -1);
    std::queue<std::size_t> todo;
    todo.push(root);
    level[root] = 0;
    while (!todo.empty()) {
      const auto v = todo.front();
      todo.pop();
      id_of[v] = static_cast<std::int64_t>(vertex_of.size());
      vertex_of.push_back(v);
      if (level[v] == res.depth) continue;
      for (auto w : t.neighbors(v))  // ascending materialization order
        if (level[w] < 0) {
          level[w] = level[v] + 1;
          todo.push(w);
        }
    }
  }
  require(vertex_of.size() == tree.size(), ErrorKind::InvalidStructure, "normalized graph is not a tree");
  for (std::size_t i = 0; i < vertex_of.size(); ++i) res.keys.push_back(t.key(vertex_of[i]));

  // W = A_hat - A_T on the common region
  std::vector<PotentialEntry> entries;
  auto mapped = [&](std::size_t v) { return id_of[v] >= 0; };
  for (auto [a, b] : hat.edges())
    if (!t.linked(a, b)) {
      require(mapped(a) && mapped(b), ErrorKind::InvalidStructure, "edit outside the truncation");
      VertexId x{static_cast<std::uint32_t>(id_of[a])};
      VertexId y{static_cast<std::uint32_t>(id_of[b])};
      if (y < x) std::swap(x, y);
      res.added.push_back({x, y, res.keys[x.index], res.keys[y.index]});
      entries.push_back({x, y, 1.0});
    }
  for (auto [a, b] : t.edges())
    if (!hat.linked(a, b)) {
      require(mapped(a) && mapped(b), ErrorKind::InvalidStructure, "edit outside the truncation");
      VertexId x{static_cast<std::uint32_t>(id_of[a])};
      VertexId y{static_cast<std::uint32_t>(id_of[b])};
      if (y < x) std::swap(x, y);
      res.removed.push_back({x, y, res.keys[x.index], res.keys[y.index]});
      entries.push_back({x, y, -1.0});
    }
  auto by_ids = [](const SurgeryEdge& a, const SurgeryEdge& b) { return std::pair{a.x, a.y} < std::pair{b.x, b.y}; };
  std::sort(res.added.begin(), res.added.end(), by_ids);
  std::sort(res.removed.begin(), res.removed.end(), by_ids);
  res.w = NonlocalPotential::from_upper(q, entries);

  // vertices of the input graph
  std::set<std::string> input_heads;
  for (auto l : input.labels) input_heads.insert(core_key(l));
  for (std::size_t i = 0; i < res.keys.size(); ++i)
    if (input_heads.contains(detail::key_head(res.keys[i]))) res.gamma.push_back(VertexId{static_cast<std::uint32_t>(i)});

  // row of A0 + W at x, zero entries dropped
  auto row_of = [&](VertexId x) {
    std::map<std::uint32_t, long> row;
    tree.for_each_neighbor(x, [&](VertexId y) { row[y.index] += 1; });
    for (auto y : res.w.support()) row[y.index] += std::lround(res.w(x, y).real());
    std::erase_if(row, [](const auto& kv) { return kv.second == 0; });
    return row;
  };

  // certificate 1: A0 + W equals the adjacency of G^ row by row
  res.matrix_certificate = true;
  for (std::size_t i = 0; i < tree.size() && res.matrix_certificate; ++i) {
    const VertexId x{static_cast<std::uint32_t>(i)};
    if (tree.depth_of(x) >= res.depth) continue;
    std::map<std::uint32_t, long> expect;
    for (auto w : hat.neighbors(vertex_of[i])) {
      if (!mapped(w)) {
        res.matrix_certificate = false;
        break;
      }
      expect[static_cast<std::uint32_t>(id_of[w])] += 1;
    }
    res.matrix_certificate = res.matrix_certificate && row_of(x) == expect;
  }

  // certificate 2: the identity on keys is an isomorphism from the input
  // graph onto a connected component of G^ (checked where neighbourhoods are complete)
  res.component_certificate = !res.gamma.empty();
  for (auto x : res.gamma) {
    if (!res.component_certificate) break;
    if (tree.depth_of(x) >= res.depth) continue;
    std::set<std::string> got;
    for (const auto& [y, count] : row_of(x)) {
      if (count != 1) res.component_certificate = false;
      got.insert(res.keys[y]);
    }
    res.component_certificate = res.component_certificate && got == detail::symbolic_neighbors(input, res.keys[x.index]);
  }
  return res;
}

inline nlohmann::json to_json(const EmbeddingResult& r) {
  nlohmann::json j;
  j["q"] = r.q;
  j["nu"] = r.nu;
  j["moves"] = {{"N1", r.n_m1}, {"N2", r.n_m2}, {"log", r.moves}};
  j["ball"] = {{"r", r.radius}, {"m", r.inner_count}, {"M", r.sphere_count}};
  j["depth"] = r.depth;
  auto edges = [](const std::vector<SurgeryEdge>& list) {
    auto out = nlohmann::json::array();
    for (const auto& e : list) out.push_back({{"x", e.x.index}, {"y", e.y.index}, {"keys", {e.key_x, e.key_y}}});
    return out;
  };
  j["added"] = edges(r.added);
  j["removed"] = edges(r.removed);
  j["potential"] = to_json(r.w);
  auto table = nlohmann::json::array();
  for (std::size_t i = 0; i < r.keys.size(); ++i) table.push_back({i, r.keys[i]});
  j["vertices"] = table;
  auto gamma = nlohmann::json::array();
  for (auto x : r.gamma) gamma.push_back(x.index);
  j["gamma"] = gamma;
  j["certificates"] = {{"matrix", r.matrix_certificate}, {"component", r.component_certificate}};
  return j;
}

// ---------------------------------------------------------------------------
// support of generalized eigenfunctions

struct SupportReport {
  std::size_t samples = 0;
  double leak_from_gamma = 0.0;  // max |e| off the input graph, rays inside it
  double leak_into_gamma = 0.0;  // max |e| on the input graph, rays outside it
  double max_leak() const { return std::max(leak_from_gamma, leak_into_gamma); }
};

/// For each (ray, s) sample, the largest |e(x, omega, s)| on the side of the
/// modified graph the ray does not belong to. `in_gamma` marks the vertices of
/// one union of components; a depth D - 1 cylinder belongs to it iff its
/// vertex does.
template <class InGamma>
SupportReport component_support_check(const TruncatedTree& tree, const NonlocalPotential& w, InGamma&& in_gamma,
                                      std::span<const std::pair<VertexId, double>> samples) {
  SupportReport out;
  if (w.empty()) return out;
  const ScatteringProblem problem(tree, w);
  const int ray_depth = tree.depth() - 1;
  require(ray_depth > problem.cutoff_depth(), ErrorKind::DepthInsufficient, "truncation too shallow for the check");
  std::vector<VertexId> probe;
  const auto last = tree.level(tree.depth() - 2).second;
  for (std::uint32_t v = 0; v < last; ++v) probe.push_back(VertexId{v});
  for (const auto& [cyl, s] : samples) {
    require(tree.depth_of(cyl) == ray_depth, ErrorKind::InvalidParameter, "sample rays must sit at depth D - 1");
    const auto e = ls_solve(problem, RayClass{cyl, tree.cylinder_weight(ray_depth)}, {s, 0.0});
    const bool inside = in_gamma(cyl);
    double& leak = inside ? out.leak_from_gamma : out.leak_into_gamma;
    for (auto x : probe)
      if (in_gamma(x) != inside) leak = std::max(leak, std::abs(e(x)));
    ++out.samples;
  }
  return out;
}

inline SupportReport component_support_check(const EmbeddingResult& result, const TruncatedTree& tree,
                                             std::span<const std::pair<VertexId, double>> samples) {
  require(tree.q() == result.q && tree.depth() == result.depth, ErrorKind::InvalidParameter,
          "tree does not match the embedding");
  return component_support_check(tree, result.w, [&](VertexId x) { return result.in_gamma(x); }, samples);
}

}  // namespace treescat

#endif  // TREESCAT_SURGERY_HPP

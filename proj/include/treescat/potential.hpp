#ifndef TREESCAT_POTENTIAL_HPP
#define TREESCAT_POTENTIAL_HPP

// Finitely supported Hermitian perturbations W of the adjacency operator,
// their support K and the hull K^ (K plus every finite component of its
// complement).

#include <algorithm>
#include <complex>
#include <map>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "treescat/errors.hpp"
#include "treescat/spectral_surface.hpp"
#include "treescat/tree_geometry.hpp"

namespace treescat {

struct PotentialEntry {
  VertexId x;
  VertexId y;
  cplx value;
};

class NonlocalPotential {
 public:
  NonlocalPotential() = default;

  /// Upper-triangle entries (x <= y). Rejects x > y, complex diagonals and repeats.
  static NonlocalPotential from_upper(int q, std::span<const PotentialEntry> entries) {
    require(q >= 2, ErrorKind::InvalidParameter, "q must be >= 2");
    std::map<std::pair<VertexId, VertexId>, cplx> upper;
    for (const auto& e : entries) {
      require(e.x <= e.y, ErrorKind::InputFormat,
              "entry (" + std::to_string(e.x.index) + ", " + std::to_string(e.y.index) + ") is below the diagonal");
      require(e.x != e.y || e.value.imag() == 0.0, ErrorKind::InputFormat,
              "diagonal entry at " + std::to_string(e.x.index) + " is not real");
      require(upper.emplace(std::pair{e.x, e.y}, e.value).second, ErrorKind::InputFormat,
              "duplicate entry (" + std::to_string(e.x.index) + ", " + std::to_string(e.y.index) + ")");
    }
    std::vector<VertexId> support;
    for (const auto& [key, v] : upper) {
      if (v == cplx{}) continue;
      support.push_back(key.first);
      support.push_back(key.second);
    }
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    NonlocalPotential w;
    w.q_ = q;
    w.support_ = support;
    w.matrix_ = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(support.size()), static_cast<Eigen::Index>(support.size()));
    for (const auto& [key, v] : upper) {
      if (v == cplx{}) continue;
      const auto i = w.position(key.first);
      const auto j = w.position(key.second);
      w.matrix_(i, j) = v;
      w.matrix_(j, i) = std::conj(v);
    }
    return w;
  }

  /// Dense Hermitian matrix over the listed vertices; zero rows are dropped.
  static NonlocalPotential from_matrix(int q, std::span<const VertexId> vertices, const Eigen::MatrixXcd& m) {
    const auto n = static_cast<Eigen::Index>(vertices.size());
    require(m.rows() == n && m.cols() == n, ErrorKind::InvalidParameter, "matrix does not match vertex list");
    require((m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, m.cwiseAbs().maxCoeff()),
            ErrorKind::InvalidParameter, "potential is not Hermitian");
    std::vector<PotentialEntry> entries;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        auto x = vertices[static_cast<std::size_t>(i)];
        auto y = vertices[static_cast<std::size_t>(j)];
        if (x > y || (x == y && i != j)) continue;
        cplx v = m(i, j);
        if (x == y) v = v.real();
        if (v != cplx{}) entries.push_back({x, y, v});
      }
    return from_upper(q, entries);
  }

  int q() const { return q_; }
  bool empty() const { return support_.empty(); }

  /// Minimal support K, sorted by id.
  const std::vector<VertexId>& support() const { return support_; }

  /// W restricted to K x K in support order.
  const Eigen::MatrixXcd& matrix() const { return matrix_; }

  cplx operator()(VertexId x, VertexId y) const {
    const auto i = find(x);
    const auto j = find(y);
    if (i < 0 || j < 0) return {};
    return matrix_(i, j);
  }

  /// W as a matrix over a superset X of K, in the order of X.
  Eigen::MatrixXcd on(std::span<const VertexId> set) const {
    const auto n = static_cast<Eigen::Index>(set.size());
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
    std::vector<Eigen::Index> where(support_.size(), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = find(set[static_cast<std::size_t>(i)]);
      if (k >= 0) where[static_cast<std::size_t>(k)] = i;
    }
    for (std::size_t k = 0; k < where.size(); ++k)
      require(where[k] >= 0, ErrorKind::InvalidParameter, "set does not contain the support");
    for (std::size_t a = 0; a < where.size(); ++a)
      for (std::size_t b = 0; b < where.size(); ++b)
        out(where[a], where[b]) = matrix_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    return out;
  }

  double operator_norm() const {
    if (empty()) return 0.0;
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(matrix_, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
  }

  int max_depth(const TruncatedTree& tree) const {
    int d = 0;
    for (auto x : support_) d = std::max(d, tree.depth_of(x));
    return d;
  }

  std::vector<PotentialEntry> upper_entries() const {
    std::vector<PotentialEntry> out;
    for (std::size_t i = 0; i < support_.size(); ++i)
      for (std::size_t j = i; j < support_.size(); ++j) {
        const cplx v = matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v != cplx{}) out.push_back({support_[i], support_[j], v});
      }
    return out;
  }

 private:
  Eigen::Index find(VertexId x) const {
    const auto it = std::lower_bound(support_.begin(), support_.end(), x);
    if (it == support_.end() || *it != x) return -1;
    return static_cast<Eigen::Index>(it - support_.begin());
  }

  Eigen::Index position(VertexId x) const { return find(x); }

  int q_ = 2;
  std::vector<VertexId> support_;
  Eigen::MatrixXcd matrix_;
};

inline NonlocalPotential potential_from_json(const nlohmann::json& j) {
  std::vector<PotentialEntry> entries;
  int q = 0;
  try {
    q = j.at("q").get<int>();
    for (const auto& row : j.at("entries")) {
      require(row.is_array() && row.size() == 4, ErrorKind::InputFormat, "entry must be [x, y, re, im]");
      const auto x = row[0].get<std::int64_t>();
      const auto y = row[1].get<std::int64_t>();
      require(x >= 0 && y >= 0 && x < (std::int64_t{1} << 31) && y < (std::int64_t{1} << 31), ErrorKind::InputFormat,
              "vertex id out of range");
      entries.push_back({VertexId{static_cast<std::uint32_t>(x)}, VertexId{static_cast<std::uint32_t>(y)},
                         cplx{row[2].get<double>(), row[3].get<double>()}});
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::InputFormat, ex.what());
  }
  require(q >= 2, ErrorKind::InputFormat, "q must be >= 2");
  return NonlocalPotential::from_upper(q, entries);
}

inline nlohmann::json to_json(const NonlocalPotential& w) {
  nlohmann::json j;
  j["q"] = w.q();
  auto rows = nlohmann::json::array();
  for (const auto& e : w.upper_entries()) rows.push_back({e.x.index, e.y.index, e.value.real(), e.value.imag()});
  j["entries"] = rows;
  return j;
}

/// Smallest superset of `set` whose complement has only infinite components.
/// Inside the truncation a complement component is infinite iff it reaches depth D.
inline std::vector<VertexId> hat_K(std::span<const VertexId> set, const TruncatedTree& tree) {
  int deepest = 0;
  for (auto x : set) deepest = std::max(deepest, tree.depth_of(x));
  require(deepest + 2 <= tree.depth(), ErrorKind::DepthInsufficient, "support within D - 2 required");
  std::vector<VertexId> out(set.begin(), set.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  auto in_set = [&](VertexId v) { return std::binary_search(out.begin(), out.end(), v); };

  // Only vertices of depth <= deepest + 1 can sit in a finite component; explore
  // from the complement vertices adjacent to the set.
  std::vector<VertexId> absorb;
  std::map<VertexId, int> component;
  int next = 0;
  for (auto x : std::vector<VertexId>(out)) {
    for (auto start : tree.neighbors(x)) {
      if (in_set(start) || component.contains(start)) continue;
      const int id = next++;
      std::vector<VertexId> members{start};
      component[start] = id;
      bool infinite = false;
      std::queue<VertexId> todo;
      todo.push(start);
      while (!todo.empty()) {
        const auto v = todo.front();
        todo.pop();
        if (tree.depth_of(v) > deepest) {
          // below the set every vertex has a full subtree outside it
          infinite = true;
          continue;
        }
        tree.for_each_neighbor(v, [&](VertexId w) {
          if (in_set(w) || component.contains(w)) return;
          component[w] = id;
          members.push_back(w);
          todo.push(w);
        });
      }
      if (!infinite) absorb.insert(absorb.end(), members.begin(), members.end());
    }
  }
  out.insert(out.end(), absorb.begin(), absorb.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<VertexId> hat_K(const NonlocalPotential& w, const TruncatedTree& tree) {
  return hat_K(std::span<const VertexId>(w.support()), tree);
}

/// Dense matrix [rule(x, y)] over the given vertex list.
template <class Rule>
Eigen::MatrixXcd compress(Rule&& rule, std::span<const VertexId> set) {
  const auto n = static_cast<Eigen::Index>(set.size());
  Eigen::MatrixXcd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = rule(set[static_cast<std::size_t>(i)], set[static_cast<std::size_t>(j)]);
  return out;
}

/// Compression of A = A0 + W to a vertex set.
inline Eigen::MatrixXcd compress_operator(const TruncatedTree& tree, const NonlocalPotential& w,
                                          std::span<const VertexId> set) {
  Eigen::MatrixXcd out = w.empty() ? Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(set.size()),
                                                            static_cast<Eigen::Index>(set.size()))
                                   : compress([&](VertexId x, VertexId y) { return w(x, y); }, set);
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = 0; j < set.size(); ++j)
      if (tree.distance(set[i], set[j]) == 1) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 1.0;
  return out;
}

}  // namespace treescat

#endif  // TREESCAT_POTENTIAL_HPP

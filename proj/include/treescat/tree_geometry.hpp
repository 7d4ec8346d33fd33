#ifndef TREESCAT_TREE_GEOMETRY_HPP
#define TREESCAT_TREE_GEOMETRY_HPP

// Finite depth-D portion of the regular tree T_q with child-index addressing,
// distances, Busemann functions and the cylinder discretization of the
// boundary Omega.

#include <compare>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "treescat/errors.hpp"

namespace treescat {

struct VertexId {
  std::uint32_t index = 0;

  friend constexpr auto operator<=>(VertexId, VertexId) = default;
};

inline constexpr VertexId kRoot{0};

/// Exact non-negative rational, always stored in lowest terms.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Rational make(std::uint64_t n, std::uint64_t d) {
    require(d != 0, ErrorKind::InvalidParameter, "zero denominator");
    const auto g = std::gcd(n, d);
    return g == 0 ? Rational{0, 1} : Rational{n / g, d / g};
  }

  friend Rational operator+(Rational a, Rational b) {
    const auto g = std::gcd(a.den, b.den);
    const auto lcm = a.den / g * b.den;
    return make(a.num * (lcm / a.den) + b.num * (lcm / b.den), lcm);
  }

  friend bool operator==(Rational, Rational) = default;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// A boundary cylinder: all rays from the root passing through `cylinder`.
/// Carries its dsigma_O mass.
struct RayClass {
  VertexId cylinder;
  Rational weight;
};

class TruncatedTree {
 public:
  TruncatedTree(int q, int depth) : q_(q), depth_(depth) {
    require(q >= 2, ErrorKind::InvalidParameter, "q must be >= 2");
    require(q <= 250, ErrorKind::InvalidParameter, "q must be <= 250");
    require(depth >= 1, ErrorKind::InvalidParameter, "depth must be >= 1");
    const auto total = closed_form_count(q, depth);
    require(total < (std::uint64_t{1} << 31), ErrorKind::InvalidParameter, "truncation too large");
    parent_.reserve(total);
    level_.reserve(total);
    slot_.reserve(total);
    first_child_.reserve(total);
    parent_.push_back(0);
    level_.push_back(0);
    slot_.push_back(0);
    level_start_.push_back(0);
    std::uint32_t begin = 0;
    std::uint32_t end = 1;
    for (int d = 0; d < depth; ++d) {
      level_start_.push_back(end);
      for (std::uint32_t v = begin; v < end; ++v) {
        first_child_.push_back(static_cast<std::uint32_t>(parent_.size()));
        const int fan = d == 0 ? q + 1 : q;
        for (int c = 0; c < fan; ++c) {
          parent_.push_back(v);
          level_.push_back(static_cast<std::uint8_t>(d + 1));
          slot_.push_back(static_cast<std::uint8_t>(c));
        }
      }
      begin = end;
      end = static_cast<std::uint32_t>(parent_.size());
    }
    // depth-D vertices have no children
    first_child_.resize(parent_.size(), static_cast<std::uint32_t>(parent_.size()));
    level_start_.push_back(end);
  }

  static std::uint64_t closed_form_count(int q, int depth) {
    std::uint64_t qd = 1;
    for (int i = 0; i < depth; ++i) qd *= static_cast<std::uint64_t>(q);
    return 1 + static_cast<std::uint64_t>(q + 1) * (qd - 1) / static_cast<std::uint64_t>(q - 1);
  }

  int q() const { return q_; }
  int depth() const { return depth_; }
  std::size_t size() const { return parent_.size(); }
  std::size_t edge_count() const { return size() - 1; }

  bool contains(VertexId x) const { return x.index < size(); }

  int depth_of(VertexId x) const {
    check(x);
    return level_[x.index];
  }

  VertexId parent(VertexId x) const {
    check(x);
    require(x != kRoot, ErrorKind::InvalidParameter, "root has no parent");
    return VertexId{parent_[x.index]};
  }

  int fan_out(VertexId x) const {
    const int d = depth_of(x);
    if (d == depth_) return 0;
    return d == 0 ? q_ + 1 : q_;
  }

  VertexId child(VertexId x, int c) const {
    require(c >= 0 && c < fan_out(x), ErrorKind::InvalidParameter, "child index out of range");
    return VertexId{first_child_[x.index] + static_cast<std::uint32_t>(c)};
  }

  /// Vertices at exactly depth d, as a contiguous id range [first, last).
  std::pair<std::uint32_t, std::uint32_t> level(int d) const {
    require(d >= 0 && d <= depth_, ErrorKind::InvalidParameter, "level out of range");
    return {level_start_[d], level_start_[d + 1]};
  }

  template <class F>
  void for_each_neighbor(VertexId x, F&& f) const {
    check(x);
    if (x != kRoot) f(VertexId{parent_[x.index]});
    const int fan = fan_out(x);
    for (int c = 0; c < fan; ++c) f(VertexId{first_child_[x.index] + static_cast<std::uint32_t>(c)});
  }

  std::vector<VertexId> neighbors(VertexId x) const {
    std::vector<VertexId> out;
    for_each_neighbor(x, [&](VertexId y) { out.push_back(y); });
    return out;
  }

  int degree(VertexId x) const { return (x == kRoot ? 0 : 1) + fan_out(x); }

  std::vector<int> address(VertexId x) const {
    check(x);
    std::vector<int> word(level_[x.index]);
    for (auto v = x.index; v != 0; v = parent_[v]) word[level_[v] - 1] = slot_[v];
    return word;
  }

  VertexId vertex_at(std::span<const int> word) const {
    require(static_cast<int>(word.size()) <= depth_, ErrorKind::InvalidParameter, "address longer than depth");
    VertexId v = kRoot;
    for (int c : word) v = child(v, c);
    return v;
  }

  /// Ancestor of x at depth d (d <= |x|).
  VertexId ancestor(VertexId x, int d) const {
    require(d >= 0 && d <= depth_of(x), ErrorKind::InvalidParameter, "ancestor depth out of range");
    auto v = x.index;
    while (level_[v] > d) v = parent_[v];
    return VertexId{v};
  }

  /// Length of the common prefix of the addresses of x and y.
  int meet_depth(VertexId x, VertexId y) const {
    check(x);
    check(y);
    auto a = x.index;
    auto b = y.index;
    while (level_[a] > level_[b]) a = parent_[a];
    while (level_[b] > level_[a]) b = parent_[b];
    while (a != b) {
      a = parent_[a];
      b = parent_[b];
    }
    return level_[a];
  }

  int distance(VertexId x, VertexId y) const {
    return depth_of(x) + depth_of(y) - 2 * meet_depth(x, y);
  }

  /// b_omega(x) = |x_omega| - d(x, x_omega).
  int busemann(const RayClass& omega, VertexId x) const {
    const int k = depth_of(x);
    require(k + 1 < depth_, ErrorKind::DepthInsufficient,
            "busemann needs |x| + 1 < D (|x| = " + std::to_string(k) + ")");
    require(k <= depth_of(omega.cylinder), ErrorKind::DepthInsufficient,
            "cylinder too shallow to resolve the ray near x");
    const int j = meet_depth(x, omega.cylinder);
    return 2 * j - k;
  }

  Rational cylinder_weight(int d) const {
    require(d >= 1 && d <= depth_, ErrorKind::InvalidParameter, "cylinder depth out of range");
    std::uint64_t den = static_cast<std::uint64_t>(q_ + 1);
    for (int i = 1; i < d; ++i) den *= static_cast<std::uint64_t>(q_);
    return Rational::make(1, den);
  }

  std::vector<RayClass> cylinders_at_depth(int d) const {
    const auto w = cylinder_weight(d);
    const auto [first, last] = level(d);
    std::vector<RayClass> out;
    out.reserve(last - first);
    for (auto v = first; v < last; ++v) out.push_back(RayClass{VertexId{v}, w});
    return out;
  }

  std::vector<RayClass> boundary_cylinders() const { return cylinders_at_depth(depth_); }

  /// Some depth-D cylinder inside the given (coarser) cylinder; picks child 0 repeatedly.
  RayClass refine_to_boundary(VertexId cylinder) const {
    auto v = cylinder;
    while (depth_of(v) < depth_) v = child(v, 0);
    return RayClass{v, cylinder_weight(depth_)};
  }

 private:
  void check(VertexId x) const {
    require(contains(x), ErrorKind::InvalidParameter, "unknown vertex " + std::to_string(x.index));
  }

  int q_;
  int depth_;
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> level_;
  std::vector<std::uint8_t> slot_;
  std::vector<std::uint32_t> first_child_;
  std::vector<std::uint32_t> level_start_;
};

}  // namespace treescat

template <>
struct std::hash<treescat::VertexId> {
  std::size_t operator()(treescat::VertexId v) const noexcept { return std::hash<std::uint32_t>{}(v.index); }
};

#endif  // TREESCAT_TREE_GEOMETRY_HPP

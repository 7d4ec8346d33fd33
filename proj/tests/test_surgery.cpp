#include <gtest/gtest.h>

#include "oracles.hpp"
#include "treescat/surgery.hpp"

using namespace treescat;

namespace {

FiniteGraph fixture(const std::string& name) { return finite_graph_from_json(oracle::load_json(name)); }

// Adjacency rows of the modified tree, straight from A0 + W on the truncation.
std::vector<std::vector<std::uint32_t>> modified_rows(const TruncatedTree& t, const NonlocalPotential& w,
                                                      std::uint32_t limit) {
  const auto g = oracle::tree_ball(t.q(), t.depth());
  std::vector<std::vector<std::uint32_t>> rows(limit);
  for (std::uint32_t x = 0; x < limit; ++x) {
    std::map<std::uint32_t, double> row;
    for (auto y : g.adj[x]) row[y] += 1.0;
    for (auto y : w.support()) row[y.index] += w(VertexId{x}, y).real();
    for (auto [y, v] : row) {
      EXPECT_TRUE(v == 0.0 || v == 1.0) << x << " " << y << " " << v;
      if (v == 1.0) rows[x].push_back(y);
    }
  }
  return rows;
}

}  // namespace

TEST(Surgery, NuByDegreesMatchesBallCounting) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int q = 2 + trial % 2;
    const auto g = oracle::random_asymptotic_graph(q, rng);
    const int v = nu(g);
    for (int r = 2; r <= 4; ++r) EXPECT_EQ(nu_by_ball(g, r), v);
    if (ball_count(g, 1).valid) EXPECT_EQ(nu_by_ball(g, 1), v);
  }
}

TEST(Surgery, MovesShiftNu) {
  const auto g = fixture("five_ends_graph.json");
  EXPECT_EQ(nu(g), -1);
  EXPECT_EQ(nu(move_m1(g)), -1 + (g.q - 1));
  EXPECT_EQ(nu(move_m2(g)), -2);
  EXPECT_EQ(nu(move_m2(move_m1(g))), 0);
}

TEST(Surgery, BalancedTreeShape) {
  for (int q : {2, 3})
    for (int m : {1, 2, 5, 9}) {
      const auto b = balanced_tree(q, m);
      const auto adj = b.adjacency();
      int leaves = 0;
      for (std::size_t v = 0; v < adj.size(); ++v) {
        if (v < static_cast<std::size_t>(m))
          EXPECT_EQ(static_cast<int>(adj[v].size()), q + 1);
        else {
          EXPECT_EQ(adj[v].size(), 1u);
          ++leaves;
        }
      }
      EXPECT_EQ(leaves, 2 + (q - 1) * m);
      EXPECT_EQ(b.edges.size() + 1, b.vertex_count());
    }
}

TEST(Surgery, ValidationRejectsBadShapes) {
  FiniteGraph g;
  g.q = 2;
  g.labels = {0, 1, 2};
  g.edges = {{0, 1}};
  g.ends = {{1, 2}, {2, 2}};
  EXPECT_THROW(nu(g), Error);  // disconnected
  g.edges = {{0, 1}, {1, 2}};
  EXPECT_THROW(nu(g), Error);  // roots adjacent
  g.edges = {{0, 1}, {0, 2}};
  g.ends = {{1, 0}, {2, 2}};
  EXPECT_THROW(nu(g), Error);  // end without children
  EXPECT_THROW(finite_graph_from_json(nlohmann::json::parse(R"({"q": 2, "vertices": [0, 1], "edges": [[0, 0]]})")), Error);
  EXPECT_THROW(finite_graph_from_json(nlohmann::json::parse(R"({"q": 2, "vertices": [0], "edges": [[0, 4]]})")), Error);
}

TEST(Surgery, FiveEndStarEmbedding) {
  const auto g = fixture("five_ends_graph.json");
  const auto r = embed(g);
  EXPECT_EQ(r.nu, -1);
  EXPECT_EQ(r.n_m1, 1);
  EXPECT_EQ(r.n_m2, 1);
  EXPECT_EQ(r.radius, 1);
  EXPECT_EQ(r.inner_count, 2);
  EXPECT_EQ(r.sphere_count, 6);
  EXPECT_TRUE(r.matrix_certificate);
  EXPECT_TRUE(r.component_certificate);
  const TruncatedTree t(g.q, r.depth);
  modified_rows(t, r.w, t.level(r.depth - 1).second);
  EXPECT_EQ(r.added.size(), 2u);
  EXPECT_EQ(r.removed.size(), 4u);
}

TEST(Surgery, TreeInputIsLeftAlone) {
  const auto r = embed(fixture("tree_graph.json"));
  EXPECT_EQ(r.nu, 0);
  EXPECT_EQ(r.n_m1 + r.n_m2, 0);
  EXPECT_TRUE(r.w.empty());
  EXPECT_TRUE(r.added.empty());
  EXPECT_TRUE(r.removed.empty());
  EXPECT_TRUE(r.matrix_certificate && r.component_certificate);
}

TEST(Surgery, CycleWithTreeCarriesAnEigenvalueZero) {
  const auto g = fixture("cycle_tree_graph.json");
  const auto r = embed(g);
  EXPECT_EQ(r.nu, 5);
  EXPECT_EQ(r.n_m1, 0);
  EXPECT_EQ(r.n_m2, 5);
  EXPECT_TRUE(r.matrix_certificate && r.component_certificate);
  const TruncatedTree t(g.q, r.depth);
  const auto pp = pp_embedded(t, r.w);
  bool zero = false;
  for (const auto& p : pp) {
    if (std::abs(p.lambda) > 1e-10) continue;
    zero = true;
    // lives on the 4-cycle: f1 + f2 = 0, f2 = f3, f3 + f4 = 0
    const auto cyc = [&](std::int64_t label) {
      for (std::size_t i = 0; i < r.keys.size(); ++i)
        if (r.keys[i] == core_key(label)) return p.value(t, VertexId{static_cast<std::uint32_t>(i)});
      return cplx{};
    };
    EXPECT_NEAR(std::abs(cyc(1)), 0.5, 1e-10);
    EXPECT_NEAR(std::abs(cyc(1) + cyc(2)), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(cyc(2) - cyc(3)), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(cyc(3) + cyc(4)), 0.0, 1e-10);
  }
  EXPECT_TRUE(zero);
}

TEST(Surgery, RandomGraphsEmbedExactly) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    const auto g = oracle::random_asymptotic_graph(2 + trial % 2, rng);
    const auto r = embed(g, {0, 2});
    EXPECT_EQ(r.nu, nu(g));
    EXPECT_EQ(r.nu, r.n_m2 - (g.q - 1) * r.n_m1);
    EXPECT_TRUE(r.matrix_certificate);
    EXPECT_TRUE(r.component_certificate);
  }
}

TEST(Surgery, WavesStayInTheirComponent) {
  const auto g = fixture("five_ends_graph.json");
  const auto r = embed(g);
  const TruncatedTree t(g.q, r.depth);
  std::vector<std::pair<VertexId, double>> samples;
  const auto [a, b] = t.level(t.depth() - 1);
  for (int k = 0; k < 5; ++k) samples.push_back({VertexId{a + (b - a) * static_cast<std::uint32_t>(k) / 5}, 0.3 + 0.7 * k});
  const auto report = component_support_check(r, t, samples);
  EXPECT_LT(report.max_leak(), 1e-10);
}

TEST(Surgery, JsonReport) {
  const auto r = embed(fixture("five_ends_graph.json"));
  const auto j = to_json(r);
  EXPECT_EQ(j.at("nu"), -1);
  EXPECT_EQ(j.at("moves").at("N1"), 1);
  EXPECT_EQ(j.at("moves").at("N2"), 1);
  EXPECT_EQ(j.at("ball").at("m"), 2);
  EXPECT_EQ(j.at("ball").at("M"), 6);
  EXPECT_TRUE(j.at("certificates").is_object());
  const auto w = potential_from_json(j.at("potential"));
  EXPECT_EQ(w.support(), r.w.support());
}

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "treescat/scattering.hpp"

using namespace treescat;

namespace {

NonlocalPotential star(int q) {
  std::vector<PotentialEntry> e;
  for (std::uint32_t c = 1; c <= static_cast<std::uint32_t>(q + 1); ++c) e.push_back({kRoot, VertexId{c}, -1.0});
  return NonlocalPotential::from_upper(q, e);
}

NonlocalPotential point_mass(int q, double v) {
  const std::vector<PotentialEntry> e{{kRoot, kRoot, v}};
  return NonlocalPotential::from_upper(q, e);
}

// residual of (A0 + W) e = lambda_s e over vertices of depth <= max_depth
double eigen_residual(const ScatteringProblem& p, const ScatteringSolution& e, const oracle::Graph& g, int max_depth) {
  const cplx lam = p.surface().lambda(e.s);
  double worst = 0.0;
  for (std::uint32_t x = 0; x < p.tree().level(max_depth).second; ++x) {
    const cplx ax = oracle::apply_operator(g, p.potential(), x, [&](std::uint32_t y) { return e(VertexId{y}); });
    worst = std::max(worst, std::abs(ax - lam * e(VertexId{x})));
  }
  return worst;
}

}  // namespace

TEST(Scattering, GeneralizedEigenfunctionsSolveTheEigenequation) {
  const TruncatedTree t(2, 8);
  const auto g = oracle::tree_ball(2, 8);
  std::mt19937_64 rng(5);
  const auto w = oracle::random_potential(t, rng, 5, 2);
  const ScatteringProblem p(t, w);
  for (double s : {0.4, 2.0, 5.5}) {
    for (const auto& ray : {t.cylinders_at_depth(8)[3], t.cylinders_at_depth(8)[300]}) {
      const auto e = ls_solve(p, ray, {s, 0.0});
      EXPECT_LT(eigen_residual(p, e, g, 5), 1e-11);
    }
  }
}

TEST(Scattering, CutoffChoiceDoesNotMatter) {
  const TruncatedTree t(3, 6);
  std::mt19937_64 rng(8);
  const auto w = oracle::random_potential(t, rng, 4, 2);
  const ScatteringProblem small(t, w);
  std::vector<VertexId> big;
  for (std::uint32_t v = 0; v < t.level(3).second; ++v) big.push_back(VertexId{v});
  const ScatteringProblem large(t, w, big);
  const auto ray = t.cylinders_at_depth(4)[17];
  for (double s : {0.3, 1.1, 2.5}) {
    const auto a = ls_solve(small, ray, {s, 0.0});
    const auto b = ls_solve(large, ray, {s, 0.0});
    for (std::uint32_t x = 0; x < t.level(4).second; ++x) EXPECT_NEAR(std::abs(a(VertexId{x}) - b(VertexId{x})), 0.0, 1e-12);
  }
}

TEST(Scattering, ZeroPotentialGivesPlaneWaves) {
  const TruncatedTree t(2, 5);
  const ScatteringProblem p(t, NonlocalPotential::from_upper(2, std::vector<PotentialEntry>{}));
  const auto ray = t.cylinders_at_depth(3)[2];
  const auto e = ls_solve(p, ray, {0.8, 0.0});
  for (std::uint32_t x = 0; x < t.level(3).second; ++x)
    EXPECT_EQ(e(VertexId{x}), plane_wave(t, p.surface(), VertexId{x}, ray, {0.8, 0.0}));
  EXPECT_EQ(tau_asymptotic(p, {0.8, 0.0}, ray, ray), cplx{});
  EXPECT_TRUE(pp_outside(t, p.potential()).empty());
}

TEST(Scattering, DepthRequirement) {
  const TruncatedTree t(2, 4);
  const std::vector<PotentialEntry> e{{VertexId{3}, t.level(3).first, 1.0}};
  try {
    ScatteringProblem p(t, NonlocalPotential::from_upper(2, e));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::DepthInsufficient);
  }
}

TEST(Scattering, StarHasEmbeddedEigenvalueZero) {
  const TruncatedTree t(2, 6);
  const auto g = oracle::tree_ball(2, 6);
  const auto w = star(2);
  const auto pp = pp_embedded(t, w);
  ASSERT_EQ(pp.size(), 1u);
  EXPECT_NEAR(pp[0].lambda, 0.0, 1e-10);
  const auto hull = hat_K(w, t);
  for (auto v : pp[0].vertices) EXPECT_TRUE(std::binary_search(hull.begin(), hull.end(), v));
  EXPECT_NEAR(pp[0].coefficients.norm(), 1.0, 1e-12);
  for (std::uint32_t x = 0; x < t.level(4).second; ++x) {
    const cplx ax = oracle::apply_operator(g, w, x, [&](std::uint32_t y) { return pp[0].value(t, VertexId{y}); });
    EXPECT_NEAR(std::abs(ax), 0.0, 1e-12);
  }
  const auto out = pp_outside(t, w);
  EXPECT_LE(out.size(), w.support().size());
}

TEST(Scattering, StarLsSystemIsSingularAtTheEmbeddedEnergy) {
  const TruncatedTree t(2, 6);
  const ScatteringProblem p(t, star(2));
  const double s0 = p.surface().tau() / 4;  // lambda = 0
  EXPECT_THROW(LsSystem(p, {s0, 0.0}), Error);
  std::vector<double> nodes;
  for (int k = 0; k < 200; ++k) nodes.push_back((k + 0.5) * p.surface().tau() / 200);
  const auto ex = exceptional_scan(p, nodes);
  EXPECT_TRUE(ex.contains(s0));
  EXPECT_TRUE(ex.contains(3 * s0));
  EXPECT_FALSE(ex.contains(1.0));
}

TEST(Scattering, PointMassBoundStateMatchesRadialReduction) {
  const int q = 2;
  const TruncatedTree t(q, 6);
  const auto w = point_mass(q, 3.0);
  const auto pp = pp_outside(t, w);
  ASSERT_EQ(pp.size(), 1u);
  // A0 + 3 delta on the radial subspace of a very deep ball
  const int n = 60;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  j(0, 0) = 3.0;
  j(0, 1) = j(1, 0) = std::sqrt(q + 1.0);
  for (int k = 1; k + 1 < n; ++k) j(k, k + 1) = j(k + 1, k) = std::sqrt(static_cast<double>(q));
  const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(j).eigenvalues()(n - 1);
  EXPECT_NEAR(pp[0].lambda, top, 1e-10);
  EXPECT_FALSE(pp[0].embedded);
  // normalized: sum over all vertices of |phi|^2 is geometric along the spheres
  double norm = 0.0;
  for (int d = 0; d < 40; ++d) {
    const double size = d == 0 ? 1.0 : (q + 1.0) * std::pow(q, d - 1);
    const auto x = t.ancestor(VertexId{t.level(5).first}, std::min(d, 5));
    const double v = d <= 5 ? std::abs(pp[0].value(t, x)) : std::abs(pp[0].value(t, VertexId{t.level(5).first})) *
                                                               std::pow(RealGreen(q, top).alpha(), d - 5);
    norm += size * v * v;
  }
  EXPECT_NEAR(norm, 1.0, 1e-8);
}

TEST(Scattering, NegativePointMassBindsBelowTheBand) {
  const TruncatedTree t(3, 5);
  const auto pp = pp_outside(t, point_mass(3, -4.0));
  ASSERT_EQ(pp.size(), 1u);
  EXPECT_LT(pp[0].lambda, -2.0 * std::sqrt(3.0));
  EXPECT_TRUE(pp_outside(t, point_mass(3, 0.1)).empty());
}

TEST(Scattering, UnitarityOfTheOnShellT) {
  const TruncatedTree t(2, 6);
  std::mt19937_64 rng(21);
  const ScatteringProblem p(t, oracle::random_potential(t, rng, 4, 2));
  for (double a : {-2.5, -0.7, 0.2, 1.9}) EXPECT_LT(unitarity_check(p, a), 1e-10);
}

TEST(Scattering, CorrelationIdentity) {
  const TruncatedTree t(2, 7);
  std::mt19937_64 rng(4);
  const ScatteringProblem p(t, oracle::random_potential(t, rng, 4, 2));
  for (auto [x, y, lam] : {std::tuple{0u, 0u, 0.5}, std::tuple{1u, 5u, -1.5}, std::tuple{9u, 20u, 2.2}}) {
    const auto c = correlation(p, lam, VertexId{x}, VertexId{y});
    EXPECT_NEAR(std::abs(c.lhs - c.rhs), 0.0, 1e-9);
  }
  const ScatteringProblem free(t, NonlocalPotential::from_upper(2, std::vector<PotentialEntry>{}));
  const auto c = correlation(free, 0.3, kRoot, kRoot);
  EXPECT_NEAR(std::abs(c.lhs - 1.0), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(c.rhs - 1.0), 0.0, 1e-12);
}

TEST(Scattering, ReducedSMatrixMatchesTheTMatrix) {
  const TruncatedTree t(2, 6);
  std::mt19937_64 rng(9);
  const ScatteringProblem p(t, oracle::random_potential(t, rng, 3, 1));
  const SpectralParam s{1.3, 0.0};
  const auto sm = s_matrix_reduced(p, s, 3);
  ASSERT_EQ(sm.rows(), 12);
  const auto ends = sphere_ends(t, 3);
  for (Eigen::Index out : {0, 5, 11})
    for (Eigen::Index in : {0, 3, 7}) {
      const cplx want = (out == in ? 1.0 : 0.0) + cplx{0.0, -2.0 * std::numbers::pi} *
                                                     t_matrix(p, ends[out], {-s.re, 0.0}, ends[in], s);
      EXPECT_NEAR(std::abs(sm(out, in) - want), 0.0, 1e-10);
    }
}

TEST(Scattering, CompletenessForARandomPotential) {
  const TruncatedTree t(2, 6);
  std::mt19937_64 rng(13);
  const auto w = oracle::random_potential(t, rng, 4, 2, 1.5);
  const ScatteringProblem p(t, w);
  auto pp = pp_embedded(t, w);
  const auto out = pp_outside(t, w);
  pp.insert(pp.end(), out.begin(), out.end());
  std::normal_distribution<double> normal;
  SparseFunction f;
  for (std::uint32_t v = 0; v < t.level(2).second; ++v) f.emplace_back(VertexId{v}, cplx{normal(rng), normal(rng)});
  const auto report = completeness(p, f, pp, 256);
  EXPECT_LT(report.defect(), 1e-8);
}

TEST(Scattering, ProjectorOverTheBandPlusBoundStatesIsTheIdentity) {
  const TruncatedTree t(2, 6);
  const auto w = point_mass(2, 3.0);
  const ScatteringProblem p(t, w);
  const auto pp = pp_outside(t, w);
  const SparseFunction f{{kRoot, 1.0}, {VertexId{2}, cplx{0.0, 0.5}}};
  const std::vector<VertexId> at{kRoot, VertexId{1}, VertexId{2}, VertexId{5}};
  const double e = p.surface().band_edge();
  const auto pf = spectral_projector(p, f, -e, e, at);
  for (std::size_t i = 0; i < at.size(); ++i) {
    cplx v = pf[i];
    for (const auto& phi : pp) v += phi.value(t, at[i]) * phi.inner(t, f);
    cplx want = 0.0;
    for (const auto& [x, fx] : f)
      if (x == at[i]) want = fx;
    EXPECT_NEAR(std::abs(v - want), 0.0, 1e-8) << i;
  }
}

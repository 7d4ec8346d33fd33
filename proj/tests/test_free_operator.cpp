#include <gtest/gtest.h>

#include "oracles.hpp"
#include "treescat/free_operator.hpp"
#include "treescat/quadrature.hpp"

using namespace treescat;

namespace {

// max over interior x of |(lambda - A0) G(., y)(x) - delta_y(x)|
double green_residual(int q, int depth, SpectralParam s, std::uint32_t y) {
  const SpectralSurface S(q);
  const auto g = oracle::tree_ball(q, depth);
  const auto dist = oracle::bfs(g, y);
  const cplx lam = S.lambda(s);
  double worst = 0.0;
  for (std::uint32_t x = 0; x < g.size(); ++x) {
    if (g.depth[x] >= depth) continue;
    cplx r = lam * green0(S, s, dist[x]);
    for (auto z : g.adj[x]) r -= green0(S, s, dist[z]);
    if (x == y) r -= 1.0;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace

TEST(FreeOperator, GreenSolvesTheResolventEquation) {
  EXPECT_LT(green_residual(2, 6, {0.7, 0.3}, 0), 1e-12);
  EXPECT_LT(green_residual(3, 5, {2.1, 0.05}, 9), 1e-12);
}

TEST(FreeOperator, GreenDiagonalClosedForm) {
  for (int q : {2, 3}) {
    const SpectralSurface S(q);
    for (cplx z : {cplx{0.3, 0.1}, cplx{5.0, 0.0}, cplx{-4.2, 0.3}, cplx{0.0, 2.0}}) {
      const auto s = S.param_of_energy(z);
      EXPECT_NEAR(std::abs(green0(S, s, 0) - green0_diagonal(S, z)), 0.0, 1e-12);
    }
  }
}

TEST(FreeOperator, PolesAreRejected) {
  const SpectralSurface S(2);
  EXPECT_THROW(green0(S, {0.0, -0.5}, 0), Error);
  EXPECT_THROW(green0(S, {S.tau() / 2, -0.5}, 3), Error);
  EXPECT_NO_THROW(green0(S, {0.0, 0.0}, 0));
}

TEST(FreeOperator, RealGreenOffTheBand) {
  const SpectralSurface S(2);
  for (double lam : {3.1, -3.5, 6.0}) {
    const RealGreen g(2, lam);
    const auto s = S.param_of_energy(cplx{lam, 0.0});
    for (int d = 0; d < 5; ++d) {
      EXPECT_NEAR(g.value(d), green0(S, s, d).real(), 1e-12);
      const double h = 1e-6;
      const double fd = (RealGreen(2, lam + h).value(d) - RealGreen(2, lam - h).value(d)) / (2 * h);
      EXPECT_NEAR(g.derivative(d), fd, 1e-6);
    }
  }
  EXPECT_THROW(RealGreen(2, 2.0), Error);
}

TEST(FreeOperator, PlaneWaveIsAGeneralizedEigenfunction) {
  const int q = 3;
  const int depth = 6;
  const TruncatedTree t(q, depth);
  const SpectralSurface S(q);
  const auto g = oracle::tree_ball(q, depth);
  for (SpectralParam s : {SpectralParam{0.4, 0.0}, SpectralParam{1.9, 0.2}}) {
    for (const auto& omega : {t.cylinders_at_depth(depth)[5], t.cylinders_at_depth(depth)[300]}) {
      for (std::uint32_t x = 0; x < t.level(depth - 3).second; ++x) {
        cplx acc = 0.0;
        for (auto y : g.adj[x]) acc += plane_wave(t, S, VertexId{y}, omega, s);
        EXPECT_NEAR(std::abs(acc - S.lambda(s) * plane_wave(t, S, VertexId{x}, omega, s)), 0.0, 1e-11);
      }
    }
  }
}

TEST(FreeOperator, WalkCountsMatchBrutePowering) {
  const TruncatedTree t(2, 7);
  const auto g = oracle::tree_ball(2, 7);
  const auto want = oracle::walk_counts(g, 0, 12);
  for (int n = 0; n <= 12; ++n) EXPECT_EQ(static_cast<double>(closed_walk_count(t, kRoot, n)), want[static_cast<std::size_t>(n)]);
  EXPECT_EQ(closed_walk_count(t, kRoot, 2), 3u);
  EXPECT_EQ(closed_walk_count(t, kRoot, 4), 15u);
  EXPECT_THROW(closed_walk_count(t, kRoot, 15), Error);
}

TEST(FreeOperator, StoneFormulaConverges) {
  const SpectralSurface S(2);
  for (double lam : {-2.0, 0.0, 1.3}) {
    const double exact = oracle::kesten_mckay(2, lam);
    EXPECT_NEAR(stone_dos(S, lam, 1e-6), exact, 1e-5);
    EXPECT_GT(std::abs(stone_dos(S, lam, 1e-1) - exact), std::abs(stone_dos(S, lam, 1e-3) - exact));
  }
  EXPECT_THROW(stone_dos(S, 0.0, 0.0), Error);
}

TEST(FreeOperator, RootMeasureMatchesDenseTruncation) {
  const int q = 2;
  const int depth = 5;
  const auto g = oracle::tree_ball(q, depth);
  const Eigen::MatrixXd a = Eigen::MatrixXd(oracle::sparse_adjacency(g));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const auto atoms = root_spectral_measure(q, depth);
  ASSERT_EQ(atoms.size(), static_cast<std::size_t>(depth + 1));
  double total = 0.0;
  for (const auto& atom : atoms) {
    double w = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k)
      if (std::abs(eig.eigenvalues()(k) - atom.lambda) < 1e-9) w += eig.eigenvectors()(0, k) * eig.eigenvectors()(0, k);
    EXPECT_NEAR(w, atom.weight, 1e-12);
    total += atom.weight;
  }
  EXPECT_NEAR(total, 1.0, 1e-13);
}

TEST(FreeOperator, FourierHelgasonRoundTrip) {
  const int q = 2;
  const TruncatedTree t(q, 5);
  const SpectralSurface S(q);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  SparseFunction f;
  for (std::uint32_t v = 0; v < t.level(2).second; ++v) f.emplace_back(VertexId{v}, cplx{normal(rng), normal(rng)});
  const auto image = fh_forward(t, S, f, t.cylinders_at_depth(2), periodic_rule(S.tau(), 256));
  EXPECT_NEAR(fh_norm_squared(S, image), norm_squared(f), 1e-10);
  for (const auto& [x, v] : f) EXPECT_NEAR(std::abs(fh_inverse(t, S, image, x) - v), 0.0, 1e-10);
  std::vector<VertexId> probe{kRoot, VertexId{3}, VertexId{8}};
  EXPECT_LT(fh_symmetry_defect(t, S, image, probe), 1e-10);
  EXPECT_THROW(fh_forward(t, S, f, t.cylinders_at_depth(1), periodic_rule(S.tau(), 8)), Error);
}

#ifndef TREESCAT_DTN_HPP
#define TREESCAT_DTN_HPP

// Dirichlet-to-Neumann maps of finite graphs and the transmission matrix of
// A0 + W obtained from the DtN map of a ball.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "treescat/errors.hpp"
#include "treescat/finite_graph.hpp"
#include "treescat/potential.hpp"
#include "treescat/scattering.hpp"
#include "treescat/spectral_surface.hpp"
#include "treescat/tree_geometry.hpp"

namespace treescat {

/// B on a finite graph whose vertices are split into boundary and interior.
struct BoundaryProblem {
  Eigen::MatrixXcd b;
  std::vector<Eigen::Index> boundary;
  std::vector<Eigen::Index> interior;

  Eigen::MatrixXcd block(std::span<const Eigen::Index> rows, std::span<const Eigen::Index> cols) const {
    Eigen::MatrixXcd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = b(rows[i], cols[j]);
    return out;
  }
};

/// Splits the vertices of b, checks the pattern against the graph's edges.
inline BoundaryProblem make_boundary_problem(const FiniteGraph& graph, Eigen::MatrixXcd b,
                                             std::span<const std::size_t> boundary) {
  const auto n = static_cast<Eigen::Index>(graph.vertex_count());
  require(b.rows() == n && b.cols() == n, ErrorKind::InvalidParameter, "B does not match the graph");
  const auto adj = graph.adjacency();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || b(i, j) == cplx{}) continue;
      const auto& row = adj[static_cast<std::size_t>(i)];
      require(std::binary_search(row.begin(), row.end(), static_cast<std::size_t>(j)), ErrorKind::InvalidStructure,
              "B has an entry off the edges");
    }
  BoundaryProblem p;
  p.b = std::move(b);
  std::vector<char> on_boundary(static_cast<std::size_t>(n), 0);
  for (auto v : boundary) {
    require(v < graph.vertex_count(), ErrorKind::InvalidParameter, "boundary vertex out of range");
    on_boundary[v] = 1;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    (on_boundary[static_cast<std::size_t>(i)] ? p.boundary : p.interior).push_back(i);
  return p;
}

/// Interior extension F with F = f on the boundary and (B F)(l) = 0 inside.
inline Eigen::VectorXcd dirichlet_solve(const BoundaryProblem& p, const Eigen::VectorXcd& f) {
  require(f.size() == static_cast<Eigen::Index>(p.boundary.size()), ErrorKind::InvalidParameter, "boundary data size");
  Eigen::VectorXcd full = Eigen::VectorXcd::Zero(p.b.rows());
  for (std::size_t i = 0; i < p.boundary.size(); ++i) full(p.boundary[i]) = f(static_cast<Eigen::Index>(i));
  if (p.interior.empty()) return full;
  const Eigen::MatrixXcd b00 = p.block(p.interior, p.interior);
  const Eigen::FullPivLU<Eigen::MatrixXcd> lu(b00);
  require(lu.isInvertible() && lu.rcond() > 1e-13, ErrorKind::DirichletSingular, "interior block is singular");
  const Eigen::VectorXcd inner = lu.solve(-p.block(p.interior, p.boundary) * f);
  for (std::size_t i = 0; i < p.interior.size(); ++i) full(p.interior[i]) = inner(static_cast<Eigen::Index>(i));
  return full;
}

/// Schur complement B_bb - B_b0 B_00^-1 B_0b.
inline Eigen::MatrixXcd dtn_operator(const BoundaryProblem& p) {
  const Eigen::MatrixXcd bbb = p.block(p.boundary, p.boundary);
  if (p.interior.empty()) return bbb;
  const Eigen::MatrixXcd b00 = p.block(p.interior, p.interior);
  const Eigen::FullPivLU<Eigen::MatrixXcd> lu(b00);
  require(lu.isInvertible() && lu.rcond() > 1e-13, ErrorKind::DirichletSingular, "interior block is singular");
  return bbb - p.block(p.boundary, p.interior) * lu.solve(p.block(p.interior, p.boundary));
}

/// Column l = (B F_l) on the boundary, F_l the Dirichlet extension of delta_l.
inline Eigen::MatrixXcd dtn_by_dirichlet(const BoundaryProblem& p) {
  const auto l = static_cast<Eigen::Index>(p.boundary.size());
  Eigen::MatrixXcd out(l, l);
  for (Eigen::Index k = 0; k < l; ++k) {
    const Eigen::VectorXcd full = p.b * dirichlet_solve(p, Eigen::VectorXcd::Unit(l, k));
    for (Eigen::Index i = 0; i < l; ++i) out(i, k) = full(p.boundary[static_cast<std::size_t>(i)]);
  }
  return out;
}

struct DtnTransmission {
  int radius = 0;
  std::vector<VertexId> ends;
  Eigen::MatrixXcd dtn;
  Eigen::MatrixXcd tau;  // [incoming end][outgoing end]
};

/// Ball B_n (depth <= n) and its compressed operator A^_n = A0 + W.
inline std::vector<VertexId> ball(const TruncatedTree& tree, int n) {
  require(n <= tree.depth(), ErrorKind::DepthInsufficient, "ball exceeds the truncation");
  std::vector<VertexId> out;
  const auto last = tree.level(n).second;
  out.reserve(last);
  for (std::uint32_t v = 0; v < last; ++v) out.push_back(VertexId{v});
  return out;
}

/// tau(s, l, l') from the DtN map of the ball of radius n:
///   M = -alpha^(-2n) [ (DN_s + q^(1/2+is))^-1 / C(s) + A ],  A_{ll'} = alpha^d(x_l, x_l'),
/// where M(l', l) = tau(s, l, l'). The result is returned as [l][l'].
inline DtnTransmission tau_via_dtn(const TruncatedTree& tree, const NonlocalPotential& w, SpectralParam s, int n = 0,
                                   double condition_limit = 1e10) {
  const SpectralSurface surface(tree.q());
  const int minimal = w.empty() ? 2 : minimal_ball_radius(tree, w);
  if (n == 0) n = minimal;
  require(n >= minimal, ErrorKind::InvalidParameter, "ball too small for the potential");
  const auto verts = ball(tree, n);
  const auto size = static_cast<Eigen::Index>(verts.size());
  const cplx lambda = surface.lambda(s);

  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    tree.for_each_neighbor(verts[static_cast<std::size_t>(i)], [&](VertexId y) {
      if (y.index < static_cast<std::uint32_t>(size)) b(i, y.index) += 1.0;
    });
    b(i, i) -= lambda;
  }
  const auto& k = w.support();
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j)
      b(k[i].index, k[j].index) += w.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

  BoundaryProblem p;
  p.b = std::move(b);
  const auto [first, last] = tree.level(n);
  for (Eigen::Index i = 0; i < size; ++i)
    (static_cast<std::uint32_t>(i) >= first ? p.boundary : p.interior).push_back(i);

  // lambda_s in the spectrum of A^_{n-1} makes the Dirichlet problem singular
  {
    const Eigen::MatrixXcd inner = p.block(p.interior, p.interior) + lambda * Eigen::MatrixXcd::Identity(
                                                                                 static_cast<Eigen::Index>(p.interior.size()),
                                                                                 static_cast<Eigen::Index>(p.interior.size()));
    const Eigen::VectorXd spec = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(inner, Eigen::EigenvaluesOnly).eigenvalues();
    const double gap = (spec.array().cast<cplx>() - lambda).abs().minCoeff();
    require(gap > 1e-10 * std::max(1.0, std::abs(lambda)), ErrorKind::DirichletSingular,
            "lambda_s is an eigenvalue of the interior operator");
  }

  DtnTransmission out;
  out.radius = n;
  for (auto v = first; v < last; ++v) out.ends.push_back(VertexId{v});
  out.dtn = dtn_operator(p);
  const auto l = out.dtn.rows();
  const cplx alpha = surface.alpha(s);
  const cplx c = surface.c_factor(s);
  const Eigen::MatrixXcd shifted = out.dtn + surface.power(0.5, s) * Eigen::MatrixXcd::Identity(l, l);
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
  const auto& sv = svd.singularValues();
  require(sv(sv.size() - 1) > 0 && sv(0) / sv(sv.size() - 1) <= condition_limit, ErrorKind::ExceptionalParameter,
          "DN_s + q^(1/2+is) is ill-conditioned");
  Eigen::MatrixXcd amat(l, l);
  for (Eigen::Index i = 0; i < l; ++i)
    for (Eigen::Index j = 0; j < l; ++j)
      amat(i, j) = std::pow(alpha, tree.distance(out.ends[static_cast<std::size_t>(i)], out.ends[static_cast<std::size_t>(j)]));
  const Eigen::MatrixXcd m = -std::pow(alpha, -2 * n) * (shifted.partialPivLu().inverse() / c + amat);
  out.tau = m.transpose();
  return out;
}

}  // namespace treescat

#endif  // TREESCAT_DTN_HPP

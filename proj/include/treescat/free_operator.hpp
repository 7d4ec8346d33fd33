#ifndef TREESCAT_FREE_OPERATOR_HPP
#define TREESCAT_FREE_OPERATOR_HPP

// The free adjacency operator A0 of T_q: Green's function, plane waves, the
// Fourier-Helgason transform and its inverse, closed-walk counts and the
// Stone-formula density of states.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "treescat/errors.hpp"
#include "treescat/parallel.hpp"
#include "treescat/quadrature.hpp"
#include "treescat/spectral_surface.hpp"
#include "treescat/tree_geometry.hpp"

namespace treescat {

/// Finitely supported function on the tree: (vertex, value) pairs, no repeats.
using SparseFunction = std::vector<std::pair<VertexId, cplx>>;

inline double norm_squared(const SparseFunction& f) {
  double acc = 0.0;
  for (const auto& [x, v] : f) acc += std::norm(v);
  return acc;
}

/// G0(lambda_s, x, y) for d = d(x, y): C(s) alpha(s)^d.
inline cplx green0(const SpectralSurface& surface, SpectralParam s, int d) {
  require(d >= 0, ErrorKind::InvalidParameter, "distance must be non-negative");
  const cplx u = surface.power(-1.0, SpectralParam{2.0 * s.re, 2.0 * s.im});  // q^(-1+2is)
  require(std::abs(u - 1.0) > 1e-13, ErrorKind::SingularParameter, "s is a pole of the Green's function");
  return surface.c_factor(s) * std::pow(surface.alpha(s), d);
}

/// Diagonal of the resolvent for an energy z off the band, written with
/// F(z) ~ z at infinity: G0(z, x, x) = 2q / (z (q-1) + (q+1) F(z)).
inline cplx green0_diagonal(const SpectralSurface& surface, cplx z) {
  const double q = surface.q();
  return 2.0 * q / (z * (q - 1.0) + (q + 1.0) * surface.f_of_energy(z));
}

/// Green's function at a real energy outside the band, where alpha is real
/// with |alpha| < 1/sqrt q.
class RealGreen {
 public:
  RealGreen(int q, double lambda) : q_(q), lambda_(lambda) {
    const double qd = q;
    const double disc = lambda * lambda - 4.0 * qd;
    require(disc > 0.0, ErrorKind::OutOfBand, "real Green's function needs |lambda| > 2 sqrt q");
    const double root = std::sqrt(disc);
    alpha_ = lambda > 0 ? (lambda - root) / (2.0 * qd) : (lambda + root) / (2.0 * qd);
    c_ = 1.0 / (lambda - (qd + 1.0) * alpha_);
    dalpha_ = alpha_ / (2.0 * qd * alpha_ - lambda);
    dc_ = -c_ * c_ * (1.0 - (qd + 1.0) * dalpha_);
  }

  double alpha() const { return alpha_; }
  double value(int d) const { return c_ * std::pow(alpha_, d); }

  /// d/d lambda of G0(lambda, d); equals -(G0^2)(x, y).
  double derivative(int d) const {
    const double head = dc_ * std::pow(alpha_, d);
    return d == 0 ? head : head + c_ * d * std::pow(alpha_, d - 1) * dalpha_;
  }

 private:
  int q_;
  double lambda_;
  double alpha_;
  double c_;
  double dalpha_;
  double dc_;
};

/// Incoming plane wave e0(x, omega, s) = q^((1/2 - is) b_omega(x)).
inline cplx plane_wave(const TruncatedTree& tree, const SpectralSurface& surface, VertexId x,
                       const RayClass& omega, SpectralParam s) {
  const int b = tree.busemann(omega, x);
  return surface.power(0.5 * b + s.im * b, SpectralParam{-s.re * b, 0.0});
}

/// Values of a transform on a (rays x s-nodes) grid, with the grid weights.
struct FHImage {
  std::vector<RayClass> rays;
  std::vector<QuadratureNode> nodes;
  Eigen::MatrixXcd values;  // rays x nodes
};

inline void require_support_depth(const TruncatedTree& tree, const SparseFunction& f, int ray_depth) {
  for (const auto& [x, v] : f) {
    const int k = tree.depth_of(x);
    require(k <= tree.depth() - 2, ErrorKind::DepthInsufficient, "support deeper than D - 2");
    require(k <= ray_depth, ErrorKind::DepthInsufficient, "rays too coarse for the support");
  }
}

/// f^(omega, s) = sum_x f(x) q^((1/2 + is) b_omega(x)) on the grid.
inline FHImage fh_forward(const TruncatedTree& tree, const SpectralSurface& surface, const SparseFunction& f,
                          std::vector<RayClass> rays, std::vector<QuadratureNode> nodes) {
  require(!rays.empty(), ErrorKind::InvalidParameter, "empty ray set");
  require_support_depth(tree, f, tree.depth_of(rays.front().cylinder));
  FHImage image{std::move(rays), std::move(nodes), {}};
  image.values.resize(static_cast<Eigen::Index>(image.rays.size()), static_cast<Eigen::Index>(image.nodes.size()));
  for (std::size_t r = 0; r < image.rays.size(); ++r) {
    std::vector<std::pair<int, cplx>> terms;
    terms.reserve(f.size());
    for (const auto& [x, v] : f) terms.emplace_back(tree.busemann(image.rays[r], x), v);
    for (std::size_t k = 0; k < image.nodes.size(); ++k) {
      const SpectralParam s{image.nodes[k].x, 0.0};
      cplx acc = 0.0;
      for (const auto& [b, v] : terms) acc += v * std::conj(surface.power(0.5 * b, SpectralParam{-s.re * b, 0.0}));
      image.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = acc;
    }
  }
  return image;
}

/// Quadrature value of int int e0(x, omega, s) F(omega, s) d sigma_O d mu(s).
inline cplx fh_inverse(const TruncatedTree& tree, const SpectralSurface& surface, const FHImage& image, VertexId x) {
  cplx acc = 0.0;
  for (std::size_t r = 0; r < image.rays.size(); ++r) {
    const int b = tree.busemann(image.rays[r], x);
    const double wr = image.rays[r].weight.value();
    for (std::size_t k = 0; k < image.nodes.size(); ++k) {
      const auto& node = image.nodes[k];
      const cplx e0 = surface.power(0.5 * b, SpectralParam{-node.x * b, 0.0});
      acc += wr * node.w * surface.mu_density(node.x) * e0 *
             image.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
    }
  }
  return acc;
}

/// int int |F|^2 d sigma_O d mu.
inline double fh_norm_squared(const SpectralSurface& surface, const FHImage& image) {
  double acc = 0.0;
  for (std::size_t r = 0; r < image.rays.size(); ++r) {
    const double wr = image.rays[r].weight.value();
    for (std::size_t k = 0; k < image.nodes.size(); ++k) {
      const auto& node = image.nodes[k];
      acc += wr * node.w * surface.mu_density(node.x) *
             std::norm(image.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
    }
  }
  return acc;
}

/// Largest violation of the range condition
///   int e0(x, w, s) F(w, s) d sigma = int e0(x, w, -s) F(w, -s) d sigma
/// over the given vertices. Needs a grid symmetric under s -> tau - s.
inline double fh_symmetry_defect(const TruncatedTree& tree, const SpectralSurface& surface, const FHImage& image,
                                 std::span<const VertexId> vertices) {
  const std::size_t n = image.nodes.size();
  double worst = 0.0;
  for (VertexId x : vertices) {
    std::vector<cplx> avg(n, 0.0);
    for (std::size_t r = 0; r < image.rays.size(); ++r) {
      const int b = tree.busemann(image.rays[r], x);
      const double wr = image.rays[r].weight.value();
      for (std::size_t k = 0; k < n; ++k) {
        const cplx e0 = surface.power(0.5 * b, SpectralParam{-image.nodes[k].x * b, 0.0});
        avg[k] += wr * e0 * image.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
      }
    }
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(avg[k] - avg[n - 1 - k]));
  }
  return worst;
}

/// [A0^n](x, x), exact, by sparse integer powering on the truncation.
inline std::uint64_t closed_walk_count(const TruncatedTree& tree, VertexId x, int n) {
  require(n >= 0, ErrorKind::InvalidParameter, "walk length must be non-negative");
  require(2 * (tree.depth_of(x) + 1) + n <= 2 * tree.depth(), ErrorKind::DepthInsufficient,
          "walks of this length feel the truncation");
  require(n * std::log2(tree.q() + 1.0) < 62.0, ErrorKind::InvalidParameter, "walk count would overflow");
  std::unordered_map<VertexId, std::uint64_t> current{{x, 1}};
  for (int step = 0; step < n; ++step) {
    std::unordered_map<VertexId, std::uint64_t> next;
    for (const auto& [v, c] : current) tree.for_each_neighbor(v, [&](VertexId w) { next[w] += c; });
    current = std::move(next);
  }
  const auto it = current.find(x);
  return it == current.end() ? 0 : it->second;
}

/// epsilon-smeared density -(1/pi) Im G0(lambda + i eps, x, x).
inline double stone_dos(const SpectralSurface& surface, double lambda, double eps) {
  require(eps > 0.0, ErrorKind::InvalidParameter, "eps must be positive");
  return -green0_diagonal(surface, cplx{lambda, eps}).imag() / std::numbers::pi;
}

/// Atoms of the spectral measure at the root of the depth-D truncation. The
/// root's cyclic subspace is spanned by the normalized sphere indicators, on
/// which A0 acts as a (D+1) x (D+1) Jacobi matrix.
struct SpectralAtom {
  double lambda = 0.0;
  double weight = 0.0;
};

inline std::vector<SpectralAtom> root_spectral_measure(int q, int depth) {
  require(q >= 2 && depth >= 1, ErrorKind::InvalidParameter, "bad truncation parameters");
  const int n = depth + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  jacobi(0, 1) = jacobi(1, 0) = std::sqrt(q + 1.0);
  for (int k = 1; k + 1 < n; ++k) jacobi(k, k + 1) = jacobi(k + 1, k) = std::sqrt(static_cast<double>(q));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  std::vector<SpectralAtom> atoms(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    atoms[static_cast<std::size_t>(k)] = {eig.eigenvalues()(k), eig.eigenvectors()(0, k) * eig.eigenvectors()(0, k)};
  return atoms;
}

}  // namespace treescat

#endif  // TREESCAT_FREE_OPERATOR_HPP

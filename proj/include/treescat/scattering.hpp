#ifndef TREESCAT_SCATTERING_HPP
#define TREESCAT_SCATTERING_HPP

// Stationary scattering for A = A0 + W on T_q: Lippmann-Schwinger solutions,
// the exceptional set, point spectrum, deformed Fourier-Helgason transform,
// spectral projectors, the full resolvent, correlations, T-matrix,
// transmission coefficients, on-shell unitarity and completeness.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "treescat/errors.hpp"
#include "treescat/free_operator.hpp"
#include "treescat/parallel.hpp"
#include "treescat/potential.hpp"
#include "treescat/quadrature.hpp"
#include "treescat/spectral_surface.hpp"
#include "treescat/tree_geometry.hpp"

namespace treescat {

/// Tree, potential and cutoff set X (chi = 1_X, X contains K). The tree must
/// outlive the problem.
class ScatteringProblem {
 public:
  ScatteringProblem(const TruncatedTree& tree, NonlocalPotential w, std::vector<VertexId> cutoff = {})
      : tree_(&tree), surface_(tree.q()), w_(std::move(w)) {
    require(w_.q() == tree.q(), ErrorKind::InvalidParameter, "potential and tree disagree on q");
    if (cutoff.empty()) cutoff = w_.support();
    std::sort(cutoff.begin(), cutoff.end());
    cutoff.erase(std::unique(cutoff.begin(), cutoff.end()), cutoff.end());
    cutoff_ = std::move(cutoff);
    for (auto x : cutoff_) depth_ = std::max(depth_, tree.depth_of(x));
    require(depth_ + 2 <= tree.depth(), ErrorKind::DepthInsufficient, "cutoff set must lie within depth D - 2");
    w_cut_ = w_.on(cutoff_);
    const auto n = static_cast<Eigen::Index>(cutoff_.size());
    dist_.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        dist_(i, j) = tree.distance(cutoff_[static_cast<std::size_t>(i)], cutoff_[static_cast<std::size_t>(j)]);
  }

  const TruncatedTree& tree() const { return *tree_; }
  const SpectralSurface& surface() const { return surface_; }
  const NonlocalPotential& potential() const { return w_; }
  const std::vector<VertexId>& cutoff() const { return cutoff_; }
  const Eigen::MatrixXcd& w_cut() const { return w_cut_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(cutoff_.size()); }

  /// Deepest cutoff vertex; rays need cylinders at least this deep.
  int cutoff_depth() const { return depth_; }

  /// Cylinders fine enough to resolve plane waves on X and on `extra`.
  std::vector<RayClass> rays(int extra_depth = 0) const {
    return tree_->cylinders_at_depth(std::max({1, depth_, extra_depth}));
  }

  /// G0(lambda_s) over X x X.
  Eigen::MatrixXcd green_block(SpectralParam s) const {
    const cplx c = green0(surface_, s, 0);
    const cplx a = surface_.alpha(s);
    Eigen::MatrixXcd g(size(), size());
    for (Eigen::Index i = 0; i < size(); ++i)
      for (Eigen::Index j = 0; j < size(); ++j) g(i, j) = c * std::pow(a, dist_(i, j));
    return g;
  }

  /// Id - chi G0(lambda_s) W on X.
  Eigen::MatrixXcd ls_matrix(SpectralParam s) const {
    return Eigen::MatrixXcd::Identity(size(), size()) - green_block(s) * w_cut_;
  }

  /// Real Green's block for |lambda| > 2 sqrt q and its lambda-derivative.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> real_green_block(double lambda) const {
    const RealGreen g(tree_->q(), lambda);
    Eigen::MatrixXd v(size(), size());
    Eigen::MatrixXd dv(size(), size());
    for (Eigen::Index i = 0; i < size(); ++i)
      for (Eigen::Index j = 0; j < size(); ++j) {
        v(i, j) = g.value(dist_(i, j));
        dv(i, j) = g.derivative(dist_(i, j));
      }
    return {v, dv};
  }

  /// sum_j G0(lambda_s, x, X_j) v_j.
  cplx apply_green(SpectralParam s, VertexId x, const Eigen::VectorXcd& v) const {
    const cplx c = green0(surface_, s, 0);
    const cplx a = surface_.alpha(s);
    cplx acc = 0.0;
    for (Eigen::Index j = 0; j < size(); ++j)
      acc += std::pow(a, tree_->distance(x, cutoff_[static_cast<std::size_t>(j)])) * v(j);
    return c * acc;
  }

  Eigen::VectorXcd plane_wave_on_cutoff(const RayClass& omega, SpectralParam s) const {
    Eigen::VectorXcd e(size());
    for (Eigen::Index i = 0; i < size(); ++i)
      e(i) = plane_wave(*tree_, surface_, cutoff_[static_cast<std::size_t>(i)], omega, s);
    return e;
  }

 private:
  const TruncatedTree* tree_;
  SpectralSurface surface_;
  NonlocalPotential w_;
  std::vector<VertexId> cutoff_;
  Eigen::MatrixXcd w_cut_;
  Eigen::MatrixXi dist_;
  int depth_ = 0;
};

/// e(x, omega, s) = e0(x, omega, s) + sum_{y in X} G0(lambda_s, x, y) (W a)(y).
struct ScatteringSolution {
  const ScatteringProblem* problem = nullptr;
  RayClass omega;
  SpectralParam s;
  Eigen::VectorXcd a;
  Eigen::VectorXcd g;

  cplx scattered(VertexId x) const { return problem->size() == 0 ? cplx{} : problem->apply_green(s, x, g); }

  cplx operator()(VertexId x) const {
    return plane_wave(problem->tree(), problem->surface(), x, omega, s) + scattered(x);
  }
};

/// The Lippmann-Schwinger system at one s, factored once for many rays.
class LsSystem {
 public:
  LsSystem(const ScatteringProblem& problem, SpectralParam s, double condition_limit = 1e10)
      : problem_(&problem), s_(s) {
    const auto m = problem.ls_matrix(s);
    if (m.size() > 0) {
      const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
      const auto& sv = svd.singularValues();
      condition_ = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
      require(condition_ <= condition_limit, ErrorKind::ExceptionalParameter,
              "Lippmann-Schwinger system is singular at s = " + std::to_string(s.re) + " (condition " +
                  std::to_string(condition_) + ")");
      lu_ = m.partialPivLu();
    }
  }

  SpectralParam s() const { return s_; }
  double condition() const { return condition_; }

  ScatteringSolution solve(const RayClass& omega) const {
    ScatteringSolution out{problem_, omega, s_, {}, {}};
    if (problem_->size() == 0) return out;
    out.a = lu_.solve(problem_->plane_wave_on_cutoff(omega, s_));
    out.g = problem_->w_cut() * out.a;
    return out;
  }

  /// Solves (Id - G0 W) v = rhs on X.
  Eigen::VectorXcd solve_raw(const Eigen::VectorXcd& rhs) const {
    if (problem_->size() == 0) return rhs;
    return lu_.solve(rhs);
  }

 private:
  const ScatteringProblem* problem_;
  SpectralParam s_;
  double condition_ = 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
};

inline ScatteringSolution ls_solve(const ScatteringProblem& problem, const RayClass& omega, SpectralParam s) {
  return LsSystem(problem, s).solve(omega);
}

// ---------------------------------------------------------------------------
// exceptional set

struct ExceptionalSample {
  double s = 0.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

struct ExceptionalSet {
  std::vector<ExceptionalSample> samples;
  std::vector<double> points;
  std::vector<std::pair<double, double>> intervals;
  double threshold = 1e-8;
  double period = 0.0;

  bool contains(double s) const {
    for (const auto& [a, b] : intervals)
      if (circle_in(s, a, b)) return true;
    return false;
  }

  /// Whether the arc [a, b] (a <= b, no wrap) meets a flagged interval.
  bool intersects(double a, double b) const {
    for (const auto& [lo, hi] : intervals) {
      for (double shift : {-period, 0.0, period})
        if (lo + shift <= b && hi + shift >= a) return true;
    }
    return false;
  }

 private:
  bool circle_in(double s, double a, double b) const {
    for (double shift : {-period, 0.0, period})
      if (s + shift >= a && s + shift <= b) return true;
    return false;
  }
};

inline std::pair<double, double> ls_singular_range(const ScatteringProblem& problem, double s) {
  if (problem.size() == 0) return {1.0, 1.0};
  const auto sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(problem.ls_matrix({s, 0.0})).singularValues();
  return {sv(sv.size() - 1), sv(0)};
}

/// sigma_min / sigma_max of Id - chi G0 W over the nodes; every local minimum
/// is refined by golden-section search and flagged below `threshold`.
inline ExceptionalSet exceptional_scan(const ScatteringProblem& problem, std::span<const double> nodes,
                                       double threshold = 1e-8, unsigned threads = 1) {
  ExceptionalSet out;
  out.threshold = threshold;
  out.period = problem.surface().tau();
  out.samples.resize(nodes.size());
  parallel_for(nodes.size(), threads, [&](std::size_t k) {
    const auto [lo, hi] = ls_singular_range(problem, nodes[k]);
    out.samples[k] = {nodes[k], lo, hi};
  });
  if (problem.size() == 0 || nodes.size() < 3) return out;
  auto ratio = [&](double s) {
    const auto [lo, hi] = ls_singular_range(problem, s);
    return lo / hi;
  };
  const std::size_t n = nodes.size();
  const double step = out.period / static_cast<double>(n);
  std::vector<double> refined(n, std::numeric_limits<double>::quiet_NaN());
  parallel_for(n, threads, [&](std::size_t k) {
    const auto r = [&](std::size_t i) { return out.samples[i].sigma_min / out.samples[i].sigma_max; };
    const std::size_t prev = (k + n - 1) % n;
    const std::size_t next = (k + 1) % n;
    if (!(r(k) <= r(prev) && r(k) < r(next))) return;
    double a = nodes[k] - step;
    double b = nodes[k] + step;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = ratio(c);
    double fd = ratio(d);
    for (int it = 0; it < 200 && b - a > 1e-14 * out.period; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = ratio(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = ratio(d);
      }
    }
    const double best = 0.5 * (a + b);
    if (ratio(best) < threshold) refined[k] = std::fmod(best + out.period, out.period);
  });
  for (double p : refined) {
    if (std::isnan(p)) continue;
    out.points.push_back(p);
    out.intervals.emplace_back(p - step, p + step);
  }
  return out;
}

// ---------------------------------------------------------------------------
// point spectrum

/// A normalized l2 eigenfunction. Embedded ones are finitely supported and
/// stored by value; outside ones are G0(lambda) h with h on the cutoff set.
struct PointEigen {
  double lambda = 0.0;
  bool embedded = true;
  std::vector<VertexId> vertices;
  Eigen::VectorXcd coefficients;

  cplx value(const TruncatedTree& tree, VertexId x) const {
    if (embedded) {
      const auto it = std::lower_bound(vertices.begin(), vertices.end(), x);
      if (it == vertices.end() || *it != x) return {};
      return coefficients(static_cast<Eigen::Index>(it - vertices.begin()));
    }
    const RealGreen g(tree.q(), lambda);
    cplx acc = 0.0;
    for (std::size_t j = 0; j < vertices.size(); ++j)
      acc += g.value(tree.distance(x, vertices[j])) * coefficients(static_cast<Eigen::Index>(j));
    return acc;
  }

  /// <phi, f>
  cplx inner(const TruncatedTree& tree, const SparseFunction& f) const {
    cplx acc = 0.0;
    for (const auto& [x, v] : f) acc += std::conj(value(tree, x)) * v;
    return acc;
  }
};

/// Orthonormal basis of the kernel of m (columns), using singular values below tol.
inline Eigen::MatrixXcd null_space(const Eigen::MatrixXcd& m, double tol) {
  if (m.rows() == 0) return Eigen::MatrixXcd::Identity(m.cols(), m.cols());
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return svd.matrixV().rightCols(m.cols() - rank);
}

/// Eigenvalues in I_q with eigenfunctions supported in K^.
inline std::vector<PointEigen> pp_embedded(const TruncatedTree& tree, const NonlocalPotential& w, double tol = 1e-9) {
  std::vector<PointEigen> out;
  if (w.empty()) return out;
  const auto hull = hat_K(w, tree);
  const auto a = compress_operator(tree, w, hull);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(a);
  // rows: complement vertices adjacent to the hull
  std::vector<VertexId> rim;
  for (auto x : hull)
    tree.for_each_neighbor(x, [&](VertexId y) {
      if (!std::binary_search(hull.begin(), hull.end(), y)) rim.push_back(y);
    });
  std::sort(rim.begin(), rim.end());
  rim.erase(std::unique(rim.begin(), rim.end()), rim.end());
  Eigen::MatrixXcd rows = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rim.size()), static_cast<Eigen::Index>(hull.size()));
  for (std::size_t i = 0; i < rim.size(); ++i)
    for (std::size_t j = 0; j < hull.size(); ++j)
      if (tree.distance(rim[i], hull[j]) == 1) rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;

  const double edge = tree.q() > 0 ? 2.0 * std::sqrt(static_cast<double>(tree.q())) : 0.0;
  const auto& vals = eig.eigenvalues();
  Eigen::Index start = 0;
  while (start < vals.size()) {
    Eigen::Index stop = start + 1;
    while (stop < vals.size() && vals(stop) - vals(stop - 1) < tol) ++stop;
    const double lambda = vals.segment(start, stop - start).mean();
    if (std::abs(lambda) <= edge + tol) {
      const Eigen::MatrixXcd space = eig.eigenvectors().middleCols(start, stop - start);
      const Eigen::MatrixXcd kernel = null_space(rows * space, 1e-9);
      for (Eigen::Index k = 0; k < kernel.cols(); ++k) {
        PointEigen p;
        p.lambda = lambda;
        p.embedded = true;
        p.vertices = hull;
        p.coefficients = space * kernel.col(k);
        out.push_back(std::move(p));
      }
    }
    start = stop;
  }
  return out;
}

struct OutsideScanOptions {
  double step_factor = 1e-3;
  double tolerance = 1e-12;
};

/// Eigenvalues off the band. With W = U L U* on its range, lambda is an
/// eigenvalue iff M(lambda) = L^-1 - U* G0(lambda) U is singular; each sorted
/// eigenvalue branch of M increases with lambda on either side of the band.
inline std::vector<PointEigen> pp_outside(const TruncatedTree& tree, const NonlocalPotential& w,
                                          OutsideScanOptions options = {}) {
  std::vector<PointEigen> out;
  if (w.empty()) return out;
  const ScatteringProblem problem(tree, w);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> weig(w.matrix());
  std::vector<Eigen::Index> keep;
  const double wnorm = w.operator_norm();
  for (Eigen::Index i = 0; i < weig.eigenvalues().size(); ++i)
    if (std::abs(weig.eigenvalues()(i)) > 1e-12 * wnorm) keep.push_back(i);
  const auto r = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXcd u(problem.size(), r);
  Eigen::VectorXd inv_l(r);
  for (Eigen::Index k = 0; k < r; ++k) {
    u.col(k) = weig.eigenvectors().col(keep[static_cast<std::size_t>(k)]);
    inv_l(k) = 1.0 / weig.eigenvalues()(keep[static_cast<std::size_t>(k)]);
  }
  auto bs_matrix = [&](double lambda) {
    const auto [g, dg] = problem.real_green_block(lambda);
    Eigen::MatrixXcd m = inv_l.asDiagonal();
    m -= u.adjoint() * g.cast<cplx>() * u;
    return m;
  };
  auto branches = [&](double lambda) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(bs_matrix(lambda), Eigen::EigenvaluesOnly).eigenvalues().eval();
  };

  const double q = tree.q();
  const double edge = 2.0 * std::sqrt(q);
  const double reach = q + 1.0 + wnorm;
  const double step = options.step_factor * wnorm;
  const double inner_gap = 1e-12;
  const std::array<std::pair<double, double>, 2> ranges{{{-reach, -edge - inner_gap}, {edge + inner_gap, reach}}};
  std::vector<double> roots;
  for (const auto& [lo, hi] : ranges) {
    const auto at_lo = branches(lo);
    const auto at_hi = branches(hi);
    for (Eigen::Index k = 0; k < r; ++k) {
      const double scale = std::max(1.0, std::abs(inv_l(k)));
      require(std::abs(at_lo(k)) > 1e-12 * scale && std::abs(at_hi(k)) > 1e-12 * scale,
              ErrorKind::InconclusiveRange, "eigenvalue branch vanishes at the end of the scan range");
      if (!(at_lo(k) < 0.0 && at_hi(k) > 0.0)) continue;
      // bracket on the scan grid, then bisect
      double a = lo;
      double b = hi;
      for (double x = lo + step; x < hi; x += step) {
        if (branches(x)(k) > 0.0) {
          b = x;
          break;
        }
        a = x;
      }
      while (b - a > options.tolerance) {
        const double mid = 0.5 * (a + b);
        (branches(mid)(k) > 0.0 ? b : a) = mid;
      }
      roots.push_back(0.5 * (a + b));
    }
  }
  std::sort(roots.begin(), roots.end());

  std::size_t i = 0;
  while (i < roots.size()) {
    std::size_t j = i + 1;
    while (j < roots.size() && roots[j] - roots[j - 1] < 1e-9) ++j;
    double lambda = 0.0;
    for (std::size_t k = i; k < j; ++k) lambda += roots[k];
    lambda /= static_cast<double>(j - i);
    const auto mult = static_cast<Eigen::Index>(j - i);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> meig(bs_matrix(lambda));
    // the branches closest to zero span the kernel
    std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
    for (Eigen::Index k = 0; k < r; ++k) order[static_cast<std::size_t>(k)] = k;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) {
      return std::abs(meig.eigenvalues()(x)) < std::abs(meig.eigenvalues()(y));
    });
    Eigen::MatrixXcd h(problem.size(), mult);
    for (Eigen::Index k = 0; k < mult; ++k) h.col(k) = u * meig.eigenvectors().col(order[static_cast<std::size_t>(k)]);
    // ||G0 h||^2 = -<h, dG0/dlambda h>; orthonormalize with that Gram matrix
    const auto [g, dg] = problem.real_green_block(lambda);
    const Eigen::MatrixXcd gram = -(h.adjoint() * dg.cast<cplx>() * h);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> geig(gram);
    const Eigen::MatrixXcd basis = h * geig.eigenvectors() * geig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
    for (Eigen::Index k = 0; k < mult; ++k) {
      PointEigen p;
      p.lambda = lambda;
      p.embedded = false;
      p.vertices = problem.cutoff();
      p.coefficients = basis.col(k);
      out.push_back(std::move(p));
    }
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// transforms and projectors

inline SparseFunction sorted_unique(SparseFunction f) {
  std::sort(f.begin(), f.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < f.size(); ++i)
    require(f[i].first != f[i - 1].first, ErrorKind::InvalidParameter, "function lists a vertex twice");
  return f;
}

inline int support_depth(const TruncatedTree& tree, const SparseFunction& f) {
  int d = 0;
  for (const auto& [x, v] : f) d = std::max(d, tree.depth_of(x));
  return d;
}

/// f^_sc(omega, s) = sum_x f(x) conj(e(x, omega, s)) on the grid.
inline FHImage deformed_fh(const ScatteringProblem& problem, const SparseFunction& f, std::vector<RayClass> rays,
                           std::vector<QuadratureNode> nodes, unsigned threads = 1) {
  require(!rays.empty(), ErrorKind::InvalidParameter, "empty ray set");
  require_support_depth(problem.tree(), f, problem.tree().depth_of(rays.front().cylinder));
  FHImage image{std::move(rays), std::move(nodes), {}};
  image.values.resize(static_cast<Eigen::Index>(image.rays.size()), static_cast<Eigen::Index>(image.nodes.size()));
  parallel_for(image.nodes.size(), threads, [&](std::size_t k) {
    const LsSystem system(problem, {image.nodes[k].x, 0.0});
    for (std::size_t r = 0; r < image.rays.size(); ++r) {
      const auto e = system.solve(image.rays[r]);
      cplx acc = 0.0;
      for (const auto& [x, v] : f) acc += v * std::conj(e(x));
      image.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = acc;
    }
  });
  return image;
}

/// The two arcs of S0 over an energy window J = [lo, hi] inside I_q.
inline std::array<std::pair<double, double>, 2> arcs_over(const SpectralSurface& surface, double lo, double hi) {
  require(lo < hi, ErrorKind::InvalidParameter, "empty energy window");
  const double e = surface.band_edge();
  require(lo >= -e - 1e-12 && hi <= e + 1e-12, ErrorKind::OutOfBand, "window must lie in I_q");
  const double a = surface.s_of_lambda(std::min(hi, e)).re;
  const double b = surface.s_of_lambda(std::max(lo, -e)).re;
  return {{{a, b}, {surface.tau() - b, surface.tau() - a}}};
}

struct ProjectorOptions {
  int panels = 8;
  int order = 24;
  unsigned threads = 1;
};

/// P_J f at the requested vertices, by Gauss-Legendre over both arcs of J^.
inline std::vector<cplx> spectral_projector(const ScatteringProblem& problem, const SparseFunction& f, double lo,
                                            double hi, std::span<const VertexId> at,
                                            const ExceptionalSet* exceptional = nullptr, ProjectorOptions options = {}) {
  const auto& tree = problem.tree();
  const auto& surface = problem.surface();
  const auto arcs = arcs_over(surface, lo, hi);
  if (exceptional != nullptr)
    for (const auto& [a, b] : arcs)
      require(!exceptional->intersects(a, b), ErrorKind::ExceptionalInterval, "window meets the exceptional set");
  int depth = support_depth(tree, f);
  for (auto x : at) depth = std::max(depth, tree.depth_of(x));
  const auto rays = problem.rays(depth);
  std::vector<QuadratureNode> nodes;
  for (const auto& [a, b] : arcs) {
    const auto rule = composite_gauss(a, b, options.panels, options.order);
    nodes.insert(nodes.end(), rule.begin(), rule.end());
  }
  std::vector<std::vector<cplx>> partial(nodes.size(), std::vector<cplx>(at.size(), 0.0));
  parallel_for(nodes.size(), options.threads, [&](std::size_t k) {
    const SpectralParam s{nodes[k].x, 0.0};
    const LsSystem system(problem, s);
    const double weight = nodes[k].w * surface.mu_density(s.re);
    for (const auto& ray : rays) {
      const auto e = system.solve(ray);
      cplx fhat = 0.0;
      for (const auto& [x, v] : f) fhat += v * std::conj(e(x));
      const double wr = ray.weight.value();
      for (std::size_t i = 0; i < at.size(); ++i) partial[k][i] += weight * wr * e(at[i]) * fhat;
    }
  });
  std::vector<cplx> out(at.size(), 0.0);
  for (const auto& row : partial)
    for (std::size_t i = 0; i < at.size(); ++i) out[i] += row[i];
  return out;
}

// ---------------------------------------------------------------------------
// resolvent and correlations

/// G(lambda_s, x, y) = G0 + G0 W G, through the system on X.
inline cplx full_resolvent(const ScatteringProblem& problem, SpectralParam s, VertexId x, VertexId y,
                           double condition_limit = 1e10) {
  const auto& tree = problem.tree();
  const auto& surface = problem.surface();
  const cplx base = green0(surface, s, tree.distance(x, y));
  if (problem.size() == 0) return base;
  std::optional<LsSystem> system;
  try {
    system.emplace(problem, s, condition_limit);
  } catch (const Error& err) {
    fail(ErrorKind::SingularParameter, err.what());
  }
  Eigen::VectorXcd col(problem.size());
  for (Eigen::Index i = 0; i < problem.size(); ++i)
    col(i) = green0(surface, s, tree.distance(problem.cutoff()[static_cast<std::size_t>(i)], y));
  const Eigen::VectorXcd gk = system->solve_raw(col);
  return base + problem.apply_green(s, x, problem.w_cut() * gk);
}

/// Boundary value G(lambda + i0, x, y) for lambda inside the band.
inline cplx resolvent_plus(const ScatteringProblem& problem, double lambda, VertexId x, VertexId y) {
  const auto& surface = problem.surface();
  const auto s = surface.s_of_lambda(lambda);
  return full_resolvent(problem, {surface.tau() - s.re, 0.0}, x, y);
}

struct CorrelationPair {
  cplx lhs;
  cplx rhs;
};

/// int conj(e(x, w, s)) e(y, w, s) d sigma_O against
/// -k(lambda) (G(lambda+i0, y, x) - conj G(lambda+i0, x, y)) / 2i.
inline CorrelationPair correlation(const ScatteringProblem& problem, double lambda, VertexId x, VertexId y) {
  const auto& surface = problem.surface();
  const auto& tree = problem.tree();
  require(std::abs(lambda) < surface.band_edge(), ErrorKind::BandEdgeSingularity, "correlation needs an interior energy");
  const double q = tree.q();
  const auto s = surface.s_of_lambda(lambda);
  const LsSystem system(problem, s);
  CorrelationPair out{};
  for (const auto& ray : problem.rays(std::max(tree.depth_of(x), tree.depth_of(y)))) {
    const auto e = system.solve(ray);
    out.lhs += ray.weight.value() * std::conj(e(x)) * e(y);
  }
  const double k = 2.0 * ((q + 1.0) * (q + 1.0) - lambda * lambda) / ((q + 1.0) * std::sqrt(4.0 * q - lambda * lambda));
  const cplx gyx = resolvent_plus(problem, lambda, y, x);
  const cplx gxy = resolvent_plus(problem, lambda, x, y);
  out.rhs = -k * (gyx - std::conj(gxy)) / cplx{0.0, 2.0};
  return out;
}

// ---------------------------------------------------------------------------
// T-matrix and transmission coefficients

/// T(omega, s; omega', s') = sum_{x,y} e(x, omega', s') conj(W(x, y)) conj(e0(y, omega, s)).
inline cplx t_matrix(const ScatteringProblem& problem, const RayClass& omega, SpectralParam s, const RayClass& omega2,
                     SpectralParam s2) {
  if (problem.size() == 0) return {};
  const auto e = ls_solve(problem, omega2, s2);
  Eigen::VectorXcd ex(problem.size());
  for (Eigen::Index i = 0; i < problem.size(); ++i) ex(i) = e(problem.cutoff()[static_cast<std::size_t>(i)]);
  const Eigen::VectorXcd e0 = problem.plane_wave_on_cutoff(omega, s);
  return (ex.transpose() * problem.w_cut().conjugate() * e0.conjugate())(0, 0);
}

/// tau(s, omega, omega') = C(s) sum_y (W a)(y) q^((1/2 - is) b_omega'(y)).
inline cplx tau_asymptotic(const ScatteringProblem& problem, SpectralParam s, const RayClass& incoming,
                           const RayClass& outgoing) {
  if (problem.size() == 0) return {};
  const auto e = ls_solve(problem, incoming, s);
  return problem.surface().c_factor(s) * problem.plane_wave_on_cutoff(outgoing, s).dot(e.g.conjugate());
}

/// Ends of the ball of radius n: the depth-n sphere, as rays.
inline std::vector<RayClass> sphere_ends(const TruncatedTree& tree, int n) { return tree.cylinders_at_depth(n); }

/// Smallest admissible ball radius: B_{n-2} is the smallest ball containing K.
inline int minimal_ball_radius(const TruncatedTree& tree, const NonlocalPotential& w) {
  return w.max_depth(tree) + 2;
}

/// [tau(s, l, l')] with rows the incoming end l and columns the outgoing end l'.
inline Eigen::MatrixXcd tau_matrix_asymptotic(const ScatteringProblem& problem, SpectralParam s, int n) {
  const auto ends = sphere_ends(problem.tree(), n);
  const auto count = static_cast<Eigen::Index>(ends.size());
  Eigen::MatrixXcd tau = Eigen::MatrixXcd::Zero(count, count);
  if (problem.size() == 0) return tau;
  require(n > problem.cutoff_depth(), ErrorKind::DepthInsufficient, "ends must lie beyond the cutoff set");
  const LsSystem system(problem, s);
  const cplx c = problem.surface().c_factor(s);
  Eigen::MatrixXcd waves(problem.size(), count);
  for (Eigen::Index l = 0; l < count; ++l) waves.col(l) = problem.plane_wave_on_cutoff(ends[static_cast<std::size_t>(l)], s);
  for (Eigen::Index l = 0; l < count; ++l) {
    const auto e = system.solve(ends[static_cast<std::size_t>(l)]);
    tau.row(l) = c * (waves.transpose() * e.g).transpose();
  }
  return tau;
}

/// On-shell S-matrix between ends: Id + (-2 i pi / C(s)) tau^T, indexed [out][in].
inline Eigen::MatrixXcd s_matrix_reduced(const ScatteringProblem& problem, SpectralParam s, int n) {
  const auto tau = tau_matrix_asymptotic(problem, s, n);
  const cplx factor = cplx{0.0, -2.0 * std::numbers::pi} / problem.surface().c_factor(s);
  return Eigen::MatrixXcd::Identity(tau.rows(), tau.cols()) + factor * tau.transpose();
}

/// max |Im T(w, s; w', s) - pi int conj(T(w'', s''; w, s)) T(w'', s''; w', s) delta(lambda'' - a)|
/// over all ray pairs, with s = s(a) on the principal sheet.
inline double unitarity_check(const ScatteringProblem& problem, double a) {
  const auto& surface = problem.surface();
  const auto shell = surface.on_shell_weight(a);
  if (problem.size() == 0) return 0.0;
  const auto rays = problem.rays();
  const auto s0 = shell[0].s;
  const auto n = static_cast<Eigen::Index>(rays.size());
  const LsSystem system(problem, s0);
  // columns: e(., w, s0) on X
  Eigen::MatrixXcd ex(problem.size(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto e = system.solve(rays[static_cast<std::size_t>(j)]);
    for (Eigen::Index i = 0; i < problem.size(); ++i) ex(i, j) = e(problem.cutoff()[static_cast<std::size_t>(i)]);
  }
  const Eigen::MatrixXcd wbar = problem.w_cut().conjugate();
  // t[p](w'', w) = T(w'', s''_p; w, s0)
  auto t_block = [&](SpectralParam s2) {
    Eigen::MatrixXcd e0(problem.size(), n);
    for (Eigen::Index j = 0; j < n; ++j) e0.col(j) = problem.plane_wave_on_cutoff(rays[static_cast<std::size_t>(j)], s2);
    return Eigen::MatrixXcd(e0.adjoint() * wbar.transpose() * ex);
  };
  const Eigen::MatrixXcd t_same = t_block(s0);
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& point : shell) {
    const Eigen::MatrixXcd t = point.s.re == s0.re ? t_same : t_block(point.s);
    Eigen::VectorXd cw(n);
    for (Eigen::Index j = 0; j < n; ++j) cw(j) = rays[static_cast<std::size_t>(j)].weight.value();
    rhs += std::numbers::pi * point.weight * (t.adjoint() * cw.asDiagonal() * t);
  }
  const Eigen::MatrixXcd lhs = (t_same - t_same.adjoint()) / cplx{0.0, 2.0};
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// completeness

struct CompletenessReport {
  double norm2 = 0.0;
  double pp = 0.0;
  double ac = 0.0;
  double defect() const { return std::abs(norm2 - pp - ac); }
};

/// ||f||^2 against sum |<phi, f>|^2 + int int |f^_sc|^2 d sigma_O d mu.
inline CompletenessReport completeness(const ScatteringProblem& problem, const SparseFunction& f,
                                       std::span<const PointEigen> point_spectrum, int s_nodes, unsigned threads = 1) {
  const auto& tree = problem.tree();
  CompletenessReport out;
  out.norm2 = norm_squared(f);
  for (const auto& p : point_spectrum) out.pp += std::norm(p.inner(tree, f));
  const auto image = deformed_fh(problem, f, problem.rays(support_depth(tree, f)),
                                 periodic_rule(problem.surface().tau(), s_nodes), threads);
  out.ac = fh_norm_squared(problem.surface(), image);
  return out;
}

}  // namespace treescat

#endif  // TREESCAT_SCATTERING_HPP

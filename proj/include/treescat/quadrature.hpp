#ifndef TREESCAT_QUADRATURE_HPP
#define TREESCAT_QUADRATURE_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include "treescat/errors.hpp"

namespace treescat {

struct QuadratureNode {
  double x = 0.0;
  double w = 0.0;
};

/// Equispaced rule on the circle [0, period) with nodes offset by half a step.
/// Spectrally accurate for smooth periodic integrands, and never lands on
/// 0, period/4, period/2 when n is a multiple of 4.
inline std::vector<QuadratureNode> periodic_rule(double period, int n) {
  require(n >= 1, ErrorKind::InvalidParameter, "node count must be positive");
  std::vector<QuadratureNode> out(static_cast<std::size_t>(n));
  const double h = period / n;
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = {(k + 0.5) * h, h};
  return out;
}

/// Gauss-Legendre rule with n nodes on [a, b] (Newton on the Legendre recurrence).
inline std::vector<QuadratureNode> gauss_legendre(int n, double a, double b) {
  require(n >= 1, ErrorKind::InvalidParameter, "node count must be positive");
  std::vector<QuadratureNode> out(static_cast<std::size_t>(n));
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0;
    double p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    out[static_cast<std::size_t>(i)] = {mid - half * z, half * w};
    out[static_cast<std::size_t>(n - 1 - i)] = {mid + half * z, half * w};
  }
  return out;
}

/// Composite Gauss-Legendre: `panels` equal panels of `order` nodes each.
inline std::vector<QuadratureNode> composite_gauss(double a, double b, int panels, int order) {
  require(panels >= 1, ErrorKind::InvalidParameter, "panel count must be positive");
  std::vector<QuadratureNode> out;
  out.reserve(static_cast<std::size_t>(panels * order));
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const auto rule = gauss_legendre(order, a + p * h, a + (p + 1) * h);
    out.insert(out.end(), rule.begin(), rule.end());
  }
  return out;
}

}  // namespace treescat

#endif  // TREESCAT_QUADRATURE_HPP

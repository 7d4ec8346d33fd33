#ifndef TREESCAT_SPECTRAL_SURFACE_HPP
#define TREESCAT_SPECTRAL_SURFACE_HPP

// The spectral parameter surface S = R/tau Z x iR, tau = 2 pi / log q, and the
// measures living on it.
//
// A parameter s maps to the energy lambda_s = q^(1/2+is) + q^(1/2-is). The
// physical sheet Im s > 0 covers C \ I_q once; the circle Im s = 0 covers the
// band I_q = [-2 sqrt q, 2 sqrt q] twice. For real s in (0, tau/2) a small
// positive imaginary part moves lambda_s into the lower half plane, so the
// boundary value from above, lambda + i0, is reached from s = tau - s(lambda).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "treescat/errors.hpp"

namespace treescat {

using cplx = std::complex<double>;

struct SpectralParam {
  double re = 0.0;
  double im = 0.0;

  cplx value() const { return {re, im}; }
  bool on_circle() const { return im == 0.0; }
};

struct OnShellPoint {
  SpectralParam s;
  double weight = 0.0;
};

class SpectralSurface {
 public:
  explicit SpectralSurface(int q) : q_(q) {
    require(q >= 2, ErrorKind::InvalidParameter, "q must be >= 2");
    log_q_ = std::log(static_cast<double>(q));
    tau_ = 2.0 * std::numbers::pi / log_q_;
    sqrt_q_ = std::sqrt(static_cast<double>(q));
  }

  int q() const { return q_; }
  double log_q() const { return log_q_; }
  double tau() const { return tau_; }
  double band_edge() const { return 2.0 * sqrt_q_; }

  /// q^(c + i s) for complex s.
  cplx power(double c, SpectralParam s) const {
    const cplx i{0.0, 1.0};
    return std::exp((c + i * s.value()) * log_q_);
  }

  cplx lambda(SpectralParam s) const {
    return sqrt_q_ * (exp_is(s) + 1.0 / exp_is(s));
  }

  /// alpha(s) = q^(-1/2+is); |alpha| < 1/sqrt q on the physical sheet.
  cplx alpha(SpectralParam s) const { return exp_is(s) / sqrt_q_; }

  /// C(s) = 1 / (q^(1/2-is) - q^(-1/2+is)).
  cplx c_factor(SpectralParam s) const {
    const cplx u = exp_is(s);
    return 1.0 / (sqrt_q_ / u - u / sqrt_q_);
  }

  /// F(lambda_s) = q^(1/2-is) - q^(1/2+is).
  cplx f_of_param(SpectralParam s) const {
    const cplx u = exp_is(s);
    return sqrt_q_ / u - sqrt_q_ * u;
  }

  /// d lambda_s / ds = i log q (q^(1/2+is) - q^(1/2-is)).
  cplx dlambda_ds(SpectralParam s) const {
    const cplx i{0.0, 1.0};
    const cplx u = exp_is(s);
    return i * log_q_ * sqrt_q_ * (u - 1.0 / u);
  }

  /// Determination of sqrt(z^2 - 4q) on C \ I_q that behaves like z at infinity.
  cplx f_of_energy(cplx z) const {
    const double e = band_edge();
    return std::sqrt(z - e) * std::sqrt(z + e);
  }

  /// The unique s on the physical sheet with lambda_s = z, for z off the band.
  SpectralParam param_of_energy(cplx z) const {
    const cplx u = (z - f_of_energy(z)) / (2.0 * sqrt_q_);
    require(std::abs(u) < 1.0, ErrorKind::OutOfBand, "energy lies on the band");
    double re = std::arg(u) / log_q_;
    if (re < 0) re += tau_;
    return {re, -std::log(std::abs(u)) / log_q_};
  }

  /// Principal preimage s in [0, tau/2] of a band energy.
  SpectralParam s_of_lambda(double lam) const {
    const double e = band_edge();
    require(std::abs(lam) <= e, ErrorKind::OutOfBand, "energy outside I_q");
    return {std::acos(std::clamp(lam / e, -1.0, 1.0)) / log_q_, 0.0};
  }

  /// Reflection s -> -s, represented in [0, tau).
  SpectralParam reflect(SpectralParam s) const {
    double re = std::fmod(-s.re, tau_);
    if (re < 0) re += tau_;
    return {re, s.im};
  }

  /// Density of d mu on the circle Im s = 0.
  double mu_density(double s) const {
    const double sl = std::sin(s * log_q_);
    const double qd = static_cast<double>(q_);
    return (qd + 1.0) * log_q_ / std::numbers::pi * sl * sl /
           (qd + 1.0 / qd - 2.0 * std::cos(2.0 * s * log_q_));
  }

  /// Density of states de(lambda) of T_q (zero off the band).
  double dos_density(double lam) const {
    const double qd = static_cast<double>(q_);
    const double disc = 4.0 * qd - lam * lam;
    if (disc <= 0.0) return 0.0;
    return (qd + 1.0) * std::sqrt(disc) / (2.0 * std::numbers::pi * ((qd + 1.0) * (qd + 1.0) - lam * lam));
  }

  /// The measure delta(lambda_s - a) d mu(s): both preimages of a with their
  /// weights mu(s) / |d lambda/ds|. The weights sum to de(a).
  std::array<OnShellPoint, 2> on_shell_weight(double a) const {
    const double e = band_edge();
    require(std::abs(a) < e, ErrorKind::BandEdgeSingularity, "on-shell weight needs an interior energy");
    const auto s = s_of_lambda(a);
    const auto r = reflect(s);
    auto weight = [&](SpectralParam p) { return mu_density(p.re) / std::abs(dlambda_ds(p)); };
    return {OnShellPoint{s, weight(s)}, OnShellPoint{r, weight(r)}};
  }

 private:
  // q^(is)
  cplx exp_is(SpectralParam s) const {
    const cplx i{0.0, 1.0};
    return std::exp(i * s.value() * log_q_);
  }

  int q_;
  double log_q_;
  double tau_;
  double sqrt_q_;
};

}  // namespace treescat

#endif  // TREESCAT_SPECTRAL_SURFACE_HPP

#include <gtest/gtest.h>

#include <boost/math/quadrature/trapezoidal.hpp>

#include "oracles.hpp"
#include "treescat/quadrature.hpp"
#include "treescat/spectral_surface.hpp"

using namespace treescat;

TEST(SpectralSurface, EnergyIsRealAndEvenOnTheCircle) {
  for (int q : {2, 3, 7}) {
    const SpectralSurface S(q);
    for (double s = 0.0; s < S.tau(); s += 0.137) {
      const cplx l = S.lambda({s, 0.0});
      EXPECT_NEAR(l.imag(), 0.0, 1e-13);
      EXPECT_LE(std::abs(l.real()), S.band_edge() + 1e-12);
      EXPECT_NEAR(std::abs(l - S.lambda(S.reflect({s, 0.0}))), 0.0, 1e-12);
      EXPECT_NEAR(std::abs(l - S.lambda({s + S.tau(), 0.0})), 0.0, 1e-12);
    }
  }
}

TEST(SpectralSurface, BandEdgesAtZeroAndHalfPeriod) {
  const SpectralSurface S(2);
  EXPECT_NEAR(S.lambda({0.0, 0.0}).real(), 2.0 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(S.lambda({S.tau() / 2, 0.0}).real(), -2.0 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(S.tau(), 2.0 * std::numbers::pi / std::log(2.0), 1e-14);
}

TEST(SpectralSurface, DerivativeMatchesFiniteDifference) {
  const SpectralSurface S(3);
  for (SpectralParam s : {SpectralParam{0.3, 0.0}, SpectralParam{1.7, 0.4}, SpectralParam{4.1, 1.2}}) {
    const double h = 1e-6;
    const cplx fd = (S.lambda({s.re + h, s.im}) - S.lambda({s.re - h, s.im})) / (2 * h);
    EXPECT_NEAR(std::abs(fd - S.dlambda_ds(s)), 0.0, 1e-7);
  }
}

TEST(SpectralSurface, InverseOnTheBand) {
  const SpectralSurface S(2);
  for (double lam = -2.8; lam <= 2.8; lam += 0.1) {
    const auto s = S.s_of_lambda(lam);
    EXPECT_GE(s.re, 0.0);
    EXPECT_LE(s.re, S.tau() / 2 + 1e-14);
    EXPECT_NEAR(S.lambda(s).real(), lam, 1e-12);
  }
  EXPECT_THROW(S.s_of_lambda(3.0), Error);
}

TEST(SpectralSurface, PhysicalSheetPreimage) {
  const SpectralSurface S(3);
  for (cplx z : {cplx{0.5, 0.2}, cplx{-3.0, 0.01}, cplx{5.0, 0.0}, cplx{-4.0, 0.0}, cplx{0.0, -1.0}}) {
    const auto s = S.param_of_energy(z);
    EXPECT_GT(s.im, 0.0);
    EXPECT_NEAR(std::abs(S.lambda(s) - z), 0.0, 1e-12);
    EXPECT_LT(std::abs(S.alpha(s)), 1.0 / std::sqrt(3.0));
  }
  EXPECT_THROW(S.param_of_energy(cplx{1.0, 0.0}), Error);
}

TEST(SpectralSurface, AlphaAndCFactor) {
  const SpectralSurface S(2);
  const SpectralParam s{0.9, 0.3};
  const cplx a = S.alpha(s);
  EXPECT_NEAR(std::abs(1.0 / S.c_factor(s) - (1.0 / a - a)), 0.0, 1e-13);
  EXPECT_NEAR(std::abs(S.lambda(s) - (1.0 / a + 2.0 * a)), 0.0, 1e-13);
  EXPECT_NEAR(std::abs(S.f_of_param(s) - (1.0 / a - 2.0 * a)), 0.0, 1e-12);
}

TEST(SpectralSurface, EnergyBranchBehavesLikeZ) {
  const SpectralSurface S(2);
  const cplx z{1e4, 3.0};
  EXPECT_NEAR(std::abs(S.f_of_energy(z) / z - 1.0), 0.0, 1e-6);
  const cplx w{-1e4, 3.0};
  EXPECT_NEAR(std::abs(S.f_of_energy(w) / w - 1.0), 0.0, 1e-6);
}

TEST(SpectralSurface, DosMatchesKestenMcKay) {
  for (int q : {2, 3}) {
    const SpectralSurface S(q);
    for (double lam = -3.4; lam <= 3.4; lam += 0.05) EXPECT_NEAR(S.dos_density(lam), oracle::kesten_mckay(q, lam), 1e-14);
  }
  EXPECT_NEAR(SpectralSurface(2).dos_density(0.0), std::sqrt(2.0) / (3.0 * std::numbers::pi), 1e-15);
}

TEST(SpectralSurface, MuHasUnitMassOverAPeriod) {
  for (int q : {2, 3, 5}) {
    const SpectralSurface S(q);
    const double mass = boost::math::quadrature::trapezoidal([&](double s) { return S.mu_density(s); }, 0.0, S.tau());
    EXPECT_NEAR(mass, 1.0, 1e-10);
  }
}

TEST(SpectralSurface, OnShellWeightsSumToDos) {
  const SpectralSurface S(3);
  for (double a = -3.3; a <= 3.3; a += 0.11) {
    const auto pts = S.on_shell_weight(a);
    EXPECT_NEAR(pts[0].weight + pts[1].weight, oracle::kesten_mckay(3, a), 1e-12);
    EXPECT_NEAR(pts[0].s.re + pts[1].s.re, S.tau(), 1e-12);
  }
  EXPECT_THROW(S.on_shell_weight(2.0 * std::sqrt(3.0)), Error);
}

TEST(Quadrature, GaussLegendreIntegratesPolynomials) {
  const auto rule = gauss_legendre(10, -1.0, 2.0);
  double acc = 0.0;
  for (const auto& n : rule) acc += n.w * std::pow(n.x, 19);
  EXPECT_NEAR(acc, (std::pow(2.0, 20) - 1.0) / 20.0, 1e-8);
  const auto comp = composite_gauss(0.0, 1.0, 4, 6);
  double e = 0.0;
  for (const auto& n : comp) e += n.w * std::exp(n.x);
  EXPECT_NEAR(e, std::exp(1.0) - 1.0, 1e-14);
}

TEST(Quadrature, PeriodicRuleIsExactForTrigPolynomials) {
  const auto rule = periodic_rule(3.0, 16);
  double acc = 0.0;
  for (const auto& n : rule) acc += n.w * std::pow(std::cos(2 * std::numbers::pi * n.x / 3.0), 4);
  EXPECT_NEAR(acc, 3.0 * 3.0 / 8.0, 1e-14);
}

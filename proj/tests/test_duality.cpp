#include <doctest.h>

#include <fpp/closed_form.hpp>
#include <fpp/duality.hpp>
#include <fpp/errors.hpp>
#include <fpp/pde_verify.hpp>

#include <cmath>
#include <random>

using namespace fpp;

namespace {

// u = c + e^{-k z}
DualSurface power_dual(double k, double c = 0.0) {
  return DualSurface(HarmonicFunction(HarmonicMode::degenerate, [k, c](double, double, double z) {
    const double e = std::exp(-k * z);
    HarmonicJet j;
    j.u = c + e;
    j.u_z = -k * e;
    j.u_zz = k * k * e;
    return j;
  }));
}

SchwartzParams three_atoms() {
  SchwartzParams p;
  p.a = 0.0;
  p.b = 1.0;
  p.sigma = 1.0;
  p.eta = 0.25;
  p.atoms = {{1.25, 0.5, Branch::minus}, {2.0, 0.3, Branch::plus}, {4.0, 0.2, Branch::minus}};
  return p;
}

HarmonicFunction exp_decay(double rate) {
  return HarmonicFunction(HarmonicMode::standard, [rate](double t, double, double) {
    HarmonicJet j;
    j.u = std::exp(-rate * t);
    j.u_t = -rate * j.u;
    return j;
  });
}

}  // namespace

TEST_CASE("delta exponent") {
  CHECK(delta_exponent(0.5, 0.0) == 1.0);
  CHECK(delta_exponent(0.5, 1.0) == 0.5);
  CHECK(delta_exponent(-1.0, 0.5) == doctest::Approx(2.0 / 1.75).epsilon(1e-15));
  CHECK_THROWS_AS(delta_exponent(1.0, 0.0), BadParams);
  CHECK_THROWS_AS(delta_exponent(0.0, 0.0), BadParams);
  const HomotheticParams h = HomotheticParams::make(0.3, -0.6);
  CHECK(std::abs(h.delta - 0.7 / (0.7 + 0.36 * 0.3)) < 1e-15);
  CHECK_THROWS_AS(HomotheticParams::make(0.3, 1.2), BadParams);
}

TEST_CASE("dual inversion of power duals") {
  const DualSurface log_dual = power_dual(1.0), sqrt_dual = power_dual(2.0);
  for (double x : {1e-3, 0.37, 1.0, 5.0, 1e4}) {
    CHECK(invert_dual_marginal(log_dual, 0.0, 0.0, x) == doctest::Approx(1.0 / x).epsilon(1e-12));
    CHECK(invert_dual_marginal(sqrt_dual, 1.0, 2.0, x) == doctest::Approx(1.0 / std::sqrt(x)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(invert_dual_marginal(log_dual, 0.0, 0.0, -1.0), DomainError);
}

TEST_CASE("unreachable wealth raises OutOfRange") {
  // u = 1 + e^{-z} never drops below 1.
  CHECK_THROWS_AS(invert_dual_marginal(power_dual(1.0, 1.0), 0.0, 0.0, 0.5), OutOfRange);
  CHECK(invert_dual_marginal(power_dual(1.0, 1.0), 0.0, 0.0, 3.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("Schwartz dual round trip") {
  const DualSurface u = schwartz_dual_surface(three_atoms());
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> T(0.0, 2.0), Y(-3.0, 3.0), LX(std::log(0.01), std::log(100.0));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double t = T(rng), y = Y(rng), x = std::exp(LX(rng));
    const double v = invert_dual_marginal(u, t, y, x);
    REQUIRE(v > 0.0);
    worst = std::max(worst, std::abs(u(t, y, std::log(v)) - x) / x);
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("integrating x^{-1/2}") {
  const DualSurface u = power_dual(2.0);
  for (double x : {0.01, 0.5, 1.0, 9.0, 100.0}) {
    const DualValue d = integrate_to_value(u, 0.0, 0.0, x);
    CHECK(d.anchor == Anchor::zero);
    CHECK(d.jet.v == doctest::Approx(2.0 * std::sqrt(x)).epsilon(1e-9));
    CHECK(d.jet.v_x == doctest::Approx(1.0 / std::sqrt(x)).epsilon(1e-12));
    CHECK(d.jet.v_xx == doctest::Approx(-0.5 * std::pow(x, -1.5)).epsilon(1e-10));
    CHECK(std::abs(d.jet.v_y) < 1e-15);
  }
  CHECK(dual_tail_exponent(u, 0.0, 0.0) == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("log utility is not integrable at zero") {
  const DualSurface u = power_dual(1.0);
  CHECK_THROWS_AS(integrate_to_value(u, 0.0, 0.0, 2.0, Anchor::zero), NonIntegrableAtZero);
  for (double x : {0.05, 1.0, 20.0}) {
    const DualValue d = integrate_to_value(u, 0.0, 0.0, x, Anchor::unit);
    CHECK(d.jet.v == doctest::Approx(std::log(x)).epsilon(1e-9));
    CHECK(d.jet.v_x == doctest::Approx(1.0 / x).epsilon(1e-12));
  }
  const PerformanceSurface V = dual_value_surface(u);
  CHECK(V.anchor == Anchor::unit);
  CHECK(std::abs(V(0.0, 0.0, 1.0)) < 1e-15);
  CHECK_THROWS_AS(dual_value_surface(u, AnchorPolicy::zero)(0.0, 0.0, 2.0), NonIntegrableAtZero);
}

TEST_CASE("Schwartz value surface is increasing and concave") {
  const PerformanceSurface V = schwartz_value_surface(three_atoms());
  CHECK(V.tag() == SurfaceTag::dual_inversion);
  CHECK(V.anchor == Anchor::zero);
  for (double t : {0.0, 1.0, 2.0})
    for (double y : {-3.0, 0.0, 3.0})
      for (double x : logspace(0.01, 100.0, 9)) {
        const ValueJet j = V.jet(t, y, x);
        CHECK(std::isfinite(j.v));
        CHECK(j.v_x > 0.0);
        CHECK(j.v_xx < 0.0);
      }
}

TEST_CASE("marginal consistency against central differences and quadrature") {
  const PerformanceSurface V = schwartz_value_surface(three_atoms());
  for (double t : {0.0, 0.5})
    for (double y : {-1.0, 0.4})
      for (double x : {0.05, 1.0, 30.0}) {
        const double h = 1e-5 * x;
        const double fd = (V(t, y, x + h) - V(t, y, x - h)) / (2.0 * h);
        const double vx = V.jet(t, y, x).v_x;
        CHECK(std::abs(fd - vx) <= 1e-6 * vx);
        const double fd2 = (V.jet(t, y, x + h).v_x - V.jet(t, y, x - h).v_x) / (2.0 * h);
        CHECK(std::abs(fd2 - V.jet(t, y, x).v_xx) <= 1e-5 * std::abs(fd2));
      }

  // composite Simpson over [1, 2] of V~
  const DualSurface u = schwartz_dual_surface(three_atoms());
  const int n = 2000;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = 1.0 + static_cast<double>(i) / n;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * invert_dual_marginal(u, 0.5, 0.3, x);
  }
  s *= 1.0 / (3.0 * n);
  CHECK(V(0.5, 0.3, 2.0) - V(0.5, 0.3, 1.0) == doctest::Approx(s).epsilon(1e-10));
}

TEST_CASE("y partials of the dual value by differences") {
  const PerformanceSurface V = schwartz_value_surface(three_atoms());
  const double t = 0.5, x = 2.0, h = 1e-4;
  for (double y : {-0.8, 0.0, 1.1}) {
    const ValueJet j = V.jet(t, y, x);
    const double vy = (V(t, y + h, x) - V(t, y - h, x)) / (2.0 * h);
    const double vxy = (V.jet(t, y + h, x).v_x - V.jet(t, y - h, x).v_x) / (2.0 * h);
    const double vt = (V(t + h, y, x) - V(t - h, y, x)) / (2.0 * h);
    CHECK(j.v_y == doctest::Approx(vy).epsilon(1e-6));
    CHECK(j.v_xy == doctest::Approx(vxy).epsilon(1e-6));
    CHECK(j.v_t == doctest::Approx(vt).epsilon(1e-6));
  }
}

TEST_CASE("homothetic value surfaces") {
  const HomotheticParams half = HomotheticParams::make(0.5, 0.0);

  SUBCASE("unit factor is power utility") {
    const PerformanceSurface V = homothetic_value(exp_decay(0.0), half);
    for (double x : {0.1, 1.0, 7.0}) CHECK(V(1.0, 0.0, x) == doctest::Approx(2.0 * std::sqrt(x)).epsilon(1e-15));
  }
  SUBCASE("Merton surface") {
    const PerformanceSurface V = homothetic_value(exp_decay(0.045), half);
    for (double t : {0.0, 1.0, 2.0})
      for (double x : {0.1, 4.0}) CHECK(V(t, 0.3, x) == doctest::Approx(2.0 * std::sqrt(x) * std::exp(-0.045 * t)).epsilon(1e-15));
  }
  SUBCASE("power-form identities") {
    const HomotheticParams h = HomotheticParams::make(-1.5, 0.4);
    const PerformanceSurface V = homothetic_value(stochvol_harmonic({0.0, 1.0, 0.5, 0.4, 0.3, 0.1, -1.5, 0.5, 0.5}), h, 1);
    CHECK(V.tag() == SurfaceTag::homothetic);
    for (double x : logspace(0.01, 100.0, 7))
      for (double y : {-1.0, 0.5}) {
        const ValueJet j = V.jet(0.5, y, x);
        CHECK(j.v_x > 0.0);
        CHECK(j.v_xx / j.v_x == doctest::Approx((h.gamma - 1.0) / x).epsilon(1e-13));
        for (double c : {0.5, 3.0}) CHECK(V(0.5, y, c * x) == doctest::Approx(std::pow(c, h.gamma) * j.v).epsilon(1e-13));
      }
  }
}

TEST_CASE("monotonicity probe") {
  const DualSurface increasing(HarmonicFunction(HarmonicMode::degenerate, [](double, double, double z) {
    HarmonicJet j;
    j.u = std::exp(z);
    j.u_z = j.u;
    return j;
  }));
  CHECK_THROWS_AS(increasing.check_monotone({0.0}, {0.0}, {0.0}), DomainError);
  CHECK_NOTHROW(power_dual(1.0).check_monotone({0.0, 1.0}, {-1.0, 1.0}, {-2.0, 2.0}));
}

#include <doctest.h>

#include <fpp/closed_form.hpp>
#include <fpp/errors.hpp>
#include <fpp/pde_verify.hpp>
#include <fpp/widder.hpp>

#include <cmath>
#include <random>

using namespace fpp;

namespace {

SpectralAtom atom(double lambda, double weight, MinimalSolution psi, std::optional<double> theta = {}) {
  return SpectralAtom{lambda, theta, weight, std::move(psi)};
}

std::vector<LambdaPairAtom> random_pairs(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> L(0.0, 4.0), W(0.0, 1.0);
  std::vector<LambdaPairAtom> out(n);
  for (auto& a : out) a = {L(rng), W(rng), W(rng)};
  return out;
}

DegenerateOperator heat_yz() {
  auto zero = [](double) { return 0.0; };
  return {[](double) { return 1.0; }, zero, zero, zero, zero, zero};
}

}  // namespace

TEST_CASE("constant atom gives u = 1") {
  const HarmonicFunction u = build_harmonic({atom(0.0, 1.0, heat_fundamental(0.0, Direction::increasing))},
                                            heat_operator());
  for (double t : {0.0, 0.7, 2.0})
    for (double y : {-3.0, 0.1, 3.0}) {
      const HarmonicJet j = u.jet(t, y);
      CHECK(j.u == 1.0);
      CHECK(j.u_t == 0.0);
      CHECK(j.u_y == 0.0);
    }
}

TEST_CASE("two heat atoms give e^{-t} cosh y") {
  const HarmonicFunction u = build_harmonic({atom(1.0, 0.5, heat_fundamental(1.0, Direction::increasing)),
                                             atom(1.0, 0.5, heat_fundamental(1.0, Direction::decreasing))},
                                            heat_operator());
  const HarmonicFunction v = classical_heat({{-1.0, 0.5}, {1.0, 0.5}});
  for (double t : {0.0, 0.5, 2.0})
    for (double y : {-2.5, 0.0, 1.3}) {
      const double exact = std::exp(-t) * std::cosh(y);
      CHECK(u(t, y) == doctest::Approx(exact).epsilon(1e-14));
      CHECK(v(t, y) == doctest::Approx(exact).epsilon(1e-14));
      CHECK(u.jet(t, y).u_y == doctest::Approx(std::exp(-t) * std::sinh(y)).epsilon(1e-13));
      CHECK(u.jet(t, y).u_t == doctest::Approx(-exact).epsilon(1e-14));
    }
}

TEST_CASE("factorial measure sums to e") {
  std::vector<HeatAtom> atoms;
  double factorial = 1.0, truncated = 0.0;
  for (int n = 0; n <= 20; ++n) {
    if (n > 0) factorial *= n;
    atoms.push_back({static_cast<double>(n), 1.0 / factorial});
    truncated += 1.0 / factorial;
  }
  const HarmonicFunction u = classical_heat(atoms);
  CHECK(std::abs(u(0.0, 0.0) - truncated) < 1e-15);
  // initial condition exp(e^y)
  CHECK(std::abs(u(0.0, 0.0) - std::exp(1.0)) < 1e-15);
  CHECK(u(0.0, 0.5) == doctest::Approx(std::exp(std::exp(0.5))).epsilon(1e-13));
  CHECK(u(0.0, -1.0) == doctest::Approx(std::exp(std::exp(-1.0))).epsilon(1e-14));

  // The same measure expressed over lambda = z^2 with increasing weights.
  std::vector<LambdaPairAtom> pairs;
  for (const HeatAtom& a : atoms) pairs.push_back({a.z * a.z, 0.0, a.weight});
  const HarmonicFunction w = build_harmonic(heat_spectral_atoms(pairs), heat_operator());
  for (double t : {0.0, 0.01, 0.05})
    for (double y : {-1.0, 0.0, 0.5}) CHECK(std::abs(w(t, y) - u(t, y)) <= 1e-10 * u(t, y));
}

TEST_CASE("lambda to z change of variables") {
  SUBCASE("symmetric pair") {
    const std::vector<LambdaPairAtom> in{{1.0, 0.5, 0.5}};
    const std::vector<HeatAtom> z = lambda_to_z_change_of_vars(in);
    REQUIRE(z.size() == 2);
    CHECK(z[0].z == -1.0);
    CHECK(z[0].weight == 0.5);
    CHECK(z[1].z == 1.0);
    CHECK(z[1].weight == 0.5);
  }
  SUBCASE("lambda = 0 collapses") {
    const std::vector<LambdaPairAtom> in{{0.0, 0.25, 0.5}};
    const std::vector<HeatAtom> z = lambda_to_z_change_of_vars(in);
    REQUIRE(z.size() == 1);
    CHECK(z[0].z == 0.0);
    CHECK(z[0].weight == 0.75);
  }
  SUBCASE("single increasing atom") {
    const std::vector<LambdaPairAtom> in{{4.0, 0.0, 1.0}};
    const std::vector<HeatAtom> z = lambda_to_z_change_of_vars(in);
    REQUIRE(z.size() == 1);
    CHECK(z[0].z == 2.0);
    CHECK(z[0].weight == 1.0);
  }
  SUBCASE("negative lambda") {
    const std::vector<LambdaPairAtom> in{{-1.0, 1.0, 0.0}};
    CHECK_THROWS_AS(lambda_to_z_change_of_vars(in), NegativeLambda);
  }
}

TEST_CASE("change of variables agrees with the classical heat representation") {
  std::mt19937_64 rng(20240601);
  for (std::size_t size : {1u, 7u, 20u}) {
    const auto pairs = random_pairs(rng, size);
    const HarmonicFunction a = build_harmonic(heat_spectral_atoms(pairs), heat_operator());
    const HarmonicFunction b = classical_heat(lambda_to_z_change_of_vars(pairs));
    double worst = 0.0;
    for (double t : linspace(0.0, 2.0, 21))
      for (double y : linspace(-3.0, 3.0, 61)) worst = std::max(worst, std::abs(a(t, y) - b(t, y)) / b(t, y));
    CAPTURE(size);
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("positivity, normalization and linearity") {
  std::mt19937_64 rng(3);
  auto p1 = random_pairs(rng, 5), p2 = random_pairs(rng, 4);
  double total = 0.0;
  for (auto* ps : {&p1, &p2})
    for (const auto& a : *ps) total += a.decreasing + a.increasing;
  for (auto* ps : {&p1, &p2})
    for (auto& a : *ps) {
      a.decreasing /= total;
      a.increasing /= total;
    }
  const HarmonicFunction u1 = build_harmonic(heat_spectral_atoms(p1), heat_operator());
  const HarmonicFunction u2 = build_harmonic(heat_spectral_atoms(p2), heat_operator());
  std::vector<LambdaPairAtom> both = p1;
  both.insert(both.end(), p2.begin(), p2.end());
  const HarmonicFunction u = build_harmonic(heat_spectral_atoms(both), heat_operator());

  CHECK(std::abs(u(0.0, 0.0) - 1.0) < 1e-12);
  for (double t : {0.0, 1.0, 2.0})
    for (double y : linspace(-3.0, 3.0, 13)) {
      CHECK(u(t, y) > 0.0);
      CHECK(u(t, y) == doctest::Approx(u1(t, y) + u2(t, y)).epsilon(1e-14));
    }
}

TEST_CASE("build_harmonic rejects inconsistent atoms") {
  // e^{y} solves psi'' = psi, not psi'' = 4 psi
  std::vector<SpectralAtom> atoms{atom(0.0, 1.0, heat_fundamental(0.0, Direction::increasing)),
                                  atom(4.0, 1.0, heat_fundamental(1.0, Direction::increasing))};
  try {
    build_harmonic(atoms, heat_operator());
    FAIL("expected AtomInconsistent");
  } catch (const AtomInconsistent& e) {
    CHECK(e.index() == 1);
  }
  CHECK_THROWS_AS(build_harmonic({atom(0.0, -1.0, heat_fundamental(0.0, Direction::increasing))}, heat_operator()),
                  BadParams);
  CHECK_THROWS_AS(build_harmonic({}, heat_operator()), BadParams);
  CHECK_THROWS_AS(build_harmonic({atom(0.0, 1.0, heat_fundamental(0.0, Direction::increasing), 1.0)}, heat_operator()),
                  BadParams);
}

TEST_CASE("degenerate build with theta = 0 reduces to the standard one") {
  const HarmonicFunction d = build_degenerate({atom(1.0, 0.5, heat_fundamental(1.0, Direction::increasing), 0.0),
                                               atom(1.0, 0.5, heat_fundamental(1.0, Direction::decreasing), 0.0)},
                                              heat_yz());
  const HarmonicFunction s = build_harmonic({atom(1.0, 0.5, heat_fundamental(1.0, Direction::increasing)),
                                             atom(1.0, 0.5, heat_fundamental(1.0, Direction::decreasing))},
                                            heat_operator());
  for (double z : {-1.0, 0.0, 2.0}) {
    CHECK(d(0.3, 0.7, z) == doctest::Approx(s(0.3, 0.7)).epsilon(1e-15));
    CHECK(d.jet(0.3, 0.7, z).u_z == 0.0);
  }
}

TEST_CASE("log-utility atom gives e^{-z}") {
  const FactorModel model = schwartz_model(0.0, 1.0, 1.0);
  const DegenerateOperator op = complete_market_operator(model);
  const HarmonicFunction u = build_degenerate({atom(0.0, 1.0, heat_fundamental(0.0, Direction::increasing), 1.0)}, op);
  for (double z : {-2.0, 0.0, 1.5})
    for (double y : {-1.0, 0.0, 2.0}) {
      CHECK(u(0.5, y, z) == doctest::Approx(std::exp(-z)).epsilon(1e-15));
      CHECK(u.jet(0.5, y, z).u_z == doctest::Approx(-std::exp(-z)).epsilon(1e-15));
    }
}

TEST_CASE("two Schwartz atoms solve the dual equation") {
  SchwartzParams p;
  p.a = 0.0;
  p.b = 1.0;
  p.sigma = 1.0;
  const DegenerateOperator op = complete_market_operator(schwartz_model(p));
  std::vector<SpectralAtom> atoms;
  for (double theta : {1.0, 2.0}) {
    const QuadExpCoeffs c = schwartz_coeffs(p, theta, Branch::minus);
    atoms.push_back(atom(c.lambda, 0.5, MinimalSolution::quad_exp(c.lambda, {c.c1, c.c2}), theta));
  }
  const HarmonicFunction u = build_degenerate(atoms, op);
  const ResidualReport r = degenerate_parabolic_residual(u, op, GridSpec::standard(), 1e-6);
  CHECK(r.pass);
  CHECK(r.max_abs_residual < 1e-6);

  // A theta-2 profile cannot sit under theta = 1.
  atoms[1].theta = 1.0;
  CHECK_THROWS_AS(build_degenerate(atoms, op), AtomInconsistent);
}

TEST_CASE("counterexample fixtures") {
  SUBCASE("traveling wave") {
    const CounterexampleFixture f = counterexample_fixture("bs_traveling_wave", {1.0, 2.0});
    // the profile argument lambda(lambda - sigma) t / 2 - (lambda/sigma) y - z vanishes here
    const double t = 0.4, y = 0.1, z = 0.5 * 2.0 * 1.0 * t - 2.0 * y;
    CHECK(f.u(t, y, z) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.u(0.0, 0.0, 0.0) == 1.0);
    CHECK(f.u(0.0, 0.0, 5.0) == 0.0);  // outside the bump support
    CHECK_THROWS_AS(counterexample_fixture("bs_traveling_wave", {1.0, 0.0}), BadParams);
    CHECK_THROWS_AS(counterexample_fixture("bs_traveling_wave", {1.0, 1.0}), BadParams);
  }
  SUBCASE("kolmogorov") {
    const CounterexampleFixture f = counterexample_fixture("kolmogorov");
    CHECK(f.u(1.0, 0.0, 0.0) == doctest::Approx(std::exp(-3.0)).epsilon(1e-15));
    CHECK(f.u(0.0, 0.0, 0.0) == 1.0);
  }
  CHECK_THROWS_AS(counterexample_fixture("heat"), BadParams);
}

#include <doctest.h>

#include <fpp/errors.hpp>
#include <fpp/factor_model.hpp>

#include <cmath>
#include <random>

using namespace fpp;

namespace {

// dS/S with constant log-drift mu and volatility sigma.
FactorModel constant_model(double mu, double sigma) {
  CoefficientField m(1, 1, 1, [mu](const Vec&, Mat& o) { o(0, 0) = mu; });
  CoefficientField s(1, 1, 1, [sigma](const Vec&, Mat& o) { o(0, 0) = sigma; });
  return FactorModel("constant", 1, 1, 1, m, s);
}

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("market price of risk solves sigma lambda = mu + sigma^2/2") {
  const FactorModel m = constant_model(0.08, 0.2);
  const Vec lambda = market_price_of_risk(m, vec({0.0}));
  REQUIRE(lambda.size() == 1);
  CHECK(lambda[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("zero asset drift gives zero market price of risk") {
  const FactorModel m = constant_model(-0.02, 0.2);  // mu~ = -0.02 + 0.02 = 0
  CHECK(std::abs(market_price_of_risk(m, vec({1.0}))[0]) < 1e-15);
}

TEST_CASE("stochvol market price of risk is kappa - mu v") {
  const double kappa = 0.3, mu = 0.2;
  const FactorModel m = stochvol_model(-1.6, 1.0, 0.5, -0.5, kappa, mu);
  for (double v : {-2.0, -0.7, 0.0, 0.4, 1.5}) {
    const Vec y = vec({0.3, v});
    const Vec lambda = market_price_of_risk(m, y);
    // asset drift (kappa - mu v) e^v per unit price, volatility e^v along W1
    CHECK(lambda[0] == doctest::Approx(kappa - mu * v).epsilon(1e-12));
    CHECK(std::abs(lambda[1]) < 1e-12);
    const Mat sigma = m.diffusion(y);
    const double tilde = m.drift(y)[0] + 0.5 * sigma.col(0).squaredNorm();
    CHECK(std::abs(sigma.col(0).dot(lambda) - tilde) < 1e-10);
  }
}

TEST_CASE("inconsistent traded system raises NoRiskPremiumSolution") {
  // Two assets loaded on the same Brownian motion with different drifts.
  CoefficientField m(2, 2, 1, [](const Vec&, Mat& o) {
    o(0, 0) = 0.08;
    o(1, 0) = 0.10;
  });
  CoefficientField s(2, 1, 2, [](const Vec&, Mat& o) {
    o(0, 0) = 0.2;
    o(0, 1) = 0.2;
  });
  const FactorModel model("arbitrage", 2, 2, 1, m, s);
  CHECK_THROWS_AS(market_price_of_risk(model, vec({0.0, 0.0})), NoRiskPremiumSolution);
}

TEST_CASE("minimal-norm lambda for an underdetermined system") {
  // One asset on two Brownian motions: lambda must be parallel to sigma.
  CoefficientField m(1, 1, 1, [](const Vec&, Mat& o) { o(0, 0) = 0.1; });
  CoefficientField s(1, 2, 1, [](const Vec&, Mat& o) {
    o(0, 0) = 0.3;
    o(1, 0) = 0.4;
  });
  const FactorModel model("two-noise", 1, 1, 2, m, s);
  const Vec lambda = market_price_of_risk(model, vec({0.0}));
  const double tilde = 0.1 + 0.5 * 0.25;
  CHECK(lambda[0] == doctest::Approx(0.3 * tilde / 0.25));
  CHECK(lambda[1] == doctest::Approx(0.4 * tilde / 0.25));
}

TEST_CASE("wealth dynamics") {
  const FactorModel m = constant_model(0.08, 0.2);
  const Vec y = vec({0.0});

  SUBCASE("cash") {
    const WealthDynamics w = wealth_dynamics(m, PortfolioRule::cash(1), 0.0, y, 100.0);
    CHECK(w.drift == 0.0);
    CHECK(w.diffusion[0] == 0.0);
  }
  SUBCASE("unit position") {
    const WealthDynamics w = wealth_dynamics(m, PortfolioRule::constant(vec({1.0})), 0.0, y, 100.0);
    CHECK(w.drift == doctest::Approx(10.0));
    CHECK(w.diffusion[0] == doctest::Approx(20.0));
  }
  SUBCASE("linear in pi") {
    const PortfolioRule one = PortfolioRule::constant(vec({0.7}));
    const WealthDynamics a = wealth_dynamics(m, one, 0.0, y, 3.0);
    const WealthDynamics b = wealth_dynamics(m, PortfolioRule::scaled(one, 2.0), 0.0, y, 3.0);
    CHECK(b.drift == doctest::Approx(2.0 * a.drift));
    CHECK(b.diffusion[0] == doctest::Approx(2.0 * a.diffusion[0]));
  }
  SUBCASE("non-positive wealth") {
    CHECK_THROWS_AS(wealth_dynamics(m, PortfolioRule::cash(1), 0.0, y, 0.0), DomainError);
  }
}

TEST_CASE("wealth dynamics are homogeneous of degree one in x") {
  const FactorModel m = stochvol_model(0.0, 1.0, 0.5, 0.3, 0.3, 0.1);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Vec y = vec({U(rng), U(rng)});
    const Vec pi = vec({2.0 * U(rng)});
    const double x = std::exp(3.0 * U(rng)), c = std::exp(2.0 * U(rng));
    const WealthDynamics a = wealth_dynamics(m, pi, y, x);
    const WealthDynamics b = wealth_dynamics(m, pi, y, c * x);
    CHECK(b.drift == doctest::Approx(c * a.drift).epsilon(1e-13));
    CHECK((b.diffusion - c * a.diffusion).norm() <= 1e-13 * (1.0 + b.diffusion.norm()));
  }
}

TEST_CASE("coefficient fields are deterministic and shape-checked") {
  const FactorModel m = stochvol_model(0.0, 1.0, 0.5, 0.3, 0.3, 0.1);
  const Vec y = vec({0.1, -0.4});
  CHECK(m.diffusion(y) == m.diffusion(y));
  CHECK(m.drift(y) == m.drift(y));
  CoefficientField bad(1, 2, 1, [](const Vec&, Mat& o) { o.resize(1, 1); });
  CHECK_THROWS_AS(bad(vec({0.0})), DomainError);
  CHECK_THROWS_AS(schwartz_model(0.0, 1.0, -1.0), BadParams);
  CHECK_THROWS_AS(stochvol_model(0.0, 1.0, 0.5, 1.5, 0.3, 0.1), BadParams);
}

TEST_CASE("builtin models by name") {
  const FactorModel s = make_builtin_model("schwartz", {{"a", 0.1}, {"b", 1.0}, {"sigma", 0.3}});
  CHECK(s.factors() == 1);
  CHECK(s.drift(vec({1.0}))[0] == doctest::Approx(0.1 - 1.0));
  const FactorModel v = make_builtin_model(
      "stochvol", {{"a", 0.0}, {"b", 1.0}, {"sigma", 0.5}, {"rho", 0.0}, {"kappa", 0.3}, {"mu", 0.0}});
  CHECK(v.factors() == 2);
  CHECK(v.traded() == 1);
  CHECK_THROWS_AS(make_builtin_model("heston", {}), BadParams);
  CHECK_THROWS_AS(make_builtin_model("schwartz", {{"a", 0.0}, {"b", 1.0}}), BadParams);
}

#include <doctest.h>

#include <fpp/closed_form.hpp>
#include <fpp/control.hpp>
#include <fpp/errors.hpp>
#include <fpp/monte_carlo.hpp>

#include <cmath>
#include <numeric>

using namespace fpp;

namespace {

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

StochVolParams merton() {
  StochVolParams p;
  p.a = 0.0;
  p.b = 1.0;
  p.sigma = 0.5;
  p.rho = 0.0;
  p.kappa = 0.3;
  p.mu = 0.0;
  p.gamma = 0.5;
  return p;
}

struct Moments {
  double mean, var, mean_se, var_se;
};

Moments factor_moments(const PathEnsemble& e, double t, int component) {
  const std::size_t ti = e.time_index(t);
  const double n = static_cast<double>(e.paths);
  double s1 = 0.0;
  for (std::size_t p = 0; p < e.paths; ++p) s1 += e.y_at(p, ti)[component];
  const double mean = s1 / n;
  double s2 = 0.0, s4 = 0.0;
  for (std::size_t p = 0; p < e.paths; ++p) {
    const double d = e.y_at(p, ti)[component] - mean;
    s2 += d * d;
    s4 += d * d * d * d;
  }
  const double var = s2 / (n - 1.0);
  return {mean, var, std::sqrt(var / n), std::sqrt((s4 / n - var * var) / n)};
}

SimConfig config(std::size_t paths, int steps, double horizon, std::uint64_t seed, Scheme scheme = Scheme::euler) {
  SimConfig c;
  c.paths = paths;
  c.steps_per_unit = steps;
  c.horizon = horizon;
  c.seed = seed;
  c.scheme = scheme;
  return c;
}

}  // namespace

TEST_CASE("Philox4x32-10 known answers") {
  using B = Philox4x32::Block;
  CHECK(Philox4x32::encrypt({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::encrypt({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::encrypt({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("Philox streams are distinct and repeatable") {
  Philox4x32 a(7, 0), b(7, 0), c(7, 1), d(8, 0);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    CHECK(x == b());
    CHECK((x != c() || x != d()));
  }
}

TEST_CASE("cash keeps wealth constant") {
  const FactorModel m = schwartz_model(0.0, 1.0, 1.0);
  for (Scheme s : {Scheme::euler, Scheme::ou_exact}) {
    SimConfig c = config(64, 16, 2.0, 3, s);
    c.record_times = {0.5, 2.0};
    const PathEnsemble e = simulate_paths(m, PortfolioRule::cash(1), vec({0.3}), 2.5, c);
    REQUIRE(e.times.size() == 3);
    for (std::size_t p = 0; p < e.paths; ++p)
      for (std::size_t t = 0; t < e.times.size(); ++t) CHECK(e.x_at(p, t) == 2.5);
  }
}

TEST_CASE("OU moments") {
  const FactorModel m = schwartz_model(0.0, 1.0, 1.0);
  const double y0 = 0.5, mean = y0 * std::exp(-1.0), var = 0.5 * (1.0 - std::exp(-2.0));
  for (Scheme s : {Scheme::ou_exact, Scheme::euler}) {
    const PathEnsemble e = simulate_paths(m, PortfolioRule::cash(1), vec({y0}), 1.0, config(20000, 128, 1.0, 11, s));
    const Moments mo = factor_moments(e, 1.0, 0);
    CAPTURE(static_cast<int>(s));
    CHECK(std::abs(mo.mean - mean) <= 4.0 * mo.mean_se);
    CHECK(std::abs(mo.var - var) <= 4.0 * mo.var_se);
  }
}

TEST_CASE("Euler bias halves with the step") {
  const FactorModel m = schwartz_model(0.0, 1.0, 0.01);
  double gap[2];
  for (int i = 0; i < 2; ++i) {
    const int steps = 8 << i;
    const auto exact = simulate_paths(m, PortfolioRule::cash(1), vec({1.0}), 1.0,
                                      config(2000, steps, 1.0, 21, Scheme::ou_exact));
    const auto euler = simulate_paths(m, PortfolioRule::cash(1), vec({1.0}), 1.0,
                                      config(2000, steps, 1.0, 21, Scheme::euler));
    gap[i] = factor_moments(exact, 1.0, 0).mean - factor_moments(euler, 1.0, 0).mean;
  }
  // E[Y_1] under Euler is (1 - h)^{1/h}, so the gap is about e^{-1} h / 2.
  CHECK(gap[0] == doctest::Approx(std::exp(-1.0) - std::pow(7.0 / 8.0, 8.0)).epsilon(0.05));
  CHECK(gap[0] / gap[1] == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("Merton benchmark is a martingale under the optimal rule") {
  const StochVolParams p = merton();
  const FactorModel m = stochvol_model(p);
  const PerformanceSurface V = stochvol_value_surface(p);
  const Vec y0 = vec({0.0, 0.0});
  SimConfig c = config(20000, 32, 2.0, 20240601, Scheme::ou_exact);
  c.record_times = {0.5, 1.0, 2.0};
  const PathEnsemble e = simulate_paths(m, optimal_rule(V, m), y0, 1.0, c);
  for (double t : c.record_times) {
    const MCReport r = martingale_test(V, e, t, 1.0, y0);
    CAPTURE(t);
    CHECK(r.reference == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(std::abs(r.z_score) <= 3.0);
    CHECK(r.verdict == Verdict::martingale_consistent);
    CHECK(r.samples == 20000);
    CHECK(r.std_error > 0.0);

    const MCReport wrong = martingale_test(V, e, t, 1.0, y0, 1.1 * r.reference);
    CHECK(wrong.verdict == Verdict::violation);
    CHECK(supermartingale_test(V, e, t, 1.0, y0).verdict == Verdict::supermartingale_consistent);
  }
}

TEST_CASE("over-leveraged rule shows a supermartingale gap") {
  const StochVolParams p = merton();
  const FactorModel m = stochvol_model(p);
  const PerformanceSurface V = stochvol_value_surface(p);
  const Vec y0 = vec({0.0, 0.0});
  const PathEnsemble e =
      simulate_paths(m, PortfolioRule::scaled(optimal_rule(V, m), 2.0), y0, 1.0, config(20000, 32, 1.0, 8, Scheme::ou_exact));
  const MCReport r = supermartingale_test(V, e, 1.0, 1.0, y0);
  CHECK(r.verdict == Verdict::supermartingale_consistent);
  CHECK(r.estimate <= r.reference - 3.0 * r.std_error);
  // Exposure 1.2 with lambda 0.3: E[2 sqrt(X_1)] e^{-0.045} = 2 e^{-0.045}.
  CHECK(std::abs(r.estimate - 2.0 * std::exp(-0.045)) <= 4.0 * r.std_error);
}

TEST_CASE("deterministic wealth") {
  SUBCASE("zero variance") {
    const FactorModel flat = constant_model(-0.02, 0.2);
    const PerformanceSurface V = homothetic_value(
        HarmonicFunction(HarmonicMode::standard, [](double, double, double) { return HarmonicJet{1.0}; }),
        HomotheticParams::make(0.5, 0.0));
    const PathEnsemble e = simulate_paths(flat, optimal_rule(V, flat), vec({0.0}), 4.0, config(100, 8, 1.0, 1));
    const MCReport r = martingale_test(V, e, 1.0, 4.0, vec({0.0}));
    CHECK(r.estimate == r.reference);
    CHECK(r.std_error == 0.0);
    CHECK(r.verdict == Verdict::martingale_consistent);
  }
  SUBCASE("cash under a positive premium") {
    const FactorModel m = stochvol_model(merton());
    const PerformanceSurface V = stochvol_value_surface(merton());
    const PathEnsemble e = simulate_paths(m, PortfolioRule::cash(1), vec({0.0, 0.0}), 1.0, config(100, 8, 1.0, 1));
    const MCReport r = supermartingale_test(V, e, 1.0, 1.0, vec({0.0, 0.0}));
    CHECK(r.estimate == doctest::Approx(2.0 * std::exp(-0.045)).epsilon(1e-14));
    CHECK(r.estimate < r.reference);
    CHECK(r.verdict == Verdict::supermartingale_consistent);
  }
}

TEST_CASE("ensembles do not depend on the thread count") {
  const StochVolParams p = merton();
  const FactorModel m = stochvol_model(p);
  const PerformanceSurface V = stochvol_value_surface(p);
  SimConfig c = config(999, 16, 1.0, 77, Scheme::ou_exact);
  c.threads = 1;
  const PathEnsemble a = simulate_paths(m, optimal_rule(V, m), vec({0.0, 0.1}), 1.0, c);
  for (unsigned threads : {2u, 8u}) {
    c.threads = threads;
    const PathEnsemble b = simulate_paths(m, optimal_rule(V, m), vec({0.0, 0.1}), 1.0, c);
    CHECK(a.y == b.y);
    CHECK(a.log_x == b.log_x);
    const MCReport ra = ensemble_mean(V, a, 1.0), rb = ensemble_mean(V, b, 1.0);
    CHECK(ra.estimate == rb.estimate);
    CHECK(ra.std_error == rb.std_error);
  }
}

TEST_CASE("antithetic sampling reduces the standard error") {
  const StochVolParams p = merton();
  const FactorModel m = stochvol_model(p);
  const PerformanceSurface V = stochvol_value_surface(p);
  SimConfig c = config(20000, 32, 1.0, 4, Scheme::ou_exact);
  const MCReport plain = ensemble_mean(V, simulate_paths(m, optimal_rule(V, m), vec({0.0, 0.0}), 1.0, c), 1.0);
  c.antithetic = true;
  const PathEnsemble e = simulate_paths(m, optimal_rule(V, m), vec({0.0, 0.0}), 1.0, c);
  const MCReport anti = ensemble_mean(V, e, 1.0);
  CHECK(anti.samples == 10000);
  CHECK(anti.std_error <= 0.5 * plain.std_error);
  CHECK(std::abs(anti.estimate - 2.0) <= 3.0 * anti.std_error);
  // paths 2i and 2i+1 mirror each other
  CHECK(e.y_at(0, 1)[1] == doctest::Approx(-e.y_at(1, 1)[1]).epsilon(1e-12));
}

TEST_CASE("configuration errors") {
  const FactorModel m = constant_model(0.04, 0.2);
  CHECK_THROWS_AS(simulate_paths(m, PortfolioRule::constant(vec({1e5})), vec({0.0}), 1.0, config(4, 512, 1.0, 1)),
                  ExplosionDetected);
  CHECK_THROWS_AS(simulate_paths(m, PortfolioRule::cash(1), vec({0.0}), 1.0, config(4, 8, 1.0, 1, Scheme::ou_exact)),
                  BadParams);
  SimConfig c = config(4, 8, 1.0, 1);
  c.record_times = {0.3};
  CHECK_THROWS_AS(simulate_paths(m, PortfolioRule::cash(1), vec({0.0}), 1.0, c), BadParams);
  c.record_times = {};
  c.antithetic = true;
  c.paths = 3;
  CHECK_THROWS_AS(simulate_paths(m, PortfolioRule::cash(1), vec({0.0}), 1.0, c), BadParams);
  CHECK_THROWS_AS(simulate_paths(m, PortfolioRule::cash(1), vec({0.0}), 0.0, config(4, 8, 1.0, 1)), DomainError);
  const PathEnsemble e = simulate_paths(m, PortfolioRule::cash(1), vec({0.0}), 1.0, config(4, 8, 1.0, 1));
  CHECK_THROWS_AS(e.time_index(0.5), DomainError);
}

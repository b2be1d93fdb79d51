#include <fpp/control.hpp>
#include <fpp/errors.hpp>

#include <cmath>
#include <sstream>

namespace fpp {

namespace {

struct Pieces {
  Mat sigma;
  Vec lambda;
  Vec g;  // lambda V_x + sigma D_y V_x
  ValueJet jet;
};

Pieces evaluate(const PerformanceSurface& V, const FactorModel& model, double t, const Vec& y, double x) {
  if (!(x > 0.0)) throw DomainError("wealth must be positive");
  if (V.factor_index() >= model.factors()) throw BadParams("surface factor index exceeds the model dimension");
  Pieces p;
  model.diffusion(y, p.sigma);
  p.lambda = market_price_of_risk(model, y);
  p.jet = V.marginal(t, y, x);
  p.g = p.lambda * p.jet.v_x + p.sigma.col(V.factor_index()) * p.jet.v_xy;
  return p;
}

void check_concave(const ValueJet& j, double x) {
  if (!(j.v_xx < -1e-14 * std::abs(j.v_x) / x)) {
    std::ostringstream msg;
    msg << "V_xx = " << j.v_xx << " is not sufficiently negative (V_x = " << j.v_x << ", x = " << x << ")";
    throw DegenerateSecondOrder(msg.str());
  }
}

// Least-squares solve of S pi = target over the traded columns.
Vec solve_traded(const Mat& sigma, int k, const Vec& target) {
  if (k == 1) {
    const double n2 = sigma.col(0).squaredNorm();
    Vec pi(1);
    pi[0] = n2 == 0.0 ? 0.0 : sigma.col(0).dot(target) / n2;
    return pi;
  }
  Mat s = sigma.leftCols(k);
  Eigen::JacobiSVD<Mat> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  return svd.solve(target);
}

}  // namespace

Vec optimal_portfolio(const PerformanceSurface& V, const FactorModel& model, double t, const Vec& y,
                      double x) {
  const Pieces p = evaluate(V, model, t, y, x);
  check_concave(p.jet, x);
  return solve_traded(p.sigma, model.traded(), p.g) * (-1.0 / (x * p.jet.v_xx));
}

PortfolioRule optimal_rule(const PerformanceSurface& V, const FactorModel& model) {
  auto full = [V, model](double t, const Vec& y, double x) { return optimal_portfolio(V, model, t, y, x); };
  const int k = model.traded(), f = V.factor_index();
  if (V.homothetic && V.harmonic) {
    // For V = (x^g/g) u^delta the ratio form needs only the u jet:
    // pi* = S^+ (lambda + sigma_f delta u_y / u) / (1 - gamma).
    const HarmonicFunction u = *V.harmonic;
    const double delta = V.homothetic->delta, scale = 1.0 / (1.0 - V.homothetic->gamma);
    return PortfolioRule("pi_star", full,
                         [u, delta, scale, k, f](double t, const Vec& y, double, const Mat& sigma,
                                                 const Vec& lambda) {
                           const HarmonicJet j = u.jet(t, y[f]);
                           const Vec g = lambda + sigma.col(f) * (delta * j.u_y / j.u);
                           return Vec(solve_traded(sigma, k, g) * scale);
                         });
  }
  return PortfolioRule("pi_star", full,
                       [V, k, f](double t, const Vec& y, double x, const Mat& sigma, const Vec& lambda) {
                         const ValueJet jet = V.marginal(t, y, x);
                         check_concave(jet, x);
                         const Vec g = lambda * jet.v_x + sigma.col(f) * jet.v_xy;
                         return Vec(solve_traded(sigma, k, g) * (-1.0 / (x * jet.v_xx)));
                       });
}

OptimalWealthDynamics optimal_wealth_dynamics(const PerformanceSurface& V, const FactorModel& model) {
  OptimalWealthDynamics out;
  out.source = V.tag() == SurfaceTag::homothetic && model.factors() == 2 ? "homothetic-2d" : "complete-1d";
  out.eval = [V, model](double t, const Vec& y, double x) {
    const Pieces p = evaluate(V, model, t, y, x);
    check_concave(p.jet, x);
    const Vec pi = solve_traded(p.sigma, model.traded(), p.g) * (-1.0 / (x * p.jet.v_xx));
    const Vec exposure = p.sigma.leftCols(model.traded()) * pi;
    WealthDynamics w;
    w.diffusion = x * exposure;
    w.drift = w.diffusion.dot(p.lambda);
    return w;
  };
  return out;
}

namespace {

double bracket(const Pieces& p, int k, double x, const Vec& pi) {
  if (pi.size() != k) throw DomainError("portfolio has the wrong dimension");
  const Vec exposure = x * (p.sigma.leftCols(k) * pi);
  return p.g.dot(exposure) + 0.5 * p.jet.v_xx * exposure.squaredNorm();
}

}  // namespace

double hamiltonian_bracket(const PerformanceSurface& V, const FactorModel& model, double t, const Vec& y,
                           double x, const Vec& pi) {
  if (pi.size() != model.traded()) throw DomainError("portfolio has the wrong dimension");
  return bracket(evaluate(V, model, t, y, x), model.traded(), x, pi);
}

ArgmaxReport hamiltonian_argmax_check(const PerformanceSurface& V, const FactorModel& model, double t,
                                      const Vec& y, double x, const std::vector<Vec>& grid,
                                      double spacing) {
  if (grid.empty()) throw BadParams("argmax check needs a non-empty grid");
  ArgmaxReport r;
  r.grid_size = grid.size();
  r.spacing = spacing;
  r.pi_star = optimal_portfolio(V, model, t, y, x);
  const Pieces p = evaluate(V, model, t, y, x);
  std::vector<double> values(grid.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = bracket(p, model.traded(), x, grid[i]);
    if (values[i] > values[best]) best = i;
  }
  r.argmax = grid[best];
  r.argmax_value = values[best];
  r.exhaustive = true;
  for (double v : values) r.exhaustive = r.exhaustive && r.argmax_value >= v;
  r.distance = (r.argmax - r.pi_star).cwiseAbs().maxCoeff();
  r.within = r.distance <= spacing;
  return r;
}

std::vector<Vec> portfolio_grid(double center, double step, int half_width) {
  std::vector<Vec> out;
  out.reserve(2 * half_width + 1);
  for (int i = -half_width; i <= half_width; ++i) {
    Vec p(1);
    p[0] = center + i * step;
    out.push_back(p);
  }
  return out;
}

}  // namespace fpp

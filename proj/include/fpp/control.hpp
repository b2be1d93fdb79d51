#pragma once

#include <fpp/duality.hpp>
#include <fpp/factor_model.hpp>

#include <functional>
#include <string>
#include <vector>

namespace fpp {

/// Solves x sigma pi* = -P (lambda V_x + sigma D_y V_x) / V_xx over the traded
/// columns, P the projection onto their span. Throws DegenerateSecondOrder
/// unless V_xx < -1e-14 |V_x| / x.
Vec optimal_portfolio(const PerformanceSurface& V, const FactorModel& model, double t, const Vec& y,
                      double x);

/// pi*(t, y, x) as a feedback rule; copies V and the model.
PortfolioRule optimal_rule(const PerformanceSurface& V, const FactorModel& model);

struct OptimalWealthDynamics {
  std::function<WealthDynamics(double t, const Vec& y, double x)> eval;
  std::string source;  // "complete-1d" or "homothetic-2d"

  WealthDynamics operator()(double t, const Vec& y, double x) const { return eval(t, y, x); }
};

OptimalWealthDynamics optimal_wealth_dynamics(const PerformanceSurface& V, const FactorModel& model);

/// The HJB bracket in wealth-fraction units:
/// x (lambda V_x + sigma D_y V_x)^T sigma pi + V_xx x^2 |sigma pi|^2 / 2.
double hamiltonian_bracket(const PerformanceSurface& V, const FactorModel& model, double t, const Vec& y,
                           double x, const Vec& pi);

struct ArgmaxReport {
  Vec argmax;
  double argmax_value = 0.0;
  Vec pi_star;
  double distance = 0.0;  // max-norm distance between argmax and pi*
  double spacing = 0.0;
  bool within = false;     // distance <= spacing
  bool exhaustive = false; // bracket(argmax) >= bracket(p) for every grid p
  std::size_t grid_size = 0;
};

ArgmaxReport hamiltonian_argmax_check(const PerformanceSurface& V, const FactorModel& model, double t,
                                      const Vec& y, double x, const std::vector<Vec>& grid,
                                      double spacing);

/// One-asset grid {center + i step : |i| <= half_width}.
std::vector<Vec> portfolio_grid(double center, double step, int half_width);

}  // namespace fpp

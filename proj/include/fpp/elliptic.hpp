#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fpp {

using ScalarField = std::function<double(double)>;

/// L = a(y) d^2/dy^2 + b(y) d/dy + c(y) on the real line.
struct EllipticOperator1D {
  ScalarField a;
  ScalarField b;
  ScalarField c;

  /// a psi'' + b psi' + (c - lambda) psi at y.
  double apply(double y, double lambda, double psi, double dpsi, double d2psi) const {
    return a(y) * d2psi + b(y) * dpsi + (c(y) - lambda) * psi;
  }

  /// Throws BadParams unless min a(y) > 0 over `probes` points of [lo, hi].
  void check_elliptic(double lo, double hi, int probes = 257) const;
};

/// d^2/dy^2.
EllipticOperator1D heat_operator();

/// psi(y) = exp(c1 y + c2 y^2).
struct QuadExp {
  double c1 = 0.0;
  double c2 = 0.0;
};

struct PsiValue {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};

/// A positive solution psi(lambda; .) of (L - lambda) psi = 0 with psi(0) = 1.
///
/// Either a closed-form quadratic exponential (evaluable everywhere, sampled on
/// a verification grid) or a table produced by the shooting solver
/// (evaluable on [grid.front(), grid.back()] by quintic Hermite interpolation).
class MinimalSolution {
 public:
  static MinimalSolution quad_exp(double lambda, QuadExp form, std::vector<double> grid = {});
  static MinimalSolution tabulated(double lambda, std::vector<double> grid, std::vector<double> values,
                                   std::vector<double> first, std::vector<double> second);

  double lambda() const noexcept { return lambda_; }
  PsiValue operator()(double y) const;

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& first() const noexcept { return first_; }
  const std::vector<double>& second() const noexcept { return second_; }
  const std::optional<QuadExp>& closed_form() const noexcept { return closed_; }

  /// "exp_quadratic(c1,c2)" or "tabulated".
  std::string tag() const;

  /// Default verification grid for closed forms: 601 points on [-3, 3].
  static std::vector<double> default_grid();

 private:
  MinimalSolution() = default;

  double lambda_ = 0.0;
  std::vector<double> grid_;
  std::vector<double> values_;
  std::vector<double> first_;
  std::vector<double> second_;
  std::optional<QuadExp> closed_;
};

inline constexpr double kEllipticTolerance = 1e-6;

/// Shoots outward from y = 0 with psi(0) = 1, psi'(0) = slope0 using classical
/// RK4 with step min(max_step, (y_hi - y_lo) / 4096). The step is halved
/// until ode_residual < kEllipticTolerance. Throws PositivityLost if psi
/// reaches a non-positive value inside the domain.
MinimalSolution solve_positive_solution(const EllipticOperator1D& op, double lambda, double y_lo,
                                        double y_hi, double slope0, double max_step = 1e-3);

/// max over the grid of |a psi'' + b psi' + (c - lambda) psi| / (1 + |psi|).
double ode_residual(const EllipticOperator1D& op, double lambda, const MinimalSolution& psi);

enum class Direction { increasing, decreasing };

/// exp(+-y sqrt(lambda)), the two positive solutions of psi'' = lambda psi.
MinimalSolution heat_fundamental(double lambda, Direction direction);

}  // namespace fpp

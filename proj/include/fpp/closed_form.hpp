#pragma once

#include <fpp/duality.hpp>
#include <fpp/elliptic.hpp>
#include <fpp/factor_model.hpp>
#include <fpp/widder.hpp>

#include <optional>
#include <vector>

namespace fpp {

/// plus is the larger C2 root, minus the smaller.
enum class Branch { plus, minus };

const char* to_string(Branch b);

/// psi(y) = exp(c1 y + c2 y^2) with decay rate lambda.
struct QuadExpCoeffs {
  double c1 = 0.0;
  double c2 = 0.0;
  double lambda = 0.0;
  Branch branch = Branch::minus;
};

/// Largest residual a QuadExpCoeffs may leave in its ODE on [-3, 3].
inline constexpr double kCoeffTolerance = 1e-10;

struct ThetaAtom {
  double theta = 1.0;
  double weight = 1.0;
  Branch branch = Branch::minus;
};

/// dY = (a - bY) dt + sigma dW with a mixing measure over theta. When eta is
/// set every theta must lie in [1 + eta, 1/eta]; otherwise only theta > 0.
struct SchwartzParams {
  double a = 0.0;
  double b = 1.0;
  double sigma = 1.0;
  std::optional<double> eta;
  std::vector<ThetaAtom> atoms;
};

/// The theta-shifted operator acting on psi:
/// (sigma^2/2) d_yy + (theta m - sigma^2/2) d_y + theta(theta-1) m^2 / (2 sigma^2),
/// m = a + sigma^2/2 - b y.
EllipticOperator1D schwartz_shifted_operator(const SchwartzParams& p, double theta);

/// Coefficient matching against schwartz_shifted_operator. Throws BadParams
/// for theta <= 0 or invalid model parameters.
QuadExpCoeffs schwartz_coeffs(const SchwartzParams& p, double theta, Branch branch);

/// Throws SupportViolation if an atom lies outside the admissible support.
void check_schwartz_support(const SchwartzParams& p);

/// u(t,y,z) = sum w e^{-theta z} exp(c1 y + c2 y^2 - lambda t).
DualSurface schwartz_dual_surface(const SchwartzParams& p);

/// dual_value_surface(schwartz_dual_surface(p)).
PerformanceSurface schwartz_value_surface(const SchwartzParams& p,
                                          AnchorPolicy policy = AnchorPolicy::automatic);

FactorModel schwartz_model(const SchwartzParams& p);

/// Y = (log S, v) as in stochvol_model, with power-type preferences of
/// exponent gamma and mixing weights on the two quadratic-exponential modes.
struct StochVolParams {
  double a = 0.0;
  double b = 1.0;
  double sigma = 0.3;
  double rho = 0.0;
  double kappa = 0.3;
  double mu = 0.0;
  double gamma = 0.5;
  double nu_plus = 0.0;
  double nu_minus = 1.0;
};

/// Discriminant of the C2 quadratic: B^2 - sigma^2 g mu^2 / delta with
/// g = gamma / (1 - gamma), B = b + rho sigma g mu.
double stochvol_discriminant(const StochVolParams& p);

/// stochvol_discriminant(p) >= 0 (false for invalid gamma or rho).
bool stochvol_wellposed(const StochVolParams& p);

/// (sigma^2/2) d_yy + (a - b y + rho sigma g (kappa - mu y)) d_y
///   + g (kappa - mu y)^2 / (2 delta).
EllipticOperator1D stochvol_operator(const StochVolParams& p);

/// Throws NotWellPosed when the discriminant is negative or the C1 equation
/// is singular (zero discriminant with a nonzero right-hand side).
QuadExpCoeffs stochvol_coeffs(const StochVolParams& p, Branch branch);

/// u(t,y) = nu+ e^{-lambda+ t} psi+(y) + nu- e^{-lambda- t} psi-(y).
HarmonicFunction stochvol_harmonic(const StochVolParams& p);

/// V = (x^gamma/gamma) u^delta on factor component 1.
PerformanceSurface stochvol_value_surface(const StochVolParams& p);

FactorModel stochvol_model(const StochVolParams& p);

}  // namespace fpp

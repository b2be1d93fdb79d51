#include <fpp/closed_form.hpp>
#include <fpp/errors.hpp>

#include <cmath>
#include <sstream>

namespace fpp {

const char* to_string(Branch b) { return b == Branch::plus ? "plus" : "minus"; }

namespace {

void check_schwartz_model(const SchwartzParams& p) {
  if (!(p.sigma > 0.0)) throw BadParams("schwartz: sigma must be positive");
  if (!(p.b > 0.0)) throw BadParams("schwartz: b must be positive");
  if (!std::isfinite(p.a)) throw BadParams("schwartz: a must be finite");
}

void certify(const EllipticOperator1D& op, const QuadExpCoeffs& c, const char* who) {
  const MinimalSolution psi = MinimalSolution::quad_exp(c.lambda, {c.c1, c.c2});
  const double res = ode_residual(op, c.lambda, psi);
  if (!(res < kCoeffTolerance)) {
    std::ostringstream msg;
    msg << who << ": coefficients (" << c.c1 << ", " << c.c2 << ", " << c.lambda
        << ") leave ODE residual " << res;
    throw Error(msg.str());
  }
}

}  // namespace

EllipticOperator1D schwartz_shifted_operator(const SchwartzParams& p, double theta) {
  check_schwartz_model(p);
  const double s2 = p.sigma * p.sigma;
  const double m0 = p.a + 0.5 * s2, b = p.b;
  const double k = theta * (theta - 1.0) / (2.0 * s2);
  return {[s2](double) { return 0.5 * s2; },
          [=](double y) { return theta * (m0 - b * y) - 0.5 * s2; },
          [=](double y) {
            const double m = m0 - b * y;
            return k * m * m;
          }};
}

QuadExpCoeffs schwartz_coeffs(const SchwartzParams& p, double theta, Branch branch) {
  check_schwartz_model(p);
  if (!(theta > 0.0)) throw BadParams("schwartz_coeffs: theta must be positive");
  const double s2 = p.sigma * p.sigma;
  const double m0 = p.a + 0.5 * s2, b = p.b;
  const double k = theta * (theta - 1.0) / (2.0 * s2);
  // y^2: 2 s2 C2^2 - 2 theta b C2 + k b^2 = 0, discriminant 4 b^2 theta.
  const double root = std::sqrt(theta);
  const double sign = branch == Branch::plus ? 1.0 : -1.0;
  QuadExpCoeffs c;
  c.branch = branch;
  c.c2 = b * (theta + sign * root) / (2.0 * s2);
  // y^1: C1 (2 s2 C2 - theta b) = 2 k b m0 - C2 (2 theta m0 - s2).
  c.c1 = (2.0 * k * b * m0 - c.c2 * (2.0 * theta * m0 - s2)) / (sign * b * root);
  // y^0.
  c.lambda = 0.5 * s2 * (c.c1 * c.c1 + 2.0 * c.c2) + (theta * m0 - 0.5 * s2) * c.c1 + k * m0 * m0;
  certify(schwartz_shifted_operator(p, theta), c, "schwartz_coeffs");
  return c;
}

void check_schwartz_support(const SchwartzParams& p) {
  if (p.atoms.empty()) throw BadParams("schwartz: the mixing measure has no atoms");
  if (p.eta && !(*p.eta > 0.0 && *p.eta < 0.5)) throw BadParams("schwartz: eta must lie in (0, 1/2)");
  for (std::size_t i = 0; i < p.atoms.size(); ++i) {
    const ThetaAtom& a = p.atoms[i];
    if (!(a.weight >= 0.0)) throw BadParams("schwartz: atom weights must be non-negative");
    std::ostringstream msg;
    if (p.eta) {
      const double lo = 1.0 + *p.eta, hi = 1.0 / *p.eta;
      if (!(a.theta >= lo && a.theta <= hi)) {
        msg << "schwartz: atom " << i << " has theta = " << a.theta << " outside [" << lo << ", " << hi
            << "]";
        throw SupportViolation(msg.str());
      }
    } else if (!(a.theta > 0.0)) {
      msg << "schwartz: atom " << i << " has theta = " << a.theta << " <= 0";
      throw SupportViolation(msg.str());
    }
  }
}

FactorModel schwartz_model(const SchwartzParams& p) { return schwartz_model(p.a, p.b, p.sigma); }

DualSurface schwartz_dual_surface(const SchwartzParams& p) {
  check_schwartz_model(p);
  check_schwartz_support(p);
  std::vector<SpectralAtom> atoms;
  atoms.reserve(p.atoms.size());
  for (const auto& a : p.atoms) {
    const QuadExpCoeffs c = schwartz_coeffs(p, a.theta, a.branch);
    atoms.push_back({c.lambda, a.theta, a.weight, MinimalSolution::quad_exp(c.lambda, {c.c1, c.c2})});
  }
  return DualSurface(build_degenerate(std::move(atoms), complete_market_operator(schwartz_model(p))));
}

PerformanceSurface schwartz_value_surface(const SchwartzParams& p, AnchorPolicy policy) {
  PerformanceSurface s = dual_value_surface(schwartz_dual_surface(p), policy);
  s.description = "schwartz " + s.description;
  return s;
}

namespace {

struct StochVolDerived {
  double g, delta, A0, B, disc;
};

StochVolDerived derive(const StochVolParams& p) {
  if (!(p.sigma > 0.0)) throw BadParams("stochvol: sigma must be positive");
  if (!(p.b > 0.0)) throw BadParams("stochvol: b must be positive");
  if (!(p.mu >= 0.0)) throw BadParams("stochvol: mu must be non-negative");
  const HomotheticParams h = HomotheticParams::make(p.gamma, p.rho);
  StochVolDerived d;
  d.g = p.gamma / (1.0 - p.gamma);
  d.delta = h.delta;
  d.A0 = p.a + p.rho * p.sigma * d.g * p.kappa;
  d.B = p.b + p.rho * p.sigma * d.g * p.mu;
  d.disc = d.B * d.B - p.sigma * p.sigma * d.g * p.mu * p.mu / d.delta;
  return d;
}

}  // namespace

double stochvol_discriminant(const StochVolParams& p) { return derive(p).disc; }

bool stochvol_wellposed(const StochVolParams& p) {
  try {
    return derive(p).disc >= 0.0;
  } catch (const Error&) {
    return false;
  }
}

EllipticOperator1D stochvol_operator(const StochVolParams& p) {
  const StochVolDerived d = derive(p);
  const double s2 = p.sigma * p.sigma;
  const double A0 = d.A0, B = d.B, kappa = p.kappa, mu = p.mu;
  const double scale = d.g / (2.0 * d.delta);
  return {[s2](double) { return 0.5 * s2; }, [=](double y) { return A0 - B * y; },
          [=](double y) {
            const double l = kappa - mu * y;
            return scale * l * l;
          }};
}

QuadExpCoeffs stochvol_coeffs(const StochVolParams& p, Branch branch) {
  const StochVolDerived d = derive(p);
  if (d.disc < 0.0) {
    std::ostringstream msg;
    msg << "stochvol: not well posed, the C2 discriminant (b + rho sigma g mu)^2 - sigma^2 g mu^2 / delta = "
        << d.disc << " is negative (requires b/sigma >= mu (sqrt(rho^2 g^2 + g) - rho g), g = gamma/(1-gamma))";
    throw NotWellPosed(msg.str());
  }
  const double s2 = p.sigma * p.sigma;
  const double sign = branch == Branch::plus ? 1.0 : -1.0;
  const double root = std::sqrt(d.disc);
  QuadExpCoeffs c;
  c.branch = branch;
  // y^2: 2 s2 C2^2 - 2 B C2 + g mu^2 / (2 delta) = 0.
  c.c2 = (d.B + sign * root) / (2.0 * s2);
  // y^1: C1 (2 s2 C2 - B) = g kappa mu / delta - 2 A0 C2.
  const double rhs = d.g * p.kappa * p.mu / d.delta - 2.0 * d.A0 * c.c2;
  const double den = sign * root;
  if (den == 0.0) {
    if (rhs != 0.0) throw NotWellPosed("stochvol: the C1 equation is singular (zero discriminant)");
    c.c1 = 0.0;
  } else {
    c.c1 = rhs / den;
  }
  c.lambda = s2 * (0.5 * c.c1 * c.c1 + c.c2) + d.A0 * c.c1 + d.g * p.kappa * p.kappa / (2.0 * d.delta);
  certify(stochvol_operator(p), c, "stochvol_coeffs");
  return c;
}

HarmonicFunction stochvol_harmonic(const StochVolParams& p) {
  if (!(p.nu_plus >= 0.0 && p.nu_minus >= 0.0)) throw BadParams("stochvol: weights must be non-negative");
  if (!(p.nu_plus + p.nu_minus > 0.0)) throw BadParams("stochvol: nu_plus + nu_minus must be positive");
  const EllipticOperator1D op = stochvol_operator(p);
  std::vector<SpectralAtom> atoms;
  for (Branch br : {Branch::plus, Branch::minus}) {
    const double w = br == Branch::plus ? p.nu_plus : p.nu_minus;
    const QuadExpCoeffs c = stochvol_coeffs(p, br);
    if (w > 0.0) atoms.push_back({c.lambda, std::nullopt, w, MinimalSolution::quad_exp(c.lambda, {c.c1, c.c2})});
  }
  return build_harmonic(std::move(atoms), op);
}

PerformanceSurface stochvol_value_surface(const StochVolParams& p) {
  PerformanceSurface s = homothetic_value(stochvol_harmonic(p), HomotheticParams::make(p.gamma, p.rho), 1);
  s.description = "stochvol homothetic";
  return s;
}

FactorModel stochvol_model(const StochVolParams& p) {
  return stochvol_model(p.a, p.b, p.sigma, p.rho, p.kappa, p.mu);
}

}  // namespace fpp

#pragma once

#include <fpp/elliptic.hpp>

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fpp {

/// One term w * exp(-lambda t - theta z) * psi(y) of a spectral sum.
struct SpectralAtom {
  double lambda = 0.0;
  std::optional<double> theta;  // degenerate case only
  double weight = 0.0;
  MinimalSolution psi;
};

/// Value and partial derivatives of u at a point. z-derivatives vanish in
/// standard mode.
struct HarmonicJet {
  double u = 0.0;
  double u_t = 0.0;
  double u_y = 0.0;
  double u_yy = 0.0;
  double u_z = 0.0;
  double u_zz = 0.0;
  double u_yz = 0.0;
};

enum class HarmonicMode { standard, degenerate };

/// Immutable, thread-safe evaluable u(t, y) or u(t, y, z).
class HarmonicFunction {
 public:
  using JetFn = std::function<HarmonicJet(double t, double y, double z)>;

  HarmonicFunction(HarmonicMode mode, JetFn jet, std::vector<SpectralAtom> atoms = {},
                   std::string label = {});

  HarmonicMode mode() const noexcept { return mode_; }
  HarmonicJet jet(double t, double y, double z = 0.0) const { return jet_(t, y, z); }
  double operator()(double t, double y, double z = 0.0) const { return jet_(t, y, z).u; }

  /// Empty for functions not assembled from atoms (heat sums, fixtures).
  const std::vector<SpectralAtom>& atoms() const noexcept { return *atoms_; }
  const std::string& label() const noexcept { return label_; }

 private:
  HarmonicMode mode_;
  JetFn jet_;
  std::shared_ptr<const std::vector<SpectralAtom>> atoms_;
  std::string label_;
};

inline constexpr std::size_t kMaxAtoms = 10000;

/// u(t,y) = sum_i w_i e^{-lambda_i t} psi_i(y). Every atom must satisfy
/// ode_residual(op, lambda_i, psi_i) < kEllipticTolerance and carry no theta.
HarmonicFunction build_harmonic(std::vector<SpectralAtom> atoms, const EllipticOperator1D& op);

/// Assembles without the residual precondition (diagnostics and negative
/// controls only).
HarmonicFunction assemble_unchecked(std::vector<SpectralAtom> atoms, HarmonicMode mode);

struct HeatAtom {
  double z = 0.0;
  double weight = 0.0;
};

/// u(t,y) = sum_j w_j exp(z_j y - z_j^2 t), a solution of u_t + u_yy = 0.
HarmonicFunction classical_heat(std::vector<HeatAtom> atoms);

/// Atom of a heat-operator spectral measure: weight `decreasing` on
/// exp(-y sqrt(lambda)) and `increasing` on exp(+y sqrt(lambda)).
struct LambdaPairAtom {
  double lambda = 0.0;
  double decreasing = 0.0;
  double increasing = 0.0;
};

/// lambda -> z = -sqrt(lambda) (weight `decreasing`) and z = +sqrt(lambda)
/// (weight `increasing`); lambda = 0 collapses to one atom at z = 0.
std::vector<HeatAtom> lambda_to_z_change_of_vars(std::span<const LambdaPairAtom> atoms);

/// Expands lambda-pair atoms into SpectralAtoms over heat_fundamental.
std::vector<SpectralAtom> heat_spectral_atoms(std::span<const LambdaPairAtom> atoms);

/// L_yz = a d_yy + q d_zy + p d_zz + b d_y + r d_z + c, coefficients in y.
struct DegenerateOperator {
  ScalarField a, q, p, b, r, c;

  /// L_y - theta q d_y + theta^2 p - theta r: the operator acting on psi for
  /// a term exp(-theta z) psi(y).
  EllipticOperator1D shifted(double theta) const;
};

class FactorModel;

/// Operator of the dual-transformed complete-market equation for a model with
/// one factor that is also the traded log-price (n = k = d = 1):
/// a = sigma^2/2, q = -sigma lambda, p = r = lambda^2/2, b = mu - sigma lambda.
DegenerateOperator complete_market_operator(const FactorModel& model);

/// u(t,y,z) = sum_i w_i exp(-lambda_i t - theta_i z) psi_i(y). Each psi_i must
/// solve the theta_i-shifted equation to residual < kEllipticTolerance.
HarmonicFunction build_degenerate(std::vector<SpectralAtom> atoms, const DegenerateOperator& op);

struct CounterexampleFixture {
  HarmonicFunction u;
  DegenerateOperator op;
};

struct TravelingWaveParams {
  double sigma = 1.0;
  double lambda = 2.0;  // market price of risk
};

/// "bs_traveling_wave": u = phi(lambda(lambda - sigma) t / 2 - (lambda/sigma) y - z)
/// with a compactly supported bump phi, phi(0) = 1.
/// "kolmogorov": u = exp(3z - 3ty - 3t^3) for u_t + u_yy + y u_z = 0.
CounterexampleFixture counterexample_fixture(std::string_view name, TravelingWaveParams params = {});

}  // namespace fpp

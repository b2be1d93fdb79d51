#pragma once

#include <fpp/duality.hpp>
#include <fpp/elliptic.hpp>
#include <fpp/factor_model.hpp>
#include <fpp/widder.hpp>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace fpp {

std::vector<double> linspace(double lo, double hi, std::size_t n);
/// n points geometrically spaced from lo to hi (both > 0).
std::vector<double> logspace(double lo, double hi, std::size_t n);

/// Probe points per axis and finite-difference steps. h_x is relative to x.
/// Finite differences are central in the interior and one-sided (second
/// order) at the ends of each axis, so stencils never leave the grid hull.
struct GridSpec {
  std::vector<double> t, y, z, x;
  double h_t = 1e-4, h_y = 1e-4, h_z = 1e-4, h_x = 1e-4;

  /// t {0, 0.5, 1, 2}; y 61 points on [-3, 3]; z 21 points on [-2, 2];
  /// x 41 points log-spaced on [0.01, 100].
  static GridSpec standard();

  /// Throws BadParams on empty axes, unsorted axes or non-positive steps.
  void validate(bool need_z, bool need_x) const;
};

enum class Partials { analytic, finite_difference };

struct ResidualPoint {
  double t, y, w;  // w is z or x depending on the equation
  double residual;
};

struct ResidualReport {
  std::string equation;
  double max_abs_residual = 0.0;
  std::array<double, 3> argmax{};  // (t, y, z or x)
  std::size_t points = 0;
  double tolerance = 0.0;
  bool pass = false;
  Partials partials = Partials::analytic;
  std::vector<ResidualPoint> samples;  // row-major over (t, y, w)
};

/// |u_t + a u_yy + b u_y + c u| / (1 + |u|) over (t, y).
ResidualReport parabolic_residual(const HarmonicFunction& u, const EllipticOperator1D& op, const GridSpec& grid,
                                  double tolerance, Partials partials = Partials::analytic);

/// |u_t + a u_yy + q u_yz + p u_zz + b u_y + r u_z + c u| / (1 + |u|) over (t, y, z).
ResidualReport degenerate_parabolic_residual(const HarmonicFunction& u, const DegenerateOperator& op,
                                             const GridSpec& grid, double tolerance,
                                             Partials partials = Partials::analytic);

/// complete: V_t - |P(lambda V_x + sigma D_y V_x)|^2 / (2 V_xx) + tr(D_y^2 V sigma^T sigma)/2
///   + D_y V^T mu over (t, y, x), P the projection onto the traded columns,
///   normalized by 1 + |V|. Throws DegenerateSecondOrder if V_xx >= 0.
/// homothetic_linearized: the linear equation for u = v^{1/delta} over (t, y).
/// dual_linearized: the dual surface under the complete-market operator over (t, y, z).
/// Factor components other than V.factor_index() are held at 0.
enum class HjbForm { complete, homothetic_linearized, dual_linearized };

const char* to_string(HjbForm f);

ResidualReport hjb_residual(const PerformanceSurface& V, const FactorModel& model, const GridSpec& grid,
                            HjbForm form, double tolerance, Partials partials = Partials::analytic);

struct AppendixReport {
  double eta = 0.0;
  double ratio_min = 0.0, ratio_max = 0.0;  // -u/u_z over (t, y, z)
  bool ratio_ok = false;                     // within [eta, 1/(1+eta)]
  double marginal_min = 0.0, marginal_max = 0.0;  // -V~/(x V~_x) over (t, y, x)
  bool marginal_ok = false;                       // within [1+eta, 1/eta]
  double growth_c = 0.0;                          // max |u_y/u| / (1 + |y|)
  std::size_t probes = 0;
  bool pass = false;
};

AppendixReport appendix_bounds_check(const DualSurface& u, double eta, const GridSpec& grid);

/// max over (t, y[, z]) of |u_y / u| / (1 + |y|); z is ignored in standard mode.
double growth_constant(const HarmonicFunction& u, const GridSpec& grid);

nlohmann::json to_json(const ResidualReport& r);
nlohmann::json to_json(const AppendixReport& r);

/// "t,y,w,residual" rows with 17 significant digits.
void write_residual_csv(const ResidualReport& r, std::ostream& out);

/// %.17g formatting used for every CSV number.
std::string csv_number(double v);

}  // namespace fpp

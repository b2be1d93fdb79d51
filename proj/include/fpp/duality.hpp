#pragma once

#include <fpp/linalg.hpp>
#include <fpp/widder.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fpp {

/// u(t,y,z) = (V_x(t,y,.))^{-1}(e^z): positive and strictly decreasing in z.
class DualSurface {
 public:
  explicit DualSurface(HarmonicFunction u);

  HarmonicJet jet(double t, double y, double z) const { return u_.jet(t, y, z); }
  double operator()(double t, double y, double z) const { return u_(t, y, z); }
  const HarmonicFunction& harmonic() const noexcept { return u_; }

  /// Throws DomainError at the first probe with u <= 0 or u_z >= 0.
  void check_monotone(const std::vector<double>& ts, const std::vector<double>& ys,
                      const std::vector<double>& zs) const;

 private:
  HarmonicFunction u_;
};

/// delta = (1 - gamma) / (1 - gamma + rho^2 gamma).
double delta_exponent(double gamma, double rho);

struct HomotheticParams {
  double gamma = 0.5;
  double rho = 0.0;
  double delta = 1.0;

  /// Validates gamma < 1, gamma != 0, |rho| <= 1 and fills delta.
  static HomotheticParams make(double gamma, double rho);
};

struct DualPoint {
  double zeta = 0.0;     // log V~
  double v_tilde = 0.0;  // V~ = V_x
  HarmonicJet jet;       // u and partials at (t, y, zeta)
  int iterations = 0;
};

/// Solves u(t, y, zeta) = x for zeta by bracket expansion (at most 200
/// doublings) and safeguarded Newton steps on log u; |u - x| <= 1e-12 x.
/// Throws OutOfRange when x cannot be bracketed.
DualPoint invert_dual(const DualSurface& u, double t, double y, double x, double zeta_guess = 0.0);

/// V~(t,y,x) = exp(zeta) with u(t, y, zeta) = x.
double invert_dual_marginal(const DualSurface& u, double t, double y, double x);

struct ValueJet {
  double v = 0.0;
  double v_t = 0.0;
  double v_x = 0.0;
  double v_xx = 0.0;
  double v_y = 0.0;
  double v_xy = 0.0;
  double v_yy = 0.0;
};

/// zero: V = int_0^x V~ ds.  unit: V = int_1^x V~ ds, so V(t,y,1) = 0.
enum class Anchor { zero, unit };

struct DualValue {
  ValueJet jet;
  Anchor anchor = Anchor::zero;
  double tail_exponent = 0.0;  // local exponent p of V~ ~ s^p near 0
};

/// Integrates V~ and its t, y, yy derivatives in s. Throws NonIntegrableAtZero
/// for Anchor::zero when the estimated exponent of V~ at 0 is <= -1.
DualValue integrate_to_value(const DualSurface& u, double t, double y, double x,
                             Anchor anchor = Anchor::zero);

/// Local exponent x V~_x / V~ = u / u_z, taken at s = 1e-8 and 1e-12;
/// returns the value at the smaller s.
double dual_tail_exponent(const DualSurface& u, double t, double y);

enum class SurfaceTag { dual_inversion, homothetic };

/// V(t, y, x) with y the scalar factor component `factor_index` of Y.
class PerformanceSurface {
 public:
  using JetFn = std::function<ValueJet(double t, double y, double x)>;

  PerformanceSurface(SurfaceTag tag, JetFn jet, JetFn marginal = {}, int factor_index = 0);

  SurfaceTag tag() const noexcept { return tag_; }
  int factor_index() const noexcept { return factor_index_; }

  ValueJet jet(double t, double y, double x) const { return jet_(t, y, x); }
  ValueJet jet(double t, const Vec& y, double x) const { return jet_(t, y[factor_index_], x); }
  double operator()(double t, double y, double x) const { return jet_(t, y, x).v; }
  double operator()(double t, const Vec& y, double x) const { return jet(t, y, x).v; }

  /// Only v_x, v_xx and v_xy are guaranteed; cheaper than jet() for dual surfaces.
  ValueJet marginal(double t, double y, double x) const { return marginal_(t, y, x); }
  ValueJet marginal(double t, const Vec& y, double x) const { return marginal_(t, y[factor_index_], x); }

  // Construction data, present according to the tag.
  std::optional<DualSurface> dual;
  std::optional<HarmonicFunction> harmonic;
  std::optional<HomotheticParams> homothetic;
  Anchor anchor = Anchor::zero;  // dual surfaces only; unit means the fallback was taken
  std::string description;

 private:
  SurfaceTag tag_;
  JetFn jet_;
  JetFn marginal_;
  int factor_index_;
};

enum class AnchorPolicy { automatic, zero, unit };

/// V from a dual surface. automatic uses Anchor::zero unless V~ is not
/// integrable at 0 (probed at t = 0, y = 0), in which case Anchor::unit.
PerformanceSurface dual_value_surface(DualSurface u, AnchorPolicy policy = AnchorPolicy::automatic);

/// V = (x^gamma / gamma) u(t,y)^delta with analytic partials.
PerformanceSurface homothetic_value(HarmonicFunction u, HomotheticParams params, int factor_index = 0);

}  // namespace fpp

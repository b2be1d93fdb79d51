#include <fpp/errors.hpp>
#include <fpp/pde_verify.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace fpp {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = hi;
  return out;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi > 0.0)) throw BadParams("logspace needs positive end points");
  std::vector<double> out = linspace(std::log(lo), std::log(hi), n);
  for (double& v : out) v = std::exp(v);
  if (!out.empty()) {
    out.front() = lo;
    out.back() = hi;
  }
  return out;
}

GridSpec GridSpec::standard() {
  GridSpec g;
  g.t = {0.0, 0.5, 1.0, 2.0};
  g.y = linspace(-3.0, 3.0, 61);
  g.z = linspace(-2.0, 2.0, 21);
  g.x = logspace(0.01, 100.0, 41);
  return g;
}

void GridSpec::validate(bool need_z, bool need_x) const {
  auto axis = [](const std::vector<double>& v, const char* name) {
    if (v.empty()) throw BadParams(std::string("grid axis ") + name + " is empty");
    if (!std::is_sorted(v.begin(), v.end())) throw BadParams(std::string("grid axis ") + name + " is not sorted");
    for (double s : v)
      if (!std::isfinite(s)) throw BadParams(std::string("grid axis ") + name + " has a non-finite point");
  };
  axis(t, "t");
  axis(y, "y");
  if (need_z) axis(z, "z");
  if (need_x) {
    axis(x, "x");
    if (x.front() <= 0.0) throw BadParams("grid axis x must be positive");
  }
  if (!(h_t > 0.0 && h_y > 0.0 && h_z > 0.0 && h_x > 0.0)) throw BadParams("finite-difference steps must be positive");
}

namespace {

// Offsets (in units of h) and weights of a one-dimensional stencil.
struct Stencil {
  int n = 0;
  std::array<double, 4> off{};
  std::array<double, 4> w{};
};

enum class Side { central, forward, backward };

Side side_of(double v, double lo, double hi, double h) {
  if (hi - lo < 2.0 * h) return Side::central;
  if (v - h < lo) return Side::forward;
  if (v + h > hi) return Side::backward;
  return Side::central;
}

Stencil first_stencil(double v, double lo, double hi, double h) {
  switch (side_of(v, lo, hi, h)) {
    case Side::forward: return {3, {0, 1, 2}, {-1.5 / h, 2.0 / h, -0.5 / h}};
    case Side::backward: return {3, {0, -1, -2}, {1.5 / h, -2.0 / h, 0.5 / h}};
    default: return {2, {-1, 1}, {-0.5 / h, 0.5 / h}};
  }
}

Stencil second_stencil(double v, double lo, double hi, double h) {
  const double h2 = h * h;
  switch (side_of(v, lo, hi, h)) {
    case Side::forward: return {4, {0, 1, 2, 3}, {2.0 / h2, -5.0 / h2, 4.0 / h2, -1.0 / h2}};
    case Side::backward: return {4, {0, -1, -2, -3}, {2.0 / h2, -5.0 / h2, 4.0 / h2, -1.0 / h2}};
    default: return {3, {-1, 0, 1}, {1.0 / h2, -2.0 / h2, 1.0 / h2}};
  }
}

template <class F>
double apply1(const Stencil& s, double v, double h, F&& f) {
  double acc = 0.0;
  for (int i = 0; i < s.n; ++i) acc += s.w[i] * f(v + s.off[i] * h);
  return acc;
}

template <class F>
double apply2(const Stencil& a, double va, double ha, const Stencil& b, double vb, double hb, F&& f) {
  double acc = 0.0;
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < b.n; ++j) acc += a.w[i] * b.w[j] * f(va + a.off[i] * ha, vb + b.off[j] * hb);
  return acc;
}

struct Range {
  double lo, hi;
};

Range range_of(const std::vector<double>& v) { return {v.front(), v.back()}; }

HarmonicJet fd_harmonic(const HarmonicFunction& u, double t, double y, double z, const GridSpec& g, bool with_z) {
  const Range rt = range_of(g.t), ry = range_of(g.y);
  HarmonicJet j;
  j.u = u(t, y, z);
  j.u_t = apply1(first_stencil(t, rt.lo, rt.hi, g.h_t), t, g.h_t, [&](double s) { return u(s, y, z); });
  j.u_y = apply1(first_stencil(y, ry.lo, ry.hi, g.h_y), y, g.h_y, [&](double s) { return u(t, s, z); });
  j.u_yy = apply1(second_stencil(y, ry.lo, ry.hi, g.h_y), y, g.h_y, [&](double s) { return u(t, s, z); });
  if (with_z) {
    const Range rz = range_of(g.z);
    const Stencil fz = first_stencil(z, rz.lo, rz.hi, g.h_z);
    j.u_z = apply1(fz, z, g.h_z, [&](double s) { return u(t, y, s); });
    j.u_zz = apply1(second_stencil(z, rz.lo, rz.hi, g.h_z), z, g.h_z, [&](double s) { return u(t, y, s); });
    j.u_yz = apply2(first_stencil(y, ry.lo, ry.hi, g.h_y), y, g.h_y, fz, z, g.h_z,
                    [&](double a, double b) { return u(t, a, b); });
  }
  return j;
}

ValueJet fd_value(const PerformanceSurface& V, double t, double y, double x, const GridSpec& g) {
  const Range rt = range_of(g.t), ry = range_of(g.y), rx = range_of(g.x);
  const double hx = g.h_x * x;
  auto v = [&](double a, double b, double c) { return V(a, b, c); };
  ValueJet j;
  j.v = v(t, y, x);
  j.v_t = apply1(first_stencil(t, rt.lo, rt.hi, g.h_t), t, g.h_t, [&](double s) { return v(s, y, x); });
  const Stencil fy = first_stencil(y, ry.lo, ry.hi, g.h_y);
  const Stencil fx = first_stencil(x, rx.lo, rx.hi, hx);
  j.v_y = apply1(fy, y, g.h_y, [&](double s) { return v(t, s, x); });
  j.v_yy = apply1(second_stencil(y, ry.lo, ry.hi, g.h_y), y, g.h_y, [&](double s) { return v(t, s, x); });
  j.v_x = apply1(fx, x, hx, [&](double s) { return v(t, y, s); });
  j.v_xx = apply1(second_stencil(x, rx.lo, rx.hi, hx), x, hx, [&](double s) { return v(t, y, s); });
  j.v_xy = apply2(fy, y, g.h_y, fx, x, hx, [&](double a, double b) { return v(t, a, b); });
  return j;
}

class Collector {
 public:
  Collector(std::string equation, double tolerance, Partials partials) {
    r_.equation = std::move(equation);
    r_.tolerance = tolerance;
    r_.partials = partials;
  }

  void add(double t, double y, double w, double residual) {
    if (!std::isfinite(residual)) residual = std::numeric_limits<double>::infinity();
    r_.samples.push_back({t, y, w, residual});
    ++r_.points;
    if (r_.points == 1 || residual > r_.max_abs_residual) {
      r_.max_abs_residual = residual;
      r_.argmax = {t, y, w};
    }
  }

  ResidualReport finish() {
    r_.pass = r_.points > 0 && r_.max_abs_residual < r_.tolerance;
    return std::move(r_);
  }

 private:
  ResidualReport r_;
};

const char* partials_name(Partials p) { return p == Partials::analytic ? "analytic" : "finite_difference"; }

}  // namespace

ResidualReport parabolic_residual(const HarmonicFunction& u, const EllipticOperator1D& op, const GridSpec& grid,
                                  double tolerance, Partials partials) {
  grid.validate(false, false);
  Collector c("parabolic", tolerance, partials);
  for (double t : grid.t)
    for (double y : grid.y) {
      const HarmonicJet j = partials == Partials::analytic ? u.jet(t, y) : fd_harmonic(u, t, y, 0.0, grid, false);
      const double r = j.u_t + op.a(y) * j.u_yy + op.b(y) * j.u_y + op.c(y) * j.u;
      c.add(t, y, 0.0, std::abs(r) / (1.0 + std::abs(j.u)));
    }
  return c.finish();
}

ResidualReport degenerate_parabolic_residual(const HarmonicFunction& u, const DegenerateOperator& op,
                                             const GridSpec& grid, double tolerance, Partials partials) {
  grid.validate(true, false);
  Collector c("degenerate_parabolic", tolerance, partials);
  for (double t : grid.t)
    for (double y : grid.y) {
      const double a = op.a(y), q = op.q(y), p = op.p(y), b = op.b(y), r = op.r(y), cc = op.c(y);
      for (double z : grid.z) {
        const HarmonicJet j = partials == Partials::analytic ? u.jet(t, y, z) : fd_harmonic(u, t, y, z, grid, true);
        const double res = j.u_t + a * j.u_yy + q * j.u_yz + p * j.u_zz + b * j.u_y + r * j.u_z + cc * j.u;
        c.add(t, y, z, std::abs(res) / (1.0 + std::abs(j.u)));
      }
    }
  return c.finish();
}

const char* to_string(HjbForm f) {
  switch (f) {
    case HjbForm::complete: return "complete";
    case HjbForm::homothetic_linearized: return "homothetic_linearized";
    case HjbForm::dual_linearized: return "dual_linearized";
  }
  return "?";
}

namespace {

Vec embed(const FactorModel& model, int f, double y) {
  Vec v = Vec::Zero(model.factors());
  v[f] = y;
  return v;
}

// |P g|^2 with P the projection onto the span of the first k columns.
double projected_norm2(const Mat& sigma, int k, const Vec& g) {
  if (k == 1) {
    const double n2 = sigma.col(0).squaredNorm();
    if (n2 == 0.0) return 0.0;
    const double d = sigma.col(0).dot(g);
    return d * d / n2;
  }
  const Mat s = sigma.leftCols(k);
  Eigen::JacobiSVD<Mat> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  const Vec pi = svd.solve(g);
  return (s * pi).squaredNorm();
}

ResidualReport hjb_complete(const PerformanceSurface& V, const FactorModel& model, const GridSpec& grid,
                            double tolerance, Partials partials) {
  grid.validate(false, true);
  const int f = V.factor_index();
  Collector c("hjb_complete", tolerance, partials);
  Mat sigma;
  Vec mu;
  for (double t : grid.t)
    for (double y : grid.y) {
      const Vec yv = embed(model, f, y);
      model.diffusion(yv, sigma);
      model.drift(yv, mu);
      const Vec lambda = market_price_of_risk(model, yv);
      const Vec sf = sigma.col(f);
      for (double x : grid.x) {
        const ValueJet j = partials == Partials::analytic ? V.jet(t, y, x) : fd_value(V, t, y, x, grid);
        if (!(j.v_xx < 0.0))
          throw DegenerateSecondOrder("V_xx >= 0 at t = " + csv_number(t) + ", y = " + csv_number(y) +
                                      ", x = " + csv_number(x));
        const Vec g = lambda * j.v_x + sf * j.v_xy;
        const double res = j.v_t - 0.5 * projected_norm2(sigma, model.traded(), g) / j.v_xx +
                           0.5 * j.v_yy * sf.squaredNorm() + j.v_y * mu[f];
        c.add(t, y, x, std::abs(res) / (1.0 + std::abs(j.v)));
      }
    }
  return c.finish();
}

ResidualReport hjb_homothetic(const PerformanceSurface& V, const FactorModel& model, const GridSpec& grid,
                              double tolerance, Partials partials) {
  if (!V.harmonic || !V.homothetic) throw BadParams("homothetic_linearized needs a homothetic surface");
  if (model.traded() != 1) throw BadParams("homothetic_linearized needs one traded asset");
  grid.validate(false, false);
  const int f = V.factor_index();
  const HarmonicFunction& u = *V.harmonic;
  const double gamma = V.homothetic->gamma, delta = V.homothetic->delta;
  const double g = gamma / (1.0 - gamma);
  Collector c("hjb_homothetic_linearized", tolerance, partials);
  Mat sigma;
  Vec mu;
  for (double t : grid.t)
    for (double y : grid.y) {
      const Vec yv = embed(model, f, y);
      model.diffusion(yv, sigma);
      model.drift(yv, mu);
      const Vec lambda = market_price_of_risk(model, yv);
      const Vec s0 = sigma.col(0), sf = sigma.col(f);
      const double s0n = s0.norm(), a = sf.norm();
      const double lam = s0n == 0.0 ? 0.0 : s0.dot(lambda) / s0n;
      const double rho = s0n == 0.0 || a == 0.0 ? 0.0 : s0.dot(sf) / (s0n * a);
      const HarmonicJet j = partials == Partials::analytic ? u.jet(t, y) : fd_harmonic(u, t, y, 0.0, grid, false);
      const double res = j.u_t + 0.5 * a * a * j.u_yy + (mu[f] + rho * g * lam * a) * j.u_y +
                         g / (2.0 * delta) * lam * lam * j.u;
      c.add(t, y, 0.0, std::abs(res) / (1.0 + std::abs(j.u)));
    }
  return c.finish();
}

}  // namespace

ResidualReport hjb_residual(const PerformanceSurface& V, const FactorModel& model, const GridSpec& grid,
                            HjbForm form, double tolerance, Partials partials) {
  if (V.factor_index() >= model.factors()) throw BadParams("surface factor index exceeds the model dimension");
  switch (form) {
    case HjbForm::complete: return hjb_complete(V, model, grid, tolerance, partials);
    case HjbForm::homothetic_linearized: return hjb_homothetic(V, model, grid, tolerance, partials);
    case HjbForm::dual_linearized: {
      if (!V.dual) throw BadParams("dual_linearized needs a dual surface");
      ResidualReport r = degenerate_parabolic_residual(V.dual->harmonic(), complete_market_operator(model), grid,
                                                       tolerance, partials);
      r.equation = "hjb_dual_linearized";
      return r;
    }
  }
  throw BadParams("unknown HJB form");
}

AppendixReport appendix_bounds_check(const DualSurface& u, double eta, const GridSpec& grid) {
  if (!(eta > 0.0 && eta < 0.5)) throw BadParams("eta must lie in (0, 1/2)");
  grid.validate(true, true);
  AppendixReport r;
  r.eta = eta;
  r.ratio_min = r.marginal_min = std::numeric_limits<double>::infinity();
  r.ratio_max = r.marginal_max = -std::numeric_limits<double>::infinity();
  for (double t : grid.t)
    for (double y : grid.y) {
      for (double z : grid.z) {
        const HarmonicJet j = u.jet(t, y, z);
        const double ratio = -j.u / j.u_z;
        r.ratio_min = std::min(r.ratio_min, ratio);
        r.ratio_max = std::max(r.ratio_max, ratio);
        ++r.probes;
      }
      for (double x : grid.x) {
        // -V~/(x V~_x) = -u_z / u at the inverted point.
        const DualPoint p = invert_dual(u, t, y, x);
        const double m = -p.jet.u_z / x;
        r.marginal_min = std::min(r.marginal_min, m);
        r.marginal_max = std::max(r.marginal_max, m);
        ++r.probes;
      }
    }
  constexpr double slack = 1e-10;
  r.ratio_ok = r.ratio_min >= eta * (1.0 - slack) && r.ratio_max <= (1.0 + slack) / (1.0 + eta);
  r.marginal_ok = r.marginal_min >= (1.0 + eta) * (1.0 - slack) && r.marginal_max <= (1.0 + slack) / eta;
  r.growth_c = growth_constant(u.harmonic(), grid);
  r.pass = r.ratio_ok && r.marginal_ok && std::isfinite(r.growth_c);
  return r;
}

double growth_constant(const HarmonicFunction& u, const GridSpec& grid) {
  const bool deg = u.mode() == HarmonicMode::degenerate;
  const std::vector<double> zs = deg && !grid.z.empty() ? grid.z : std::vector<double>{0.0};
  double c = 0.0;
  for (double t : grid.t)
    for (double y : grid.y)
      for (double z : zs) {
        const HarmonicJet j = u.jet(t, y, z);
        c = std::max(c, std::abs(j.u_y / j.u) / (1.0 + std::abs(y)));
      }
  return c;
}

nlohmann::json to_json(const ResidualReport& r) {
  nlohmann::json j;
  j["equation"] = r.equation;
  j["max_abs_residual"] = r.max_abs_residual;
  j["argmax"] = {r.argmax[0], r.argmax[1], r.argmax[2]};
  j["points"] = r.points;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  j["partials"] = partials_name(r.partials);
  return j;
}

nlohmann::json to_json(const AppendixReport& r) {
  return {{"eta", r.eta},
          {"ratio_min", r.ratio_min},
          {"ratio_max", r.ratio_max},
          {"ratio_ok", r.ratio_ok},
          {"marginal_min", r.marginal_min},
          {"marginal_max", r.marginal_max},
          {"marginal_ok", r.marginal_ok},
          {"growth_c", r.growth_c},
          {"probes", r.probes},
          {"pass", r.pass}};
}

void write_residual_csv(const ResidualReport& r, std::ostream& out) {
  out << "t,y,w,residual\n";
  for (const ResidualPoint& p : r.samples)
    out << csv_number(p.t) << ',' << csv_number(p.y) << ',' << csv_number(p.w) << ',' << csv_number(p.residual)
        << '\n';
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace fpp

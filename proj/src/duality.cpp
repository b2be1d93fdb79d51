#include <fpp/duality.hpp>
#include <fpp/errors.hpp>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace fpp {

DualSurface::DualSurface(HarmonicFunction u) : u_(std::move(u)) {}

void DualSurface::check_monotone(const std::vector<double>& ts, const std::vector<double>& ys,
                                 const std::vector<double>& zs) const {
  for (double t : ts) {
    for (double y : ys) {
      for (double z : zs) {
        const HarmonicJet j = u_.jet(t, y, z);
        if (!(j.u > 0.0) || !(j.u_z < 0.0)) {
          std::ostringstream msg;
          msg << "dual surface is not positive and decreasing in z at (t, y, z) = (" << t << ", " << y
              << ", " << z << "): u = " << j.u << ", u_z = " << j.u_z;
          throw DomainError(msg.str());
        }
      }
    }
  }
}

double delta_exponent(double gamma, double rho) {
  if (!(gamma < 1.0) || gamma == 0.0) throw BadParams("delta: gamma must satisfy gamma < 1, gamma != 0");
  const double denom = 1.0 - gamma + rho * rho * gamma;
  if (denom == 0.0) throw DegenerateDelta("delta: 1 - gamma + rho^2 gamma vanishes");
  return (1.0 - gamma) / denom;
}

HomotheticParams HomotheticParams::make(double gamma, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw BadParams("homothetic: rho must lie in [-1, 1]");
  return {gamma, rho, delta_exponent(gamma, rho)};
}

DualPoint invert_dual(const DualSurface& u, double t, double y, double x, double zeta_guess) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("dual inversion needs finite x > 0");
  if (!std::isfinite(zeta_guess)) zeta_guess = 0.0;
  const double log_x = std::log(x);

  // g(zeta) = log u - log x is decreasing in zeta.
  auto g = [&](double zeta, HarmonicJet& j) {
    j = u.jet(t, y, zeta);
    if (!(j.u > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::log(j.u) - log_x;
  };

  DualPoint out;
  HarmonicJet j;
  const double g0 = g(zeta_guess, j);
  if (std::isnan(g0)) throw DomainError("dual surface returned NaN");
  auto done = [&](double zeta) {
    out.zeta = zeta;
    out.v_tilde = std::exp(zeta);
    out.jet = j;
    return out;
  };
  if (g0 == 0.0) return done(zeta_guess);

  double lo = zeta_guess, hi = zeta_guess, g_lo = g0, g_hi = g0;
  double step = 1.0;
  for (int doublings = 0;; ++doublings) {
    if (doublings == 200) {
      std::ostringstream msg;
      msg << "cannot bracket x = " << x << " at (t, y) = (" << t << ", " << y << ")";
      throw OutOfRange(msg.str());
    }
    if (g0 > 0.0) {
      hi = lo + step;
      g_hi = g(hi, j);
      if (g_hi == 0.0) return done(hi);
      if (g_hi < 0.0) break;
      lo = hi;
      g_lo = g_hi;
    } else {
      lo = hi - step;
      g_lo = g(lo, j);
      if (g_lo == 0.0) return done(lo);
      if (g_lo > 0.0) break;
      hi = lo;
      g_hi = g_lo;
    }
    step *= 2.0;
  }

  // Safeguarded Newton on the bracket [lo, hi].
  double zeta = std::isfinite(g_lo) && std::isfinite(g_hi) ? lo - g_lo * (hi - lo) / (g_hi - g_lo)
                                                            : 0.5 * (lo + hi);
  if (!(zeta > lo && zeta < hi)) zeta = 0.5 * (lo + hi);
  double gz = 0.0;
  for (int it = 0; it < 400; ++it) {
    gz = g(zeta, j);
    out.iterations = it + 1;
    if (std::abs(gz) <= 2e-14) break;
    if (gz > 0.0) {
      lo = zeta;
    } else {
      hi = zeta;
    }
    const double slope = j.u_z / j.u;
    double next = zeta - gz / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (next == zeta || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(zeta))) {
      zeta = next;
      gz = g(zeta, j);
      break;
    }
    zeta = next;
  }
  return done(zeta);
}

double invert_dual_marginal(const DualSurface& u, double t, double y, double x) {
  return invert_dual(u, t, y, x).v_tilde;
}

namespace {

using Comp = std::array<double, 4>;  // V~, V~_t, V~_y, V~_yy

struct Integrand {
  const DualSurface& u;
  double t, y;
  mutable double guess = 0.0;

  // Components times s, as functions of v = log s.
  Comp operator()(double v) const {
    const double s = std::exp(v);
    const DualPoint p = invert_dual(u, t, y, s, guess);
    guess = p.zeta;
    const HarmonicJet& j = p.jet;
    const double zy = -j.u_y / j.u_z;
    const double zt = -j.u_t / j.u_z;
    const double zyy = -(j.u_yy + 2.0 * j.u_yz * zy + j.u_zz * zy * zy) / j.u_z;
    const double w = p.v_tilde * s;
    return {w, w * zt, w * zy, w * (zyy + zy * zy)};
  }

  double exponent(double v) const {
    const DualPoint p = invert_dual(u, t, y, std::exp(v), guess);
    guess = p.zeta;
    return p.jet.u / p.jet.u_z;
  }
};

struct Panel {
  double a, b;
  Comp value;
  Comp error;
};

Panel gk15(const Integrand& f, double a, double b) {
  static const auto& xk = boost::math::quadrature::gauss_kronrod<double, 15>::abscissa();
  static const auto& wk = boost::math::quadrature::gauss_kronrod<double, 15>::weights();
  static const auto& wg = boost::math::quadrature::gauss<double, 7>::weights();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Comp k{}, g{};
  const Comp f0 = f(c);
  for (int m = 0; m < 4; ++m) {
    k[m] = wk[0] * f0[m];
    g[m] = wg[0] * f0[m];
  }
  for (std::size_t i = 1; i < xk.size(); ++i) {
    const Comp fl = f(c - h * xk[i]);
    const Comp fr = f(c + h * xk[i]);
    for (int m = 0; m < 4; ++m) {
      k[m] += wk[i] * (fl[m] + fr[m]);
      if (i % 2 == 0) g[m] += wg[i / 2] * (fl[m] + fr[m]);
    }
  }
  Panel p{a, b, {}, {}};
  for (int m = 0; m < 4; ++m) {
    p.value[m] = h * k[m];
    p.error[m] = std::abs(h * (k[m] - g[m]));
  }
  return p;
}

constexpr double kQuadTol = 1e-10;

// Global adaptive refinement: split the panel with the worst normalized error
// until every component's summed error is below kQuadTol (1 + |total|).
Comp adaptive(const Integrand& f, double a, double b) {
  if (a == b) return {};
  std::vector<Panel> panels;
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / 2.0)));
  for (int i = 0; i < pieces; ++i)
    panels.push_back(gk15(f, a + (b - a) * i / pieces, a + (b - a) * (i + 1) / pieces));
  for (int round = 0; round < 4000; ++round) {
    Comp total{}, err{};
    for (const auto& p : panels) {
      for (int m = 0; m < 4; ++m) {
        total[m] += p.value[m];
        err[m] += p.error[m];
      }
    }
    bool done = true;
    for (int m = 0; m < 4; ++m) done = done && err[m] <= kQuadTol * (1.0 + std::abs(total[m]));
    if (done) return total;
    std::size_t worst = 0;
    double worst_score = -1.0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      double score = 0.0;
      for (int m = 0; m < 4; ++m) score = std::max(score, panels[i].error[m] / (1.0 + std::abs(total[m])));
      if (score > worst_score) {
        worst_score = score;
        worst = i;
      }
    }
    const Panel p = panels[worst];
    const double mid = 0.5 * (p.a + p.b);
    panels[worst] = gk15(f, p.a, mid);
    panels.push_back(gk15(f, mid, p.b));
  }
  throw Error("dual quadrature did not converge");
}

constexpr double kSplit = 1e-8;

}  // namespace

double dual_tail_exponent(const DualSurface& u, double t, double y) {
  Integrand f{u, t, y};
  f.exponent(std::log(kSplit));
  return f.exponent(std::log(1e-12));
}

DualValue integrate_to_value(const DualSurface& u, double t, double y, double x, Anchor anchor) {
  if (!(x > 0.0)) throw DomainError("integrate_to_value needs x > 0");
  Integrand f{u, t, y};
  DualValue out;
  out.anchor = anchor;
  const double log_x = std::log(x);
  Comp total{};

  if (anchor == Anchor::unit) {
    total = adaptive(f, 0.0, log_x);
    out.tail_exponent = std::numeric_limits<double>::quiet_NaN();
  } else {
    const double v_split = std::log(kSplit);
    double p = f.exponent(v_split);
    out.tail_exponent = p;
    if (p <= -1.0 + 1e-6) {
      std::ostringstream msg;
      msg << "V~ is not integrable at 0: local exponent " << p << " at s = " << kSplit;
      throw NonIntegrableAtZero(msg.str());
    }
    if (log_x > v_split) {
      total = adaptive(f, v_split, log_x);
    } else {
      total = adaptive(f, log_x - std::log(10.0), log_x);
    }
    double top = std::min(v_split, log_x - (log_x > v_split ? 0.0 : std::log(10.0)));

    // Decade panels below the split until the power law has settled.
    const double decade = std::log(10.0);
    double p_prev = p;
    for (int k = 0; k < 120 && top - decade > -650.0; ++k) {
      const Panel panel = gk15(f, top - decade, top);
      for (int m = 0; m < 4; ++m) total[m] += panel.value[m];
      top -= decade;
      p = f.exponent(top);
      bool small = true;
      for (int m = 0; m < 4; ++m)
        small = small && std::abs(panel.value[m]) <= 1e-3 * kQuadTol * (1.0 + std::abs(total[m]));
      if (small || (k >= 2 && std::abs(p - p_prev) <= 1e-12 * std::abs(p))) break;
      p_prev = p;
    }
    if (p <= -1.0 + 1e-6) throw NonIntegrableAtZero("V~ is not integrable at 0");
    // int_{-inf}^{top} c e^{(1+p) v} dv = f(top) / (1 + p).
    const Comp edge = f(top);
    for (int m = 0; m < 4; ++m) total[m] += edge[m] / (1.0 + p);
    out.tail_exponent = p;
  }

  const DualPoint at = invert_dual(u, t, y, x);
  const HarmonicJet& j = at.jet;
  const double zy = -j.u_y / j.u_z;
  out.jet.v = total[0];
  out.jet.v_t = total[1];
  out.jet.v_y = total[2];
  out.jet.v_yy = total[3];
  out.jet.v_x = at.v_tilde;
  out.jet.v_xx = at.v_tilde / j.u_z;
  out.jet.v_xy = at.v_tilde * zy;
  return out;
}

PerformanceSurface::PerformanceSurface(SurfaceTag tag, JetFn jet, JetFn marginal, int factor_index)
    : tag_(tag), jet_(std::move(jet)), marginal_(marginal ? std::move(marginal) : jet_),
      factor_index_(factor_index) {
  if (!jet_) throw BadParams("performance surface needs an evaluator");
  if (factor_index < 0 || factor_index >= kMaxDim) throw BadParams("factor index out of range");
}

PerformanceSurface dual_value_surface(DualSurface u, AnchorPolicy policy) {
  Anchor anchor = Anchor::zero;
  if (policy == AnchorPolicy::unit) {
    anchor = Anchor::unit;
  } else if (policy == AnchorPolicy::automatic) {
    if (dual_tail_exponent(u, 0.0, 0.0) <= -1.0 + 1e-6) anchor = Anchor::unit;
  }
  auto shared = std::make_shared<const DualSurface>(u);
  auto jet = [shared, anchor](double t, double y, double x) {
    return integrate_to_value(*shared, t, y, x, anchor).jet;
  };
  auto marginal = [shared](double t, double y, double x) {
    const DualPoint at = invert_dual(*shared, t, y, x);
    ValueJet v;
    v.v = std::numeric_limits<double>::quiet_NaN();
    v.v_x = at.v_tilde;
    v.v_xx = at.v_tilde / at.jet.u_z;
    v.v_xy = -at.v_tilde * at.jet.u_y / at.jet.u_z;
    return v;
  };
  PerformanceSurface s(SurfaceTag::dual_inversion, std::move(jet), std::move(marginal), 0);
  s.dual = std::move(u);
  s.anchor = anchor;
  s.description = anchor == Anchor::unit ? "dual_inversion (anchored V(t,y,1) = 0)" : "dual_inversion";
  return s;
}

PerformanceSurface homothetic_value(HarmonicFunction u, HomotheticParams params, int factor_index) {
  const double gamma = params.gamma, delta = params.delta;
  auto shared = std::make_shared<const HarmonicFunction>(u);
  auto jet = [shared, gamma, delta](double t, double y, double x) {
    const HarmonicJet h = shared->jet(t, y);
    if (!(h.u > 0.0)) throw DomainError("homothetic surface: u must be positive");
    const double xg = std::pow(x, gamma);
    const double ud = std::pow(h.u, delta);
    const double ry = h.u_y / h.u;
    const double base = xg / gamma * ud;  // V
    ValueJet v;
    v.v = base;
    v.v_t = base * delta * h.u_t / h.u;
    v.v_y = base * delta * ry;
    v.v_yy = base * delta * (h.u_yy / h.u + (delta - 1.0) * ry * ry);
    v.v_x = xg / x * ud;
    v.v_xx = (gamma - 1.0) * v.v_x / x;
    v.v_xy = v.v_x * delta * ry;
    return v;
  };
  PerformanceSurface s(SurfaceTag::homothetic, std::move(jet), {}, factor_index);
  s.harmonic = std::move(u);
  s.homothetic = params;
  s.description = "homothetic";
  return s;
}

}  // namespace fpp

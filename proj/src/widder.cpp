#include <fpp/errors.hpp>
#include <fpp/factor_model.hpp>
#include <fpp/widder.hpp>

#include <cmath>
#include <map>
#include <sstream>

namespace fpp {

HarmonicFunction::HarmonicFunction(HarmonicMode mode, JetFn jet, std::vector<SpectralAtom> atoms,
                                   std::string label)
    : mode_(mode),
      jet_(std::move(jet)),
      atoms_(std::make_shared<const std::vector<SpectralAtom>>(std::move(atoms))),
      label_(std::move(label)) {}

namespace {

void check_atom_list(const std::vector<SpectralAtom>& atoms) {
  if (atoms.empty()) throw BadParams("spectral measure has no atoms");
  if (atoms.size() > kMaxAtoms) throw BadParams("spectral measure exceeds the atom cap");
  for (const auto& a : atoms) {
    if (!(a.weight >= 0.0)) throw BadParams("atom weights must be non-negative");
  }
}

// Closed-form atoms collapse into a single exponential per term.
struct Term {
  double weight;
  double lambda;
  double theta;
  bool closed;
  double c1, c2;
  const MinimalSolution* psi;
};

HarmonicFunction spectral_sum(std::vector<SpectralAtom> atoms, HarmonicMode mode, std::string label) {
  auto shared = std::make_shared<const std::vector<SpectralAtom>>(atoms);
  std::vector<Term> terms;
  terms.reserve(shared->size());
  for (const auto& a : *shared) {
    if (a.weight == 0.0) continue;
    Term t{a.weight, a.lambda, a.theta.value_or(0.0), false, 0.0, 0.0, &a.psi};
    if (a.psi.closed_form()) {
      t.closed = true;
      t.c1 = a.psi.closed_form()->c1;
      t.c2 = a.psi.closed_form()->c2;
    }
    terms.push_back(t);
  }
  auto fn = [shared, terms = std::move(terms)](double t, double y, double z) {
    HarmonicJet j;
    for (const auto& term : terms) {
      double e, slope, curv;
      if (term.closed) {
        e = term.weight * std::exp(-term.lambda * t - term.theta * z + y * (term.c1 + term.c2 * y));
        slope = term.c1 + 2.0 * term.c2 * y;
        curv = slope * slope + 2.0 * term.c2;
        slope *= e;
        curv *= e;
      } else {
        const PsiValue p = (*term.psi)(y);
        const double scale = term.weight * std::exp(-term.lambda * t - term.theta * z);
        e = scale * p.value;
        slope = scale * p.first;
        curv = scale * p.second;
      }
      j.u += e;
      j.u_t -= term.lambda * e;
      j.u_y += slope;
      j.u_yy += curv;
      j.u_z -= term.theta * e;
      j.u_zz += term.theta * term.theta * e;
      j.u_yz -= term.theta * slope;
    }
    return j;
  };
  return HarmonicFunction(mode, std::move(fn), std::move(atoms), std::move(label));
}

}  // namespace

HarmonicFunction build_harmonic(std::vector<SpectralAtom> atoms, const EllipticOperator1D& op) {
  check_atom_list(atoms);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].theta) throw BadParams("build_harmonic: atoms must not carry theta");
    const double res = ode_residual(op, atoms[i].lambda, atoms[i].psi);
    if (!(res < kEllipticTolerance)) {
      std::ostringstream msg;
      msg << "atom " << i << " (lambda = " << atoms[i].lambda << ") fails the elliptic residual check: "
          << res;
      throw AtomInconsistent(i, msg.str());
    }
  }
  return spectral_sum(std::move(atoms), HarmonicMode::standard, "spectral");
}

HarmonicFunction assemble_unchecked(std::vector<SpectralAtom> atoms, HarmonicMode mode) {
  check_atom_list(atoms);
  return spectral_sum(std::move(atoms), mode, "unchecked");
}

HarmonicFunction classical_heat(std::vector<HeatAtom> atoms) {
  if (atoms.empty()) throw BadParams("classical_heat: no atoms");
  if (atoms.size() > kMaxAtoms) throw BadParams("classical_heat: too many atoms");
  for (const auto& a : atoms) {
    if (!(a.weight >= 0.0)) throw BadParams("classical_heat: weights must be non-negative");
  }
  auto fn = [atoms](double t, double y, double) {
    HarmonicJet j;
    for (const auto& a : atoms) {
      const double e = a.weight * std::exp(a.z * y - a.z * a.z * t);
      j.u += e;
      j.u_t -= a.z * a.z * e;
      j.u_y += a.z * e;
      j.u_yy += a.z * a.z * e;
    }
    return j;
  };
  return HarmonicFunction(HarmonicMode::standard, std::move(fn), {}, "widder_heat");
}

std::vector<HeatAtom> lambda_to_z_change_of_vars(std::span<const LambdaPairAtom> atoms) {
  // Atoms landing on the same z are merged; std::map keeps z ordered.
  std::map<double, double> merged;
  for (const auto& a : atoms) {
    if (a.lambda < 0.0) throw NegativeLambda("change of variables requires lambda >= 0");
    if (!(a.decreasing >= 0.0 && a.increasing >= 0.0))
      throw BadParams("change of variables requires non-negative weights");
    const double root = std::sqrt(a.lambda);
    if (a.decreasing > 0.0) merged[-root] += a.decreasing;
    if (a.increasing > 0.0) merged[root] += a.increasing;
  }
  std::vector<HeatAtom> out;
  out.reserve(merged.size());
  for (const auto& [z, w] : merged) out.push_back({z == 0.0 ? 0.0 : z, w});
  return out;
}

std::vector<SpectralAtom> heat_spectral_atoms(std::span<const LambdaPairAtom> atoms) {
  std::vector<SpectralAtom> out;
  for (const auto& a : atoms) {
    if (a.decreasing > 0.0)
      out.push_back({a.lambda, std::nullopt, a.decreasing, heat_fundamental(a.lambda, Direction::decreasing)});
    if (a.increasing > 0.0)
      out.push_back({a.lambda, std::nullopt, a.increasing, heat_fundamental(a.lambda, Direction::increasing)});
  }
  return out;
}

EllipticOperator1D DegenerateOperator::shifted(double theta) const {
  auto a_ = a;
  auto b_ = b;
  auto c_ = c;
  auto q_ = q;
  auto p_ = p;
  auto r_ = r;
  return {a_, [b_, q_, theta](double y) { return b_(y) - theta * q_(y); },
          [c_, p_, r_, theta](double y) { return c_(y) + theta * theta * p_(y) - theta * r_(y); }};
}

DegenerateOperator complete_market_operator(const FactorModel& model) {
  if (model.factors() != 1 || model.traded() != 1 || model.brownian() != 1)
    throw BadParams("complete_market_operator needs a one-factor traded model (n = k = d = 1)");
  auto sig = [model](double y) {
    Vec v(1);
    v[0] = y;
    return model.diffusion(v)(0, 0);
  };
  auto lam = [model](double y) {
    Vec v(1);
    v[0] = y;
    return market_price_of_risk(model, v)[0];
  };
  auto mu = [model](double y) {
    Vec v(1);
    v[0] = y;
    return model.drift(v)[0];
  };
  DegenerateOperator op;
  op.a = [sig](double y) { const double s = sig(y); return 0.5 * s * s; };
  op.q = [sig, lam](double y) { return -sig(y) * lam(y); };
  op.p = [lam](double y) { const double l = lam(y); return 0.5 * l * l; };
  op.b = [mu, sig, lam](double y) { return mu(y) - sig(y) * lam(y); };
  op.r = op.p;
  op.c = [](double) { return 0.0; };
  return op;
}

HarmonicFunction build_degenerate(std::vector<SpectralAtom> atoms, const DegenerateOperator& op) {
  check_atom_list(atoms);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (!atoms[i].theta) throw BadParams("build_degenerate: every atom needs a theta");
    const double res = ode_residual(op.shifted(*atoms[i].theta), atoms[i].lambda, atoms[i].psi);
    if (!(res < kEllipticTolerance)) {
      std::ostringstream msg;
      msg << "atom " << i << " (lambda = " << atoms[i].lambda << ", theta = " << *atoms[i].theta
          << ") fails the shifted elliptic residual check: " << res;
      throw AtomInconsistent(i, msg.str());
    }
  }
  return spectral_sum(std::move(atoms), HarmonicMode::degenerate, "spectral_degenerate");
}

namespace {

struct Bump {
  double value, first, second;
};

// exp(1 - 1/(1 - s^2)) on (-1, 1), zero outside.
Bump bump(double s) {
  if (std::abs(s) >= 1.0) return {0.0, 0.0, 0.0};
  const double w = 1.0 - s * s;
  const double phi = std::exp(1.0 - 1.0 / w);
  const double g1 = -2.0 * s / (w * w);
  const double g2 = -2.0 / (w * w) - 8.0 * s * s / (w * w * w);
  return {phi, g1 * phi, (g2 + g1 * g1) * phi};
}

}  // namespace

CounterexampleFixture counterexample_fixture(std::string_view name, TravelingWaveParams params) {
  if (name == "bs_traveling_wave") {
    const double sigma = params.sigma, lambda = params.lambda;
    if (!(sigma > 0.0)) throw BadParams("bs_traveling_wave: sigma must be positive");
    if (lambda == 0.0 || lambda == sigma)
      throw BadParams("bs_traveling_wave: lambda must differ from 0 and sigma");
    const double alpha = 0.5 * lambda * (lambda - sigma);
    const double beta = -lambda / sigma;
    auto fn = [alpha, beta](double t, double y, double z) {
      const Bump f = bump(alpha * t + beta * y - z);
      HarmonicJet j;
      j.u = f.value;
      j.u_t = alpha * f.first;
      j.u_y = beta * f.first;
      j.u_z = -f.first;
      j.u_yy = beta * beta * f.second;
      j.u_zz = f.second;
      j.u_yz = -beta * f.second;
      return j;
    };
    DegenerateOperator op;
    op.a = [sigma](double) { return 0.5 * sigma * sigma; };
    op.q = [sigma, lambda](double) { return -sigma * lambda; };
    op.p = [lambda](double) { return 0.5 * lambda * lambda; };
    op.b = [sigma](double) { return -0.5 * sigma * sigma; };
    op.r = op.p;
    op.c = [](double) { return 0.0; };
    return {HarmonicFunction(HarmonicMode::degenerate, std::move(fn), {}, "bs_traveling_wave"), op};
  }
  if (name == "kolmogorov") {
    auto fn = [](double t, double y, double z) {
      const double u = std::exp(3.0 * z - 3.0 * t * y - 3.0 * t * t * t);
      HarmonicJet j;
      j.u = u;
      j.u_t = (-3.0 * y - 9.0 * t * t) * u;
      j.u_y = -3.0 * t * u;
      j.u_yy = 9.0 * t * t * u;
      j.u_z = 3.0 * u;
      j.u_zz = 9.0 * u;
      j.u_yz = -9.0 * t * u;
      return j;
    };
    DegenerateOperator op;
    op.a = [](double) { return 1.0; };
    op.q = [](double) { return 0.0; };
    op.p = [](double) { return 0.0; };
    op.b = [](double) { return 0.0; };
    op.r = [](double y) { return y; };
    op.c = [](double) { return 0.0; };
    return {HarmonicFunction(HarmonicMode::degenerate, std::move(fn), {}, "kolmogorov"), op};
  }
  throw BadParams("unknown counterexample fixture '" + std::string(name) + "'");
}

}  // namespace fpp

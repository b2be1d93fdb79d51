#include <fpp/closed_form.hpp>
#include <fpp/control.hpp>
#include <fpp/errors.hpp>
#include <fpp/monte_carlo.hpp>
#include <fpp/pde_verify.hpp>
#include <fpp/scenario.hpp>

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace fpp;

namespace {

Vec to_vec(const std::vector<double>& v) {
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) throw DomainError("vector size out of range");
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

std::vector<double> from_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

py::dict jet_dict(const ValueJet& j) {
  py::dict d;
  d["v"] = j.v;
  d["v_t"] = j.v_t;
  d["v_x"] = j.v_x;
  d["v_xx"] = j.v_xx;
  d["v_y"] = j.v_y;
  d["v_xy"] = j.v_xy;
  d["v_yy"] = j.v_yy;
  return d;
}

py::dict jet_dict(const HarmonicJet& j) {
  py::dict d;
  d["u"] = j.u;
  d["u_t"] = j.u_t;
  d["u_y"] = j.u_y;
  d["u_yy"] = j.u_yy;
  d["u_z"] = j.u_z;
  d["u_zz"] = j.u_zz;
  d["u_yz"] = j.u_yz;
  return d;
}

py::dict report_dict(const ResidualReport& r) {
  py::dict d;
  d["equation"] = r.equation;
  d["max_abs_residual"] = r.max_abs_residual;
  d["argmax"] = py::make_tuple(r.argmax[0], r.argmax[1], r.argmax[2]);
  d["points"] = r.points;
  d["tolerance"] = r.tolerance;
  d["passed"] = r.pass;
  return d;
}

}  // namespace

PYBIND11_MODULE(fpp, m) {
  m.doc() = "Forward performance processes in factor form";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<BadParams>(m, "BadParams", error.ptr());
  py::register_exception<NoRiskPremiumSolution>(m, "NoRiskPremiumSolution", error.ptr());
  py::register_exception<PositivityLost>(m, "PositivityLost", error.ptr());
  py::register_exception<NegativeLambda>(m, "NegativeLambda", error.ptr());
  py::register_exception<AtomInconsistent>(m, "AtomInconsistent", error.ptr());
  py::register_exception<DegenerateDelta>(m, "DegenerateDelta", error.ptr());
  py::register_exception<OutOfRange>(m, "OutOfRange", error.ptr());
  py::register_exception<NonIntegrableAtZero>(m, "NonIntegrableAtZero", error.ptr());
  py::register_exception<NoRealBranch>(m, "NoRealBranch", error.ptr());
  py::register_exception<NotWellPosed>(m, "NotWellPosed", error.ptr());
  py::register_exception<SupportViolation>(m, "SupportViolation", error.ptr());
  py::register_exception<DegenerateSecondOrder>(m, "DegenerateSecondOrder", error.ptr());
  py::register_exception<ExplosionDetected>(m, "ExplosionDetected", error.ptr());
  py::register_exception<DomainError>(m, "DomainError", error.ptr());
  py::register_exception<ScenarioError>(m, "ScenarioError", error.ptr());

  py::enum_<Branch>(m, "Branch").value("plus", Branch::plus).value("minus", Branch::minus);

  py::class_<QuadExpCoeffs>(m, "QuadExpCoeffs")
      .def_readonly("c1", &QuadExpCoeffs::c1)
      .def_readonly("c2", &QuadExpCoeffs::c2)
      .def_readonly("lambda_", &QuadExpCoeffs::lambda)
      .def_readonly("branch", &QuadExpCoeffs::branch)
      .def("__repr__", [](const QuadExpCoeffs& c) {
        std::ostringstream s;
        s << "QuadExpCoeffs(c1=" << c.c1 << ", c2=" << c.c2 << ", lambda=" << c.lambda << ", " << to_string(c.branch)
          << ")";
        return s.str();
      });

  py::class_<ThetaAtom>(m, "ThetaAtom")
      .def(py::init([](double theta, double weight, Branch branch) { return ThetaAtom{theta, weight, branch}; }),
           py::arg("theta"), py::arg("weight") = 1.0, py::arg("branch") = Branch::minus)
      .def_readwrite("theta", &ThetaAtom::theta)
      .def_readwrite("weight", &ThetaAtom::weight)
      .def_readwrite("branch", &ThetaAtom::branch);

  py::class_<SchwartzParams>(m, "SchwartzParams")
      .def(py::init([](double a, double b, double sigma, std::optional<double> eta, std::vector<ThetaAtom> atoms) {
             return SchwartzParams{a, b, sigma, eta, std::move(atoms)};
           }),
           py::arg("a") = 0.0, py::arg("b") = 1.0, py::arg("sigma") = 1.0, py::arg("eta") = py::none(),
           py::arg("atoms") = std::vector<ThetaAtom>{})
      .def_readwrite("a", &SchwartzParams::a)
      .def_readwrite("b", &SchwartzParams::b)
      .def_readwrite("sigma", &SchwartzParams::sigma)
      .def_readwrite("eta", &SchwartzParams::eta)
      .def_readwrite("atoms", &SchwartzParams::atoms);

  py::class_<StochVolParams>(m, "StochVolParams")
      .def(py::init([](double a, double b, double sigma, double rho, double kappa, double mu, double gamma,
                       double nu_plus, double nu_minus) {
             return StochVolParams{a, b, sigma, rho, kappa, mu, gamma, nu_plus, nu_minus};
           }),
           py::arg("a") = 0.0, py::arg("b") = 1.0, py::arg("sigma") = 0.3, py::arg("rho") = 0.0,
           py::arg("kappa") = 0.3, py::arg("mu") = 0.0, py::arg("gamma") = 0.5, py::arg("nu_plus") = 0.0,
           py::arg("nu_minus") = 1.0)
      .def_readwrite("a", &StochVolParams::a)
      .def_readwrite("b", &StochVolParams::b)
      .def_readwrite("sigma", &StochVolParams::sigma)
      .def_readwrite("rho", &StochVolParams::rho)
      .def_readwrite("kappa", &StochVolParams::kappa)
      .def_readwrite("mu", &StochVolParams::mu)
      .def_readwrite("gamma", &StochVolParams::gamma)
      .def_readwrite("nu_plus", &StochVolParams::nu_plus)
      .def_readwrite("nu_minus", &StochVolParams::nu_minus);

  m.def("schwartz_coeffs", &schwartz_coeffs, py::arg("params"), py::arg("theta"), py::arg("branch"));
  m.def("check_schwartz_support", &check_schwartz_support, py::arg("params"));
  m.def("stochvol_coeffs", &stochvol_coeffs, py::arg("params"), py::arg("branch"));
  m.def("stochvol_wellposed", &stochvol_wellposed, py::arg("params"));
  m.def("stochvol_discriminant", &stochvol_discriminant, py::arg("params"));
  m.def("delta_exponent", &delta_exponent, py::arg("gamma"), py::arg("rho"));

  py::class_<FactorModel>(m, "FactorModel")
      .def_property_readonly("name", &FactorModel::name)
      .def_property_readonly("factors", &FactorModel::factors)
      .def_property_readonly("traded", &FactorModel::traded)
      .def_property_readonly("brownian", &FactorModel::brownian)
      .def("drift", [](const FactorModel& f, const std::vector<double>& y) { return from_vec(f.drift(to_vec(y))); })
      .def("market_price_of_risk", [](const FactorModel& f, const std::vector<double>& y) {
        return from_vec(market_price_of_risk(f, to_vec(y)));
      });
  m.def("schwartz_model", py::overload_cast<const SchwartzParams&>(&schwartz_model), py::arg("params"));
  m.def("stochvol_model", py::overload_cast<const StochVolParams&>(&stochvol_model), py::arg("params"));
  m.def("builtin_model", &make_builtin_model, py::arg("name"), py::arg("params"));

  py::class_<HarmonicFunction>(m, "HarmonicFunction")
      .def("__call__", [](const HarmonicFunction& u, double t, double y, double z) { return u(t, y, z); },
           py::arg("t"), py::arg("y"), py::arg("z") = 0.0)
      .def("jet", [](const HarmonicFunction& u, double t, double y, double z) { return jet_dict(u.jet(t, y, z)); },
           py::arg("t"), py::arg("y"), py::arg("z") = 0.0);

  m.def(
      "classical_heat",
      [](const std::vector<std::pair<double, double>>& atoms) {
        std::vector<HeatAtom> a;
        for (auto [z, w] : atoms) a.push_back({z, w});
        return classical_heat(std::move(a));
      },
      py::arg("atoms"), "u(t, y) = sum w exp(z y - z^2 t) over (z, w) pairs.");
  m.def(
      "heat_harmonic",
      [](const std::vector<std::tuple<double, double, double>>& atoms) {
        std::vector<LambdaPairAtom> a;
        for (auto [l, dec, inc] : atoms) a.push_back({l, dec, inc});
        return build_harmonic(heat_spectral_atoms(a), heat_operator());
      },
      py::arg("atoms"), "Spectral sum over (lambda, decreasing weight, increasing weight) triples.");
  m.def(
      "lambda_to_z",
      [](const std::vector<std::tuple<double, double, double>>& atoms) {
        std::vector<LambdaPairAtom> a;
        for (auto [l, dec, inc] : atoms) a.push_back({l, dec, inc});
        std::vector<std::pair<double, double>> out;
        for (const HeatAtom& h : lambda_to_z_change_of_vars(a)) out.emplace_back(h.z, h.weight);
        return out;
      },
      py::arg("atoms"));
  m.def(
      "heat_positive_solution",
      [](double lambda, double y_lo, double y_hi, double slope0) {
        const MinimalSolution psi = solve_positive_solution(heat_operator(), lambda, y_lo, y_hi, slope0);
        return py::make_tuple(psi.grid(), psi.values(), ode_residual(heat_operator(), lambda, psi));
      },
      py::arg("lambda_"), py::arg("y_lo"), py::arg("y_hi"), py::arg("slope0"),
      "Shooting solution of psi'' = lambda psi: (grid, values, residual).");

  py::class_<DualSurface>(m, "DualSurface")
      .def("__call__", &DualSurface::operator(), py::arg("t"), py::arg("y"), py::arg("z"))
      .def("jet", [](const DualSurface& u, double t, double y, double z) { return jet_dict(u.jet(t, y, z)); })
      .def("marginal", [](const DualSurface& u, double t, double y, double x) { return invert_dual_marginal(u, t, y, x); },
           py::arg("t"), py::arg("y"), py::arg("x"), "V~(t, y, x) by inverting u(t, y, .) at x.");
  m.def("schwartz_dual_surface", &schwartz_dual_surface, py::arg("params"));

  py::class_<PerformanceSurface>(m, "PerformanceSurface")
      .def("__call__", py::overload_cast<double, double, double>(&PerformanceSurface::operator(), py::const_),
           py::arg("t"), py::arg("y"), py::arg("x"))
      .def("jet", [](const PerformanceSurface& V, double t, double y, double x) { return jet_dict(V.jet(t, y, x)); })
      .def_property_readonly("factor_index", &PerformanceSurface::factor_index)
      .def_readonly("description", &PerformanceSurface::description);
  m.def("schwartz_value_surface", [](const SchwartzParams& p) { return schwartz_value_surface(p); },
        py::arg("params"));
  m.def("stochvol_value_surface", &stochvol_value_surface, py::arg("params"));

  m.def(
      "optimal_portfolio",
      [](const PerformanceSurface& V, const FactorModel& model, double t, const std::vector<double>& y, double x) {
        return from_vec(optimal_portfolio(V, model, t, to_vec(y), x));
      },
      py::arg("surface"), py::arg("model"), py::arg("t"), py::arg("y"), py::arg("x"));

  m.def(
      "hjb_residual",
      [](const PerformanceSurface& V, const FactorModel& model, const std::string& form, double tolerance) {
        HjbForm f;
        if (form == "complete")
          f = HjbForm::complete;
        else if (form == "homothetic_linearized")
          f = HjbForm::homothetic_linearized;
        else if (form == "dual_linearized")
          f = HjbForm::dual_linearized;
        else
          throw BadParams("unknown HJB form '" + form + "'");
        return report_dict(hjb_residual(V, model, GridSpec::standard(), f, tolerance));
      },
      py::arg("surface"), py::arg("model"), py::arg("form"), py::arg("tolerance") = 1e-8,
      "Residual report on the default grid.");

  m.def(
      "martingale_check",
      [](const PerformanceSurface& V, const FactorModel& model, const std::vector<double>& y0, double x0,
         std::size_t paths, int steps_per_unit, double t, std::uint64_t seed, double scale) {
        SimConfig c;
        c.paths = paths;
        c.steps_per_unit = steps_per_unit;
        c.horizon = t;
        c.seed = seed;
        c.scheme = model.ou_components().empty() ? Scheme::euler : Scheme::ou_exact;
        const PortfolioRule rule = PortfolioRule::scaled(optimal_rule(V, model), scale);
        PathEnsemble e;
        {
          py::gil_scoped_release release;
          e = simulate_paths(model, rule, to_vec(y0), x0, c);
        }
        const MCReport r = scale == 1.0 ? martingale_test(V, e, t, x0, to_vec(y0))
                                        : supermartingale_test(V, e, t, x0, to_vec(y0));
        py::dict d;
        d["estimate"] = r.estimate;
        d["std_error"] = r.std_error;
        d["reference"] = r.reference;
        d["z_score"] = r.z_score;
        d["verdict"] = to_string(r.verdict);
        return d;
      },
      py::arg("surface"), py::arg("model"), py::arg("y0"), py::arg("x0") = 1.0, py::arg("paths") = 10000,
      py::arg("steps_per_unit") = 64, py::arg("t") = 1.0, py::arg("seed") = 0, py::arg("scale") = 1.0,
      "Simulates scale * pi* and tests V(t, Y_t, X_t) against V(0, y0, x0).");

  m.def(
      "run",
      [](const std::string& command, const std::filesystem::path& scenario, std::optional<std::filesystem::path> out,
         std::optional<std::uint64_t> seed, std::optional<std::size_t> paths, std::optional<double> tolerance,
         std::optional<unsigned> threads) {
        Overrides o{out, seed, paths, tolerance, threads};
        std::ostringstream log, err;
        int rc;
        {
          py::gil_scoped_release release;
          rc = run_command(command, scenario, o, log, err);
        }
        return py::make_tuple(rc, log.str() + err.str());
      },
      py::arg("command"), py::arg("scenario"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
      py::arg("paths") = py::none(), py::arg("tolerance") = py::none(), py::arg("threads") = py::none(),
      "Runs a CLI subcommand in-process; returns (exit status, log).");
}

#include <fpp/control.hpp>
#include <fpp/scenario.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

namespace fpp {

struct Pipeline::Built {
  FactorModel model;
  PerformanceSurface surface;
  std::vector<SpectralAtom> atoms;
  std::vector<QuadExpCoeffs> coeffs;
  std::vector<EllipticOperator1D> ops;  // the operator each atom's psi solves
};

namespace {

MinimalSolution corrupted(const QuadExpCoeffs& c, double offset) {
  return MinimalSolution::quad_exp(c.lambda, {c.c1, c.c2 + offset});
}

std::shared_ptr<const Pipeline::Built> build_stochvol(const Scenario& s) {
  StochVolParams p = s.stochvol;
  p.nu_plus = p.nu_minus = 0.0;
  for (const AtomSpec& a : s.atoms) (a.branch == Branch::plus ? p.nu_plus : p.nu_minus) += a.weight;
  if (!(p.nu_plus + p.nu_minus > 0.0)) throw ScenarioError(s.file, s.atoms.front().line, "total atom weight must be positive");

  const QuadExpCoeffs plus = stochvol_coeffs(p, Branch::plus);
  const QuadExpCoeffs minus = stochvol_coeffs(p, Branch::minus);
  for (const AtomSpec& a : s.atoms) {
    if (!a.lambda) continue;
    const double derived = (a.branch == Branch::plus ? plus : minus).lambda;
    if (std::abs(*a.lambda - derived) > 1e-10 * (1.0 + std::abs(derived)))
      throw ScenarioError(s.file, a.line,
                          "atom lambda " + csv_number(*a.lambda) + " does not match the " + to_string(a.branch) +
                              " branch value " + csv_number(derived));
  }

  const EllipticOperator1D op = stochvol_operator(p);
  std::vector<SpectralAtom> atoms;
  std::vector<QuadExpCoeffs> coeffs;
  for (const auto& [c, w] : {std::pair{plus, p.nu_plus}, std::pair{minus, p.nu_minus}}) {
    if (w <= 0.0) continue;
    atoms.push_back({c.lambda, std::nullopt, w, corrupted(c, s.c2_offset)});
    coeffs.push_back(c);
    coeffs.back().c2 += s.c2_offset;
  }

  const std::size_t n = atoms.size();
  FactorModel model = stochvol_model(p);
  if (s.c2_offset == 0.0) {
    return std::make_shared<Pipeline::Built>(Pipeline::Built{
        std::move(model), stochvol_value_surface(p), std::move(atoms), std::move(coeffs), std::vector(n, op)});
  }
  const std::string label = "stochvol homothetic";
  HarmonicFunction u = assemble_unchecked(atoms, HarmonicMode::standard);
  PerformanceSurface V = homothetic_value(std::move(u), HomotheticParams::make(p.gamma, p.rho), 1);
  V.description = label + " (debug c2_offset " + std::to_string(s.c2_offset) + ")";
  return std::make_shared<Pipeline::Built>(
      Pipeline::Built{std::move(model), std::move(V), std::move(atoms), std::move(coeffs), std::vector(n, op)});
}

std::shared_ptr<const Pipeline::Built> build_schwartz(const Scenario& s) {
  SchwartzParams p = s.schwartz;
  p.atoms.clear();
  for (const AtomSpec& a : s.atoms) {
    p.atoms.push_back({*a.theta, a.weight, a.branch});
    SchwartzParams one = p;
    one.atoms = {p.atoms.back()};
    try {
      check_schwartz_support(one);
    } catch (const SupportViolation& e) {
      throw ScenarioError(s.file, a.line, e.what());
    }
  }
  check_schwartz_support(p);

  std::vector<SpectralAtom> atoms;
  std::vector<QuadExpCoeffs> coeffs;
  std::vector<EllipticOperator1D> ops;
  for (const ThetaAtom& a : p.atoms) {
    QuadExpCoeffs c = schwartz_coeffs(p, a.theta, a.branch);
    atoms.push_back({c.lambda, a.theta, a.weight, corrupted(c, s.c2_offset)});
    c.c2 += s.c2_offset;
    coeffs.push_back(c);
    ops.push_back(schwartz_shifted_operator(p, a.theta));
  }

  FactorModel model = schwartz_model(p);
  if (s.c2_offset == 0.0) {
    return std::make_shared<Pipeline::Built>(Pipeline::Built{
        std::move(model), schwartz_value_surface(p, s.anchor), std::move(atoms), std::move(coeffs), std::move(ops)});
  }
  const std::string label = "schwartz dual_inversion";
  PerformanceSurface V = dual_value_surface(DualSurface(assemble_unchecked(atoms, HarmonicMode::degenerate)), s.anchor);
  V.description = label + " (debug c2_offset " + std::to_string(s.c2_offset) + ")";
  return std::make_shared<Pipeline::Built>(
      Pipeline::Built{std::move(model), std::move(V), std::move(atoms), std::move(coeffs), std::move(ops)});
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

const char* pass_word(bool ok) { return ok ? "PASS" : "FAIL"; }

std::string safe_name(std::string s) {
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

}  // namespace

Pipeline::Pipeline(Scenario s) : s_(std::move(s)) {
  try {
    b_ = s_.model == "stochvol" ? build_stochvol(s_) : build_schwartz(s_);
  } catch (const ScenarioError&) {
    throw;
  } catch (const Error& e) {
    throw ScenarioError(s_.file, s_.model_line, e.what());
  }
}

const FactorModel& Pipeline::model() const noexcept { return b_->model; }
const PerformanceSurface& Pipeline::surface() const noexcept { return b_->surface; }

Vec Pipeline::full_y(double y) const {
  Vec v = Vec::Zero(b_->model.factors());
  v[b_->surface.factor_index()] = y;
  return v;
}

std::filesystem::path Pipeline::out(const std::string& file) const { return s_.out_dir / file; }

bool Pipeline::solve_elliptic(std::ostream& log) const {
  std::ofstream f = open_out(out("atoms.csv"));
  f << "index,lambda,theta,weight,psi_tag,c1,c2,ode_residual,shooting_deviation\n";
  bool ok = true;
  for (std::size_t i = 0; i < b_->atoms.size(); ++i) {
    const SpectralAtom& a = b_->atoms[i];
    const QuadExpCoeffs& c = b_->coeffs[i];
    const double res = ode_residual(b_->ops[i], a.lambda, a.psi);
    ok = ok && res < kCoeffTolerance;

    // Shooting is unstable for decaying solutions; the deviation is reported only.
    double dev = std::numeric_limits<double>::quiet_NaN();
    try {
      const MinimalSolution num = solve_positive_solution(b_->ops[i], a.lambda, -3.0, 3.0, c.c1);
      dev = 0.0;
      for (std::size_t k = 0; k < num.grid().size(); ++k) {
        const double exact = a.psi(num.grid()[k]).value;
        dev = std::max(dev, std::abs(num.values()[k] - exact) / exact);
      }
    } catch (const Error&) {
    }
    f << i << ',' << csv_number(a.lambda) << ',' << (a.theta ? csv_number(*a.theta) : "") << ','
      << csv_number(a.weight) << ',' << a.psi.tag() << ',' << csv_number(c.c1) << ',' << csv_number(c.c2) << ','
      << csv_number(res) << ',' << csv_number(dev) << '\n';
    log << "  atom " << i << ": lambda " << a.lambda << ", " << a.psi.tag() << ", ode residual " << res << '\n';
  }
  log << "solve-elliptic: " << pass_word(ok) << " (" << b_->atoms.size() << " atoms)\n";
  return ok;
}

bool Pipeline::build_surface(std::ostream& log) const {
  const PerformanceSurface& V = b_->surface;
  const GridSpec& g = s_.grid;
  std::ofstream vf = open_out(out("value_surface.csv"));
  std::ofstream pf = open_out(out("portfolio.csv"));
  vf << "t,y,x,V,V_x,V_xx\n";
  pf << "t,y,x,pi_star\n";
  std::size_t bad = 0;
  for (double t : g.t)
    for (double y : g.y)
      for (double x : g.x) {
        const ValueJet j = V.jet(t, y, x);
        if (!(j.v_x > 0.0 && j.v_xx < 0.0)) ++bad;
        vf << csv_number(t) << ',' << csv_number(y) << ',' << csv_number(x) << ',' << csv_number(j.v) << ','
           << csv_number(j.v_x) << ',' << csv_number(j.v_xx) << '\n';
        const Vec pi = optimal_portfolio(V, b_->model, t, full_y(y), x);
        pf << csv_number(t) << ',' << csv_number(y) << ',' << csv_number(x);
        for (int i = 0; i < pi.size(); ++i) pf << ',' << csv_number(pi[i]);
        pf << '\n';
      }
  log << "build-surface: " << pass_word(bad == 0) << " (" << V.description << "; " << bad
      << " probes violate V_x > 0, V_xx < 0)\n";
  return bad == 0;
}

bool Pipeline::verify(std::ostream& log) const {
  const PerformanceSurface& V = b_->surface;
  const double tol = s_.tolerance;
  nlohmann::json doc;
  doc["scenario"] = s_.name;
  doc["model"] = s_.model;
  doc["surface"] = V.description;
  doc["tolerance"] = tol;

  std::vector<ResidualReport> reports;
  if (V.tag() == SurfaceTag::homothetic) {
    reports.push_back(hjb_residual(V, b_->model, s_.grid, HjbForm::homothetic_linearized, tol, s_.partials));
    reports.push_back(hjb_residual(V, b_->model, s_.grid, HjbForm::complete, tol, s_.partials));
  } else {
    reports.push_back(hjb_residual(V, b_->model, s_.grid, HjbForm::dual_linearized, tol, s_.partials));
    if (V.anchor == Anchor::zero)
      reports.push_back(hjb_residual(V, b_->model, s_.grid, HjbForm::complete, tol, s_.partials));
    else
      doc["skipped"].push_back("hjb_complete: V is anchored at x = 1, which fixes V(t, y, 1) = 0");
  }

  bool ok = true;
  for (const ResidualReport& r : reports) {
    ok = ok && r.pass;
    doc["checks"].push_back(to_json(r));
    std::ofstream f = open_out(out("residual_" + safe_name(r.equation) + ".csv"));
    write_residual_csv(r, f);
    log << "  " << r.equation << ": max " << r.max_abs_residual << " over " << r.points << " points, "
        << pass_word(r.pass) << '\n';
  }

  if (s_.schwartz.eta && V.dual) {
    const AppendixReport a = appendix_bounds_check(*V.dual, *s_.schwartz.eta, s_.grid);
    ok = ok && a.pass;
    doc["dual_bounds"] = to_json(a);
    log << "  dual bounds: ratio [" << a.ratio_min << ", " << a.ratio_max << "], marginal [" << a.marginal_min
        << ", " << a.marginal_max << "], " << pass_word(a.pass) << '\n';
  }
  const HarmonicFunction& u = V.dual ? V.dual->harmonic() : *V.harmonic;
  doc["growth_constant"] = growth_constant(u, s_.grid);

  if (s_.argmax_probes > 0) {
    const GridSpec& g = s_.grid;
    nlohmann::json probes = nlohmann::json::array();
    bool all = true;
    double worst = 0.0;
    for (int i = 0; i < s_.argmax_probes; ++i) {
      const double t = g.t[i % g.t.size()];
      const double y = g.y[(7 * i + g.y.size() / 2) % g.y.size()];
      const double x = g.x[(13 * i + g.x.size() / 2) % g.x.size()];
      const Vec yv = full_y(y);
      const double pi = optimal_portfolio(V, b_->model, t, yv, x)[0];
      const double center = s_.argmax_step * std::round(pi / s_.argmax_step);
      const ArgmaxReport r = hamiltonian_argmax_check(V, b_->model, t, yv, x,
                                                      portfolio_grid(center, s_.argmax_step, 100), s_.argmax_step);
      all = all && r.within && r.exhaustive;
      worst = std::max(worst, r.distance);
      probes.push_back({{"t", t}, {"y", y}, {"x", x}, {"pi_star", r.pi_star[0]}, {"argmax", r.argmax[0]},
                        {"distance", r.distance}, {"within", r.within}});
    }
    ok = ok && all;
    doc["argmax"] = {{"step", s_.argmax_step}, {"max_distance", worst}, {"pass", all}, {"probes", probes}};
    log << "  hamiltonian argmax: max distance " << worst << ", " << pass_word(all) << '\n';
  }

  doc["pass"] = ok;
  std::ofstream f = open_out(out("residuals.json"));
  f << doc.dump(2) << '\n';
  log << "verify: " << pass_word(ok) << '\n';
  return ok;
}

bool Pipeline::simulate(std::ostream& log) const {
  if (!s_.simulate) {
    log << "simulate: skipped (simulation.enabled is false)\n";
    return true;
  }
  const PerformanceSurface& V = b_->surface;
  const PortfolioRule pi_star = optimal_rule(V, b_->model);
  const double reference = V(0.0, s_.y0, s_.x0);

  std::ofstream f = open_out(out("mc_report.csv"));
  f << "rule,scale,t,estimate,std_error,reference,z_score,samples,verdict\n";
  auto row = [&](const std::string& rule, double scale, const MCReport& r) {
    f << rule << ',' << csv_number(scale) << ',' << csv_number(r.t) << ',' << csv_number(r.estimate) << ','
      << csv_number(r.std_error) << ',' << csv_number(r.reference) << ',' << csv_number(r.z_score) << ','
      << r.samples << ',' << to_string(r.verdict) << '\n';
  };

  bool ok = true;
  const PathEnsemble ens = simulate_paths(b_->model, pi_star, s_.y0, s_.x0, s_.sim);
  for (double t : s_.sim.record_times) {
    const MCReport r = martingale_test(V, ens, t, s_.x0, s_.y0, reference);
    ok = ok && r.verdict == Verdict::martingale_consistent;
    row("pi_star", 1.0, r);
    log << "  pi_star t=" << t << ": z " << r.z_score << ", " << to_string(r.verdict) << '\n';
  }
  for (double c : s_.perturbations) {
    const PortfolioRule rule = PortfolioRule::scaled(pi_star, c);
    const PathEnsemble pe = simulate_paths(b_->model, rule, s_.y0, s_.x0, s_.sim);
    for (double t : s_.sim.record_times) {
      const MCReport r = supermartingale_test(V, pe, t, s_.x0, s_.y0, reference);
      ok = ok && r.verdict != Verdict::violation;
      row("scaled", c, r);
      log << "  " << c << " pi_star t=" << t << ": z " << r.z_score << ", " << to_string(r.verdict) << '\n';
    }
  }

  if (s_.dump_paths > 0) {
    SimConfig d = s_.sim;
    d.paths = std::min(s_.dump_paths, s_.sim.paths);
    d.record_all_steps = true;
    const PathEnsemble pe = simulate_paths(b_->model, pi_star, s_.y0, s_.x0, d);
    std::ofstream pf = open_out(out("paths.csv"));
    pf << "path,step,t";
    for (int i = 0; i < pe.factors; ++i) pf << ",y" << i;
    pf << ",x\n";
    for (std::size_t p = 0; p < pe.paths; ++p)
      for (std::size_t k = 0; k < pe.times.size(); ++k) {
        const Vec y = pe.y_at(p, k);
        pf << p << ',' << k << ',' << csv_number(pe.times[k]);
        for (int i = 0; i < y.size(); ++i) pf << ',' << csv_number(y[i]);
        pf << ',' << csv_number(pe.x_at(p, k)) << '\n';
      }
  }
  log << "simulate: " << pass_word(ok) << " (" << s_.sim.paths << " paths, seed " << s_.sim.seed << ")\n";
  return ok;
}

int run_command(const std::string& command, const std::filesystem::path& scenario, const Overrides& overrides,
                std::ostream& log, std::ostream& err) {
  static const char* const known[] = {"solve-elliptic", "build-surface", "verify", "simulate", "run"};
  if (std::find(std::begin(known), std::end(known), command) == std::end(known)) {
    err << "error: unknown command '" << command << "'\n";
    return 2;
  }
  try {
    Scenario s = load_scenario(scenario);
    apply_overrides(s, overrides);
    const Pipeline p(std::move(s));
    std::filesystem::create_directories(p.scenario().out_dir);
    bool ok = true;
    if (command == "solve-elliptic" || command == "run") ok = p.solve_elliptic(log) && ok;
    if (command == "build-surface" || command == "run") ok = p.build_surface(log) && ok;
    if (command == "verify" || command == "run") ok = p.verify(log) && ok;
    if (command == "simulate" || command == "run") ok = p.simulate(log) && ok;
    log << p.scenario().name << ": " << pass_word(ok) << '\n';
    return ok ? 0 : 1;
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fpp

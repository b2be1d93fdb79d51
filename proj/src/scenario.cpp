#include <fpp/scenario.hpp>

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fpp {

ScenarioError::ScenarioError(const std::string& file, int line, const std::string& what)
    : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

class Reader {
 public:
  explicit Reader(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    throw ScenarioError(file_, line(at), msg);
  }

  static int line(const YAML::Node& n) {
    if (!n.IsDefined() || n.Mark().is_null()) return 0;
    return n.Mark().line + 1;
  }

  void keys(const YAML::Node& map, const std::string& section, std::initializer_list<const char*> allowed) const {
    if (!map.IsMap()) fail(map, "section '" + section + "' must be a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : map) {
      const std::string k = kv.first.as<std::string>();
      if (!ok.count(k)) fail(kv.first, "unknown key '" + k + "' in section '" + section + "'");
    }
  }

  double number(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a number");
    try {
      const double v = n.as<double>();
      if (!std::isfinite(v)) fail(n, what + " must be finite");
      return v;
    } catch (const YAML::Exception&) {
      fail(n, what + " must be a number, got '" + n.Scalar() + "'");
    }
  }

  template <class Int>
  Int integer(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be an integer");
    try {
      return n.as<Int>();
    } catch (const YAML::Exception&) {
      fail(n, what + " must be a non-negative integer, got '" + n.Scalar() + "'");
    }
  }

  bool boolean(const YAML::Node& n, const std::string& what) const {
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, what + " must be true or false");
    }
  }

  std::string text(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a string");
    return n.Scalar();
  }

  std::vector<double> numbers(const YAML::Node& n, const std::string& what) const {
    if (n.IsScalar()) return {number(n, what)};
    if (!n.IsSequence()) fail(n, what + " must be a number or a list of numbers");
    std::vector<double> out;
    for (const auto& e : n) out.push_back(number(e, what));
    return out;
  }

  std::vector<double> axis(const YAML::Node& n, const std::string& name) const {
    std::vector<double> out;
    if (n.IsSequence()) {
      out = numbers(n, "grid." + name);
    } else {
      keys(n, "grid." + name, {"from", "to", "points", "spacing"});
      if (!n["from"] || !n["to"] || !n["points"]) fail(n, "grid." + name + " needs from, to and points");
      const double lo = number(n["from"], "grid." + name + ".from");
      const double hi = number(n["to"], "grid." + name + ".to");
      const auto pts = integer<std::size_t>(n["points"], "grid." + name + ".points");
      const std::string spacing = n["spacing"] ? text(n["spacing"], "spacing") : "linear";
      if (pts == 0) fail(n["points"], "grid." + name + ".points must be at least 1");
      if (spacing == "linear") {
        out = linspace(lo, hi, pts);
      } else if (spacing == "log") {
        if (!(lo > 0.0 && hi > 0.0)) fail(n, "log spacing needs positive end points");
        out = logspace(lo, hi, pts);
      } else {
        fail(n["spacing"], "spacing must be 'linear' or 'log'");
      }
    }
    if (out.empty()) fail(n, "grid." + name + " is empty");
    if (!std::is_sorted(out.begin(), out.end())) fail(n, "grid." + name + " must be increasing");
    return out;
  }

  Branch branch(const YAML::Node& n) const {
    const std::string b = text(n, "branch");
    if (b == "plus") return Branch::plus;
    if (b == "minus") return Branch::minus;
    fail(n, "branch must be 'plus' or 'minus', got '" + b + "'");
  }

 private:
  std::string file_;
};

void parse_model(const Reader& rd, const YAML::Node& m, Scenario& s) {
  if (!m) throw ScenarioError(s.file, 0, "missing section 'model'");
  if (!m.IsMap() || !m["name"]) rd.fail(m, "section 'model' needs a 'name' (schwartz or stochvol)");
  s.model_line = Reader::line(m);
  s.model = rd.text(m["name"], "model.name");
  auto get = [&](const char* k, double& dst) {
    if (m[k]) dst = rd.number(m[k], std::string("model.") + k);
  };
  if (s.model == "schwartz") {
    rd.keys(m, "model", {"name", "a", "b", "sigma"});
    get("a", s.schwartz.a);
    get("b", s.schwartz.b);
    get("sigma", s.schwartz.sigma);
    s.transform = SurfaceTag::dual_inversion;
  } else if (s.model == "stochvol") {
    rd.keys(m, "model", {"name", "a", "b", "sigma", "rho", "kappa", "mu", "gamma"});
    get("a", s.stochvol.a);
    get("b", s.stochvol.b);
    get("sigma", s.stochvol.sigma);
    get("rho", s.stochvol.rho);
    get("kappa", s.stochvol.kappa);
    get("mu", s.stochvol.mu);
    get("gamma", s.stochvol.gamma);
    s.transform = SurfaceTag::homothetic;
  } else {
    rd.fail(m["name"], "unknown model '" + s.model + "' (expected schwartz or stochvol)");
  }
}

void parse_measure(const Reader& rd, const YAML::Node& m, Scenario& s) {
  if (!m) throw ScenarioError(s.file, 0, "missing section 'measure'");
  rd.keys(m, "measure", {"eta", "atoms"});
  if (m["eta"]) {
    if (s.model != "schwartz") rd.fail(m["eta"], "measure.eta applies to the schwartz model only");
    s.schwartz.eta = rd.number(m["eta"], "measure.eta");
  }
  const YAML::Node atoms = m["atoms"];
  if (!atoms || !atoms.IsSequence() || atoms.size() == 0) rd.fail(m, "measure.atoms must be a non-empty list");
  for (const auto& a : atoms) {
    rd.keys(a, "measure.atoms", {"theta", "lambda", "weight", "branch"});
    AtomSpec spec;
    spec.line = Reader::line(a);
    if (a["theta"]) spec.theta = rd.number(a["theta"], "theta");
    if (a["lambda"]) spec.lambda = rd.number(a["lambda"], "lambda");
    if (a["weight"]) spec.weight = rd.number(a["weight"], "weight");
    if (a["branch"]) spec.branch = rd.branch(a["branch"]);
    if (spec.weight < 0.0) rd.fail(a, "atom weight must be non-negative");
    if (s.model == "schwartz" && !spec.theta) rd.fail(a, "schwartz atoms need theta");
    if (s.model == "stochvol" && spec.theta) rd.fail(a, "stochvol atoms take lambda, not theta");
    s.atoms.push_back(spec);
  }
}

void parse_grid(const Reader& rd, const YAML::Node& g, Scenario& s) {
  s.grid = GridSpec::standard();
  if (!g) return;
  rd.keys(g, "grid", {"t", "y", "z", "x", "steps"});
  if (g["t"]) s.grid.t = rd.axis(g["t"], "t");
  if (g["y"]) s.grid.y = rd.axis(g["y"], "y");
  if (g["z"]) s.grid.z = rd.axis(g["z"], "z");
  if (g["x"]) s.grid.x = rd.axis(g["x"], "x");
  if (s.grid.x.front() <= 0.0) rd.fail(g["x"], "grid.x must be positive");
  if (const YAML::Node st = g["steps"]) {
    rd.keys(st, "grid.steps", {"t", "y", "z", "x"});
    auto step = [&](const char* k, double& dst) {
      if (!st[k]) return;
      dst = rd.number(st[k], std::string("grid.steps.") + k);
      if (!(dst > 0.0)) rd.fail(st[k], "finite-difference steps must be positive");
    };
    step("t", s.grid.h_t);
    step("y", s.grid.h_y);
    step("z", s.grid.h_z);
    step("x", s.grid.h_x);
  }
}

void parse_verify(const Reader& rd, const YAML::Node& v, Scenario& s) {
  if (!v) return;
  rd.keys(v, "verify", {"tolerance", "partials", "argmax_probes", "argmax_step"});
  if (v["tolerance"]) s.tolerance = rd.number(v["tolerance"], "verify.tolerance");
  if (!(s.tolerance > 0.0)) rd.fail(v["tolerance"], "verify.tolerance must be positive");
  if (v["partials"]) {
    const std::string p = rd.text(v["partials"], "verify.partials");
    if (p == "analytic") s.partials = Partials::analytic;
    else if (p == "finite-difference") s.partials = Partials::finite_difference;
    else rd.fail(v["partials"], "verify.partials must be 'analytic' or 'finite-difference'");
  }
  if (v["argmax_probes"]) s.argmax_probes = rd.integer<int>(v["argmax_probes"], "verify.argmax_probes");
  if (v["argmax_step"]) s.argmax_step = rd.number(v["argmax_step"], "verify.argmax_step");
  if (s.argmax_probes < 0) rd.fail(v["argmax_probes"], "verify.argmax_probes must be non-negative");
  if (!(s.argmax_step > 0.0)) rd.fail(v["argmax_step"], "verify.argmax_step must be positive");
}

void parse_simulation(const Reader& rd, const YAML::Node& m, Scenario& s) {
  const int n = s.model == "stochvol" ? 2 : 1;
  s.y0 = Vec::Zero(n);
  if (!m) {
    s.sim.record_times = {s.sim.horizon};
    return;
  }
  rd.keys(m, "simulation",
          {"enabled", "paths", "steps_per_unit", "horizon", "seed", "scheme", "antithetic", "threads", "record_times",
           "y0", "x0", "perturbations", "dump_paths"});
  SimConfig& c = s.sim;
  if (m["enabled"]) s.simulate = rd.boolean(m["enabled"], "simulation.enabled");
  if (m["paths"]) c.paths = rd.integer<std::size_t>(m["paths"], "simulation.paths");
  if (m["steps_per_unit"]) c.steps_per_unit = rd.integer<int>(m["steps_per_unit"], "simulation.steps_per_unit");
  if (m["horizon"]) c.horizon = rd.number(m["horizon"], "simulation.horizon");
  if (m["seed"]) c.seed = rd.integer<std::uint64_t>(m["seed"], "simulation.seed");
  if (m["threads"]) c.threads = rd.integer<unsigned>(m["threads"], "simulation.threads");
  if (m["antithetic"]) c.antithetic = rd.boolean(m["antithetic"], "simulation.antithetic");
  if (m["scheme"]) {
    const std::string sc = rd.text(m["scheme"], "simulation.scheme");
    if (sc == "euler") c.scheme = Scheme::euler;
    else if (sc == "ou-exact") c.scheme = Scheme::ou_exact;
    else rd.fail(m["scheme"], "simulation.scheme must be 'euler' or 'ou-exact'");
  }
  if (c.paths == 0) rd.fail(m["paths"], "simulation.paths must be at least 1");
  if (c.steps_per_unit < 1) rd.fail(m["steps_per_unit"], "simulation.steps_per_unit must be at least 1");
  if (!(c.horizon > 0.0)) rd.fail(m["horizon"], "simulation.horizon must be positive");
  c.record_times = m["record_times"] ? rd.numbers(m["record_times"], "simulation.record_times")
                                     : std::vector<double>{c.horizon};
  for (double t : c.record_times) {
    const double k = t * c.steps_per_unit;
    if (!(t > 0.0 && t <= c.horizon) || std::abs(k - std::round(k)) > 1e-9)
      rd.fail(m["record_times"], "record time " + csv_number(t) + " is not a step of the simulation grid");
  }
  if (m["y0"]) {
    const std::vector<double> y = rd.numbers(m["y0"], "simulation.y0");
    if (static_cast<int>(y.size()) != n)
      rd.fail(m["y0"], "simulation.y0 needs " + std::to_string(n) + " component(s) for model " + s.model);
    for (int i = 0; i < n; ++i) s.y0[i] = y[i];
  }
  if (m["x0"]) s.x0 = rd.number(m["x0"], "simulation.x0");
  if (!(s.x0 > 0.0)) rd.fail(m["x0"], "simulation.x0 must be positive");
  if (m["perturbations"]) s.perturbations = rd.numbers(m["perturbations"], "simulation.perturbations");
  if (m["dump_paths"]) s.dump_paths = rd.integer<std::size_t>(m["dump_paths"], "simulation.dump_paths");
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& file) {
  Reader rd(file);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(file, e.mark.line + 1, "malformed scenario: " + e.msg);
  }
  if (!root.IsMap()) throw ScenarioError(file, 1, "scenario must be a mapping of sections");
  rd.keys(root, "<top level>",
          {"name", "model", "measure", "transform", "anchor", "grid", "verify", "simulation", "output", "debug"});

  Scenario s;
  s.file = file;
  s.name = root["name"] ? rd.text(root["name"], "name") : std::filesystem::path(file).stem().string();
  parse_model(rd, root["model"], s);
  parse_measure(rd, root["measure"], s);

  if (const YAML::Node t = root["transform"]) {
    const std::string v = rd.text(t, "transform");
    if (v == "homothetic") s.transform = SurfaceTag::homothetic;
    else if (v == "dual-inversion") s.transform = SurfaceTag::dual_inversion;
    else rd.fail(t, "transform must be 'homothetic' or 'dual-inversion'");
    if (s.model == "schwartz" && s.transform != SurfaceTag::dual_inversion)
      rd.fail(t, "the schwartz model supports only the dual-inversion transform");
    if (s.model == "stochvol" && s.transform != SurfaceTag::homothetic)
      rd.fail(t, "the stochvol model supports only the homothetic transform");
  }
  if (const YAML::Node a = root["anchor"]) {
    const std::string v = rd.text(a, "anchor");
    if (v == "automatic") s.anchor = AnchorPolicy::automatic;
    else if (v == "zero") s.anchor = AnchorPolicy::zero;
    else if (v == "unit") s.anchor = AnchorPolicy::unit;
    else rd.fail(a, "anchor must be 'automatic', 'zero' or 'unit'");
  }

  parse_grid(rd, root["grid"], s);
  parse_verify(rd, root["verify"], s);
  parse_simulation(rd, root["simulation"], s);

  s.out_dir = std::filesystem::path("out") / s.name;
  if (const YAML::Node o = root["output"]) {
    rd.keys(o, "output", {"dir"});
    if (o["dir"]) s.out_dir = rd.text(o["dir"], "output.dir");
  }
  if (const YAML::Node d = root["debug"]) {
    rd.keys(d, "debug", {"c2_offset"});
    if (d["c2_offset"]) s.c2_offset = rd.number(d["c2_offset"], "debug.c2_offset");
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), 0, "cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

void apply_overrides(Scenario& s, const Overrides& o) {
  if (o.out) s.out_dir = *o.out;
  if (o.seed) s.sim.seed = *o.seed;
  if (o.paths) {
    if (*o.paths == 0) throw ScenarioError(s.file, 0, "--paths must be at least 1");
    s.sim.paths = *o.paths;
  }
  if (o.tolerance) {
    if (!(*o.tolerance > 0.0)) throw ScenarioError(s.file, 0, "--tolerance must be positive");
    s.tolerance = *o.tolerance;
  }
  if (o.threads) s.sim.threads = *o.threads;
}

}  // namespace fpp

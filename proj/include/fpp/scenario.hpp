#pragma once

#include <fpp/closed_form.hpp>
#include <fpp/errors.hpp>
#include <fpp/monte_carlo.hpp>
#include <fpp/pde_verify.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fpp {

/// Parse or validation failure, anchored to a line of the scenario file.
class ScenarioError : public Error {
 public:
  ScenarioError(const std::string& file, int line, const std::string& what);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

struct AtomSpec {
  std::optional<double> theta;
  std::optional<double> lambda;
  double weight = 1.0;
  Branch branch = Branch::minus;
  int line = 0;
};

struct Scenario {
  std::string file;
  std::string name;

  std::string model;  // "schwartz" or "stochvol"
  SchwartzParams schwartz;
  StochVolParams stochvol;
  std::vector<AtomSpec> atoms;
  SurfaceTag transform = SurfaceTag::homothetic;
  AnchorPolicy anchor = AnchorPolicy::automatic;

  GridSpec grid;
  double tolerance = 1e-8;
  Partials partials = Partials::analytic;
  int argmax_probes = 10;
  double argmax_step = 0.01;

  bool simulate = true;
  SimConfig sim;
  Vec y0;
  double x0 = 1.0;
  std::vector<double> perturbations{0.0, 0.5, 2.0};  // multiples of pi*
  std::size_t dump_paths = 0;

  std::filesystem::path out_dir;
  double c2_offset = 0.0;  // debug: corrupts every atom's C2

  int model_line = 0;
};

/// Throws ScenarioError on malformed YAML, unknown keys or invalid values.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text, const std::string& file);

/// Command-line overrides applied on top of the file.
struct Overrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<double> tolerance;
  std::optional<unsigned> threads;
};

void apply_overrides(Scenario& s, const Overrides& o);

/// Model, surface and optimal rule built from a scenario. Construction
/// failures (e.g. non-wellposed parameters) are rethrown as ScenarioError
/// anchored at the model section.
class Pipeline {
 public:
  explicit Pipeline(Scenario s);

  const Scenario& scenario() const noexcept { return s_; }
  const FactorModel& model() const noexcept;
  const PerformanceSurface& surface() const noexcept;

  /// atoms.csv: index, lambda, theta, weight, psi_tag, c1, c2, ode_residual,
  /// shooting_deviation (RK4 re-solve from psi'(0) against the closed form).
  bool solve_elliptic(std::ostream& log) const;
  /// value_surface.csv and portfolio.csv over (t, y, x); fails unless
  /// V_x > 0 and V_xx < 0 everywhere.
  bool build_surface(std::ostream& log) const;
  /// residuals.json plus one residual grid CSV per equation.
  bool verify(std::ostream& log) const;
  /// mc_report.csv and, when requested, paths.csv.
  bool simulate(std::ostream& log) const;

  struct Built;

 private:
  Vec full_y(double y) const;
  std::filesystem::path out(const std::string& file) const;

  Scenario s_;
  std::shared_ptr<const Built> b_;
};

/// Runs one subcommand ("solve-elliptic", "build-surface", "verify",
/// "simulate" or "run"). Returns 0 on success, 1 if a check failed, 2 on
/// scenario errors.
int run_command(const std::string& command, const std::filesystem::path& scenario, const Overrides& overrides,
                std::ostream& log, std::ostream& err);

}  // namespace fpp

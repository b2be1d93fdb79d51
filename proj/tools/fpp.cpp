#include <fpp/scenario.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"fpp: forward performance processes in factor form"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double tolerance = 0.0;
  unsigned threads = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"solve-elliptic", "Certify the minimal solutions of every atom (atoms.csv)"},
      {"build-surface", "Tabulate V and pi* over the grid (value_surface.csv, portfolio.csv)"},
      {"verify", "PDE residuals, dual ratio bounds and Hamiltonian argmax (residuals.json)"},
      {"simulate", "Monte Carlo martingale and supermartingale tests (mc_report.csv)"},
      {"run", "Full pipeline"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario, "Scenario file (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "Simulation seed");
    sub->add_option("--paths", paths, "Number of Monte Carlo paths")->check(CLI::PositiveNumber);
    sub->add_option("--tolerance", tolerance, "Residual tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "Simulation worker threads (0 = all cores)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  fpp::Overrides o;
  if (sub->count("--out")) o.out = out;
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--paths")) o.paths = paths;
  if (sub->count("--tolerance")) o.tolerance = tolerance;
  if (sub->count("--threads")) o.threads = threads;
  return fpp::run_command(sub->get_name(), scenario, o, std::cout, std::cerr);
}

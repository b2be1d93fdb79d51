#pragma once

#include <fpp/duality.hpp>
#include <fpp/factor_model.hpp>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fpp {

/// Philox4x32-10 counter-based generator as a 32-bit URBG. The key is the
/// 64-bit seed; the counter holds (block lo, block hi, stream lo, stream hi),
/// so every (seed, stream) pair owns an independent sequence.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// The raw bijection, exposed for known-answer tests.
  static Block encrypt(Block counter, std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  Block counter_;
  Block buffer_{};
  int used_ = 4;
};

enum class Scheme { euler, ou_exact };

struct SimConfig {
  std::size_t paths = 10000;
  int steps_per_unit = 512;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::euler;
  bool antithetic = false;      // paths 2i and 2i+1 use negated increments
  unsigned threads = 1;         // 0 = hardware concurrency
  std::vector<double> record_times;  // empty = {horizon}; must sit on the step grid
  bool record_all_steps = false;     // overrides record_times
};

/// Snapshots of (Y, log X) at the recorded times; t = 0 is always index 0.
struct PathEnsemble {
  SimConfig config;
  int factors = 0;
  std::size_t paths = 0;
  double step = 0.0;
  std::vector<double> times;
  std::vector<double> y;      // [path][time][factor]
  std::vector<double> log_x;  // [path][time]

  std::size_t time_index(double t) const;  // throws DomainError if t was not recorded
  Vec y_at(std::size_t path, std::size_t time) const;
  double x_at(std::size_t path, std::size_t time) const;
};

/// Euler-Maruyama on log X and Y; Scheme::ou_exact replaces the Euler update
/// of the model's first OU component by its exact Gaussian transition.
/// Throws ExplosionDetected if |log X| or |Y| exceeds 1e6.
PathEnsemble simulate_paths(const FactorModel& model, const PortfolioRule& rule, const Vec& y0, double x0,
                            const SimConfig& config);

enum class Verdict { martingale_consistent, supermartingale_consistent, violation };

const char* to_string(Verdict v);

struct MCReport {
  double t = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double reference = 0.0;
  double z_score = 0.0;
  std::size_t samples = 0;  // independent samples (pairs under antithetic sampling)
  Verdict verdict = Verdict::violation;
};

/// Mean of V(t, Y_t, X_t) over the ensemble against V(0, y0, x0) (or the
/// override). Martingale-consistent iff |mean - reference| <= 3 stderr.
MCReport martingale_test(const PerformanceSurface& V, const PathEnsemble& ensemble, double t, double x0,
                         const Vec& y0, std::optional<double> reference = std::nullopt);

/// Supermartingale-consistent iff mean <= reference + 3 stderr.
MCReport supermartingale_test(const PerformanceSurface& V, const PathEnsemble& ensemble, double t,
                              double x0, const Vec& y0, std::optional<double> reference = std::nullopt);

/// Sample mean and standard error of V(t, Y_t, X_t); evaluation may run on
/// several threads, the reduction is in path order.
MCReport ensemble_mean(const PerformanceSurface& V, const PathEnsemble& ensemble, double t);

}  // namespace fpp

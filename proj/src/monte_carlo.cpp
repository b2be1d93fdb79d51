#include <fpp/errors.hpp>
#include <fpp/monte_carlo.hpp>

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace fpp {

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

Philox4x32::Block Philox4x32::encrypt(Block c, std::array<std::uint32_t, 2> k) {
  constexpr std::uint64_t m0 = 0xD2511F53, m1 = 0xCD9E8D57;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = m0 * c[0];
    const std::uint64_t p1 = m1 * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    k[0] += 0x9E3779B9;
    k[1] += 0xBB67AE85;
  }
  return c;
}

Philox4x32::result_type Philox4x32::operator()() {
  if (used_ == 4) {
    buffer_ = encrypt(counter_, key_);
    if (++counter_[0] == 0) ++counter_[1];
    used_ = 0;
  }
  return buffer_[used_++];
}

std::size_t PathEnsemble::time_index(double t) const {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return i;
  }
  std::ostringstream msg;
  msg << "time " << t << " was not recorded by the ensemble";
  throw DomainError(msg.str());
}

Vec PathEnsemble::y_at(std::size_t path, std::size_t time) const {
  Vec v(factors);
  const double* p = &y[(path * times.size() + time) * factors];
  for (int i = 0; i < factors; ++i) v[i] = p[i];
  return v;
}

double PathEnsemble::x_at(std::size_t path, std::size_t time) const {
  return std::exp(log_x[path * times.size() + time]);
}

namespace {

constexpr double kExplosion = 1e6;

unsigned resolve_threads(unsigned requested, std::size_t work) {
  unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(work, 1)));
}

// Runs body(begin, end) over contiguous chunks; rethrows the exception of the
// lowest failing chunk so failures do not depend on scheduling.
template <class Body>
void parallel_chunks(std::size_t count, unsigned threads, Body body) {
  threads = resolve_threads(threads, count);
  if (threads == 1) {
    body(std::size_t{0}, count);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < threads; ++i) {
    const std::size_t begin = count * i / threads, end = count * (i + 1) / threads;
    pool.emplace_back([&, i, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Sim {
  const FactorModel& model;
  const PortfolioRule& rule;
  Vec y0;
  double log_x0;
  int steps;
  double h;
  Scheme scheme;
  bool antithetic;
  std::uint64_t seed;
  std::vector<int> record;  // record slot per step index, -1 if none
  std::size_t slots;

  // Exact OU component.
  int ou_index = -1;
  double ou_decay = 0.0, ou_mean_shift = 0.0, ou_cov = 0.0, ou_cond_sd = 0.0;

  void run(std::size_t path, double* y_out, double* lx_out) const {
    const int n = model.factors(), k = model.traded(), d = model.brownian();
    const std::uint64_t stream = antithetic ? path / 2 : path;
    const double sign = antithetic && (path % 2 == 1) ? -1.0 : 1.0;
    Philox4x32 rng(seed, stream);
    boost::random::normal_distribution<double> normal;

    Vec y = y0, mu(n), tilde(k), lambda, pi, exposure, dw(d), ou_noise(d);
    Mat sigma(d, n);
    double lx = log_x0;
    const double sqrt_h = std::sqrt(h);

    auto store = [&](int slot) {
      for (int i = 0; i < n; ++i) y_out[slot * n + i] = y[i];
      lx_out[slot] = lx;
    };
    store(0);
    for (int s = 0; s < steps; ++s) {
      const double t = s * h;
      model.drift(y, mu);
      model.diffusion(y, sigma);
      for (int i = 0; i < k; ++i) tilde[i] = mu[i] + 0.5 * sigma.col(i).squaredNorm();
      lambda = market_price_of_risk(sigma, tilde, k);
      pi = rule(t, y, std::exp(lx), sigma, lambda);
      exposure = sigma.leftCols(k) * pi;

      for (int j = 0; j < d; ++j) dw[j] = sign * normal(rng);
      if (ou_index >= 0) {
        for (int j = 0; j < d; ++j) ou_noise[j] = ou_cov * dw[j] + ou_cond_sd * sign * normal(rng);
      }
      dw *= sqrt_h;

      lx += (exposure.dot(lambda) - 0.5 * exposure.squaredNorm()) * h + exposure.dot(dw);
      const double y_ou = ou_index >= 0 ? y[ou_index] : 0.0;
      y += mu * h + sigma.transpose() * dw;
      if (ou_index >= 0) y[ou_index] = y_ou * ou_decay + ou_mean_shift + sigma.col(ou_index).dot(ou_noise);

      if (!(std::abs(lx) <= kExplosion) || !(y.cwiseAbs().maxCoeff() <= kExplosion)) {
        std::ostringstream msg;
        msg << "path " << path << " exploded at t = " << (s + 1) * h << " (log X = " << lx << ")";
        throw ExplosionDetected(msg.str());
      }
      if (record[s + 1] >= 0) store(record[s + 1]);
    }
  }
};

}  // namespace

PathEnsemble simulate_paths(const FactorModel& model, const PortfolioRule& rule, const Vec& y0, double x0,
                            const SimConfig& config) {
  if (!(x0 > 0.0)) throw DomainError("initial wealth must be positive");
  if (y0.size() != model.factors()) throw DomainError("initial factor has the wrong dimension");
  if (config.paths < 1) throw BadParams("simulation needs at least one path");
  if (config.steps_per_unit < 1) throw BadParams("steps per unit time must be positive");
  if (!(config.horizon > 0.0)) throw BadParams("horizon must be positive");
  if (config.antithetic && config.paths % 2 != 0) throw BadParams("antithetic sampling needs an even path count");
  if (!rule) throw BadParams("simulation needs a portfolio rule");

  const int steps = std::max(1, static_cast<int>(std::ceil(config.horizon * config.steps_per_unit - 1e-9)));
  const double h = config.horizon / steps;

  PathEnsemble ens;
  ens.config = config;
  ens.factors = model.factors();
  ens.paths = config.paths;
  ens.step = h;

  std::vector<int> record(steps + 1, -1);
  record[0] = 0;
  ens.times.push_back(0.0);
  if (config.record_all_steps) {
    for (int s = 1; s <= steps; ++s) {
      record[s] = s;
      ens.times.push_back(s * h);
    }
  } else {
    std::vector<double> wanted = config.record_times.empty() ? std::vector<double>{config.horizon}
                                                             : config.record_times;
    std::sort(wanted.begin(), wanted.end());
    for (double t : wanted) {
      if (t == 0.0) continue;
      const double idx = t / h;
      const long s = std::lround(idx);
      if (std::abs(idx - s) > 1e-9 * std::max(1.0, idx) || s < 1 || s > steps) {
        std::ostringstream msg;
        msg << "record time " << t << " is not on the step grid (step " << h << ", horizon " << config.horizon
            << ")";
        throw BadParams(msg.str());
      }
      if (record[s] >= 0) continue;
      record[s] = static_cast<int>(ens.times.size());
      ens.times.push_back(s * h);
    }
  }

  Sim sim{model, rule, y0, std::log(x0), steps, h, config.scheme, config.antithetic, config.seed, record,
          ens.times.size()};
  if (config.scheme == Scheme::ou_exact) {
    if (model.ou_components().empty()) throw BadParams("ou-exact scheme needs a model with an OU component");
    const OuComponent& ou = model.ou_components().front();
    const double b = ou.rate;
    sim.ou_index = ou.index;
    sim.ou_decay = std::exp(-b * h);
    sim.ou_mean_shift = ou.level / b * (1.0 - sim.ou_decay);
    // (dW, I) with I = int e^{-b(h-s)} dW_s: cov(dW, I) = (1 - e^{-bh}) / b.
    const double var_i = -std::expm1(-2.0 * b * h) / (2.0 * b);
    const double cov = -std::expm1(-b * h) / b;
    // I = (cov / h) dW + sd Z2 with dW = sqrt(h) Z1; the noise is formed from Z1
    // before dW is scaled, hence cov / sqrt(h).
    sim.ou_cov = cov / std::sqrt(h);
    sim.ou_cond_sd = std::sqrt(std::max(0.0, var_i - cov * cov / h));
  }

  const std::size_t slots = ens.times.size();
  ens.y.assign(config.paths * slots * ens.factors, 0.0);
  ens.log_x.assign(config.paths * slots, 0.0);
  parallel_chunks(config.paths, config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p)
      sim.run(p, &ens.y[p * slots * ens.factors], &ens.log_x[p * slots]);
  });
  return ens;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::martingale_consistent:
      return "martingale-consistent";
    case Verdict::supermartingale_consistent:
      return "supermartingale-consistent";
    case Verdict::violation:
      return "violation";
  }
  return "violation";
}

MCReport ensemble_mean(const PerformanceSurface& V, const PathEnsemble& ens, double t) {
  const std::size_t ti = ens.time_index(t);
  std::vector<double> values(ens.paths);
  parallel_chunks(ens.paths, ens.config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) values[p] = V(ens.times[ti], ens.y_at(p, ti), ens.x_at(p, ti));
  });

  // Welford in path order; antithetic pairs are averaged first.
  const std::size_t group = ens.config.antithetic ? 2 : 1;
  double mean = 0.0, m2 = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p + group <= ens.paths; p += group) {
    const double v = group == 2 ? 0.5 * (values[p] + values[p + 1]) : values[p];
    ++count;
    const double delta = v - mean;
    mean += delta / count;
    m2 += delta * (v - mean);
  }
  MCReport r;
  r.t = ens.times[ti];
  r.estimate = mean;
  r.samples = count;
  r.std_error = count > 1 ? std::sqrt(m2 / (count - 1) / count) : 0.0;
  return r;
}

namespace {

MCReport compare(const PerformanceSurface& V, const PathEnsemble& ens, double t, double x0, const Vec& y0,
                 std::optional<double> reference) {
  MCReport r = ensemble_mean(V, ens, t);
  r.reference = reference ? *reference : V(0.0, y0, x0);
  const double diff = r.estimate - r.reference;
  if (r.std_error > 0.0) {
    r.z_score = diff / r.std_error;
  } else {
    r.z_score = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  }
  return r;
}

}  // namespace

MCReport martingale_test(const PerformanceSurface& V, const PathEnsemble& ens, double t, double x0,
                         const Vec& y0, std::optional<double> reference) {
  MCReport r = compare(V, ens, t, x0, y0, reference);
  r.verdict = std::abs(r.estimate - r.reference) <= 3.0 * r.std_error ? Verdict::martingale_consistent
                                                                      : Verdict::violation;
  return r;
}

MCReport supermartingale_test(const PerformanceSurface& V, const PathEnsemble& ens, double t, double x0,
                              const Vec& y0, std::optional<double> reference) {
  MCReport r = compare(V, ens, t, x0, y0, reference);
  r.verdict = r.estimate <= r.reference + 3.0 * r.std_error ? Verdict::supermartingale_consistent
                                                            : Verdict::violation;
  return r;
}

}  // namespace fpp

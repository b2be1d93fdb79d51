#include <fpp/elliptic.hpp>
#include <fpp/errors.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace fpp {

void EllipticOperator1D::check_elliptic(double lo, double hi, int probes) const {
  double inf_a = a(lo);
  for (int i = 1; i < probes; ++i) {
    const double y = lo + (hi - lo) * i / (probes - 1);
    inf_a = std::min(inf_a, a(y));
  }
  if (!(inf_a > 0.0)) {
    std::ostringstream msg;
    msg << "operator is not uniformly elliptic on [" << lo << ", " << hi << "]: inf a = " << inf_a;
    throw BadParams(msg.str());
  }
}

EllipticOperator1D heat_operator() {
  return {[](double) { return 1.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
}

std::vector<double> MinimalSolution::default_grid() {
  std::vector<double> g(601);
  for (int i = 0; i < 601; ++i) g[i] = -3.0 + 0.01 * i;
  g[300] = 0.0;
  return g;
}

MinimalSolution MinimalSolution::quad_exp(double lambda, QuadExp form, std::vector<double> grid) {
  if (grid.empty()) grid = default_grid();
  MinimalSolution s;
  s.lambda_ = lambda;
  s.closed_ = form;
  s.grid_ = std::move(grid);
  s.values_.resize(s.grid_.size());
  s.first_.resize(s.grid_.size());
  s.second_.resize(s.grid_.size());
  for (std::size_t i = 0; i < s.grid_.size(); ++i) {
    const PsiValue v = s(s.grid_[i]);
    s.values_[i] = v.value;
    s.first_[i] = v.first;
    s.second_[i] = v.second;
  }
  return s;
}

MinimalSolution MinimalSolution::tabulated(double lambda, std::vector<double> grid,
                                           std::vector<double> values, std::vector<double> first,
                                           std::vector<double> second) {
  const std::size_t n = grid.size();
  if (n < 2 || values.size() != n || first.size() != n || second.size() != n)
    throw BadParams("tabulated solution: inconsistent array sizes");
  if (!std::is_sorted(grid.begin(), grid.end()) ||
      std::adjacent_find(grid.begin(), grid.end()) != grid.end())
    throw BadParams("tabulated solution: grid must be strictly increasing");
  auto zero = std::find(grid.begin(), grid.end(), 0.0);
  if (zero == grid.end()) throw BadParams("tabulated solution: grid must contain 0");
  if (values[zero - grid.begin()] != 1.0) throw BadParams("tabulated solution: psi(0) must equal 1");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(values[i] > 0.0)) throw BadParams("tabulated solution: psi must be positive on the grid");
  }
  MinimalSolution s;
  s.lambda_ = lambda;
  s.grid_ = std::move(grid);
  s.values_ = std::move(values);
  s.first_ = std::move(first);
  s.second_ = std::move(second);
  return s;
}

PsiValue MinimalSolution::operator()(double y) const {
  if (closed_) {
    const double slope = closed_->c1 + 2.0 * closed_->c2 * y;
    const double v = std::exp(y * (closed_->c1 + closed_->c2 * y));
    return {v, slope * v, (slope * slope + 2.0 * closed_->c2) * v};
  }
  if (y < grid_.front() || y > grid_.back()) {
    std::ostringstream msg;
    msg << "y = " << y << " outside the tabulated range [" << grid_.front() << ", " << grid_.back()
        << "]";
    throw DomainError(msg.str());
  }
  // Quintic Hermite interpolation from (psi, psi', psi'') at both nodes.
  auto it = std::upper_bound(grid_.begin(), grid_.end(), y);
  std::size_t i1 = std::min<std::size_t>(it - grid_.begin(), grid_.size() - 1);
  std::size_t i0 = i1 - 1;
  const double h = grid_[i1] - grid_[i0];
  const double t = (y - grid_[i0]) / h;
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;

  const std::array<double, 6> b = {1 - 10 * t3 + 15 * t4 - 6 * t5,
                                   t - 6 * t3 + 8 * t4 - 3 * t5,
                                   0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
                                   10 * t3 - 15 * t4 + 6 * t5,
                                   -4 * t3 + 7 * t4 - 3 * t5,
                                   0.5 * t3 - t4 + 0.5 * t5};
  const std::array<double, 6> db = {-30 * t2 + 60 * t3 - 30 * t4,
                                    1 - 18 * t2 + 32 * t3 - 15 * t4,
                                    t - 4.5 * t2 + 6 * t3 - 2.5 * t4,
                                    30 * t2 - 60 * t3 + 30 * t4,
                                    -12 * t2 + 28 * t3 - 15 * t4,
                                    1.5 * t2 - 4 * t3 + 2.5 * t4};
  const std::array<double, 6> d2b = {-60 * t + 180 * t2 - 120 * t3,
                                     -36 * t + 96 * t2 - 60 * t3,
                                     1 - 9 * t + 18 * t2 - 10 * t3,
                                     60 * t - 180 * t2 + 120 * t3,
                                     -24 * t + 84 * t2 - 60 * t3,
                                     3 * t - 12 * t2 + 10 * t3};
  const std::array<double, 6> c = {values_[i0], h * first_[i0], h * h * second_[i0],
                                   values_[i1], h * first_[i1], h * h * second_[i1]};
  PsiValue out;
  for (int k = 0; k < 6; ++k) {
    out.value += c[k] * b[k];
    out.first += c[k] * db[k];
    out.second += c[k] * d2b[k];
  }
  out.first /= h;
  out.second /= h * h;
  return out;
}

std::string MinimalSolution::tag() const {
  if (!closed_) return "tabulated";
  std::ostringstream s;
  s.precision(17);
  s << "exp_quadratic(" << closed_->c1 << "," << closed_->c2 << ")";
  return s.str();
}

namespace {

struct Branch {
  std::vector<double> y;
  std::vector<double> psi;
  std::vector<double> dpsi;
};

// Integrates from 0 to `end` (either sign) in `steps` equal RK4 steps.
Branch shoot(const EllipticOperator1D& op, double lambda, double slope0, double end, int steps) {
  const double h = end / steps;
  auto rhs = [&](double y, double p, double dp) {
    return ((lambda - op.c(y)) * p - op.b(y) * dp) / op.a(y);
  };
  Branch br;
  br.y.resize(steps + 1);
  br.psi.resize(steps + 1);
  br.dpsi.resize(steps + 1);
  br.y[0] = 0.0;
  br.psi[0] = 1.0;
  br.dpsi[0] = slope0;
  double p = 1.0, dp = slope0;
  for (int i = 0; i < steps; ++i) {
    const double y = i * h;
    const double k1p = dp, k1d = rhs(y, p, dp);
    const double k2p = dp + 0.5 * h * k1d, k2d = rhs(y + 0.5 * h, p + 0.5 * h * k1p, k2p);
    const double k3p = dp + 0.5 * h * k2d, k3d = rhs(y + 0.5 * h, p + 0.5 * h * k2p, k3p);
    const double k4p = dp + h * k3d, k4d = rhs(y + h, p + h * k3p, k4p);
    p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
    dp += h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d);
    const double yn = (i + 1 == steps) ? end : (i + 1) * h;
    if (!(p > 0.0)) {
      std::ostringstream msg;
      msg << "positivity lost at y = " << yn << " (lambda = " << lambda << ", slope0 = " << slope0
          << ")";
      throw PositivityLost(yn, msg.str());
    }
    br.y[i + 1] = yn;
    br.psi[i + 1] = p;
    br.dpsi[i + 1] = dp;
  }
  return br;
}

// Fourth-order differentiation of uniformly spaced samples.
std::vector<double> differentiate(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n);
  const double s = 1.0 / (12.0 * h);
  for (std::size_t i = 2; i + 2 < n; ++i) d[i] = (-f[i + 2] + 8 * f[i + 1] - 8 * f[i - 1] + f[i - 2]) * s;
  d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) * s;
  d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) * s;
  d[n - 1] = (25 * f[n - 1] - 48 * f[n - 2] + 36 * f[n - 3] - 16 * f[n - 4] + 3 * f[n - 5]) * s;
  d[n - 2] = (3 * f[n - 1] + 10 * f[n - 2] - 18 * f[n - 3] + 6 * f[n - 4] - f[n - 5]) * s;
  return d;
}

MinimalSolution solve_once(const EllipticOperator1D& op, double lambda, double y_lo, double y_hi,
                           double slope0, double step) {
  const int n_lo = std::max(4, static_cast<int>(std::ceil(-y_lo / step - 1e-9)));
  const int n_hi = std::max(4, static_cast<int>(std::ceil(y_hi / step - 1e-9)));
  Branch left = shoot(op, lambda, slope0, y_lo, n_lo);
  Branch right = shoot(op, lambda, slope0, y_hi, n_hi);

  // psi'' is the derivative of the computed psi' trajectory, not the ODE
  // right-hand side, so the residual measures integration error.
  std::vector<double> d2_left = differentiate(left.dpsi, y_lo / n_lo);
  std::vector<double> d2_right = differentiate(right.dpsi, y_hi / n_hi);

  const std::size_t n = left.y.size() + right.y.size() - 1;
  std::vector<double> grid, psi, dpsi, d2psi;
  grid.reserve(n);
  psi.reserve(n);
  dpsi.reserve(n);
  d2psi.reserve(n);
  for (std::size_t i = left.y.size() - 1; i > 0; --i) {
    grid.push_back(left.y[i]);
    psi.push_back(left.psi[i]);
    dpsi.push_back(left.dpsi[i]);
    d2psi.push_back(d2_left[i]);
  }
  grid.push_back(0.0);
  psi.push_back(1.0);
  dpsi.push_back(slope0);
  d2psi.push_back(0.5 * (d2_left[0] + d2_right[0]));
  for (std::size_t i = 1; i < right.y.size(); ++i) {
    grid.push_back(right.y[i]);
    psi.push_back(right.psi[i]);
    dpsi.push_back(right.dpsi[i]);
    d2psi.push_back(d2_right[i]);
  }
  return MinimalSolution::tabulated(lambda, std::move(grid), std::move(psi), std::move(dpsi),
                                    std::move(d2psi));
}

}  // namespace

MinimalSolution solve_positive_solution(const EllipticOperator1D& op, double lambda, double y_lo,
                                        double y_hi, double slope0, double max_step) {
  if (!(y_lo < 0.0 && y_hi > 0.0)) throw BadParams("domain must satisfy y_lo < 0 < y_hi");
  if (!(max_step > 0.0)) throw BadParams("max_step must be positive");
  op.check_elliptic(y_lo, y_hi);

  double step = std::min(max_step, (y_hi - y_lo) / 4096.0);
  for (int attempt = 0;; ++attempt) {
    MinimalSolution sol = solve_once(op, lambda, y_lo, y_hi, slope0, step);
    const double res = ode_residual(op, lambda, sol);
    if (res < kEllipticTolerance) return sol;
    if (attempt == 6) {
      std::ostringstream msg;
      msg << "elliptic solve did not reach tolerance: residual " << res << " at step " << step;
      throw Error(msg.str());
    }
    step *= 0.5;
  }
}

double ode_residual(const EllipticOperator1D& op, double lambda, const MinimalSolution& psi) {
  const auto& g = psi.grid();
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = op.apply(g[i], lambda, psi.values()[i], psi.first()[i], psi.second()[i]);
    worst = std::max(worst, std::abs(r) / (1.0 + std::abs(psi.values()[i])));
  }
  return worst;
}

MinimalSolution heat_fundamental(double lambda, Direction direction) {
  if (lambda < 0.0) throw NegativeLambda("there are no positive solutions of psi'' = lambda psi for lambda < 0");
  const double root = std::sqrt(lambda);
  return MinimalSolution::quad_exp(lambda, {direction == Direction::increasing ? root : -root, 0.0});
}

}  // namespace fpp

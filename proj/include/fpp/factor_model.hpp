#pragma once

#include <fpp/linalg.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fpp {

/// Deterministic map y in R^n -> R^{rows x cols}. Vectors are rows x 1.
class CoefficientField {
 public:
  using Fn = std::function<void(const Vec& y, Mat& out)>;

  CoefficientField() = default;
  CoefficientField(int dim_in, int rows, int cols, Fn fn);

  int dim_in() const noexcept { return dim_in_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  /// Evaluates and checks the declared shape.
  Mat operator()(const Vec& y) const;
  /// Unchecked evaluation into a caller-owned buffer (hot path).
  void eval(const Vec& y, Mat& out) const { fn_(y, out); }

 private:
  int dim_in_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  Fn fn_;
};

/// Component i of the factor has drift a - b*y_i and a constant diffusion
/// column, so it admits an exact Gaussian transition.
struct OuComponent {
  int index = 0;
  double level = 0.0;  // a
  double rate = 0.0;   // b
};

/// dY = mu(Y) dt + sigma(Y)^T dW with sigma(y) in R^{d x n}; the first k
/// components of Y are log-prices of the traded assets.
class FactorModel {
 public:
  FactorModel(std::string name, int n, int k, int d, CoefficientField mu, CoefficientField sigma,
              std::vector<OuComponent> ou = {});

  const std::string& name() const noexcept { return name_; }
  int factors() const noexcept { return n_; }
  int traded() const noexcept { return k_; }
  int brownian() const noexcept { return d_; }

  Vec drift(const Vec& y) const;
  Mat diffusion(const Vec& y) const;
  void drift(const Vec& y, Vec& out) const;
  void diffusion(const Vec& y, Mat& out) const;

  /// mu~^i = mu^i + |sigma^i|^2 / 2 for the traded components.
  Vec asset_drift(const Vec& y) const;

  const std::vector<OuComponent>& ou_components() const noexcept { return ou_; }

  /// Probes sigma's shape at the given points.
  void validate(const std::vector<Vec>& probes) const;

 private:
  std::string name_;
  int n_;
  int k_;
  int d_;
  CoefficientField mu_;
  CoefficientField sigma_;
  std::vector<OuComponent> ou_;
};

/// Minimal-norm lambda with (sigma^i)^T lambda = mu~^i, i < k.
/// Throws NoRiskPremiumSolution when the system is inconsistent.
Vec market_price_of_risk(const FactorModel& model, const Vec& y);

/// Same, with sigma and mu~ already evaluated.
Vec market_price_of_risk(const Mat& sigma, const Vec& asset_drift, int traded);

/// Feedback portfolio: wealth fractions in the k traded assets.
///
/// A rule may also carry a market-aware form that receives sigma(y) and
/// lambda(y) already evaluated by the caller (the path simulator does this
/// to avoid recomputing them inside the rule).
class PortfolioRule {
 public:
  using Fn = std::function<Vec(double t, const Vec& y, double x)>;
  using MarketFn = std::function<Vec(double t, const Vec& y, double x, const Mat& sigma, const Vec& lambda)>;

  PortfolioRule() = default;
  PortfolioRule(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  PortfolioRule(std::string name, Fn fn, MarketFn market)
      : name_(std::move(name)), fn_(std::move(fn)), market_(std::move(market)) {}

  Vec operator()(double t, const Vec& y, double x) const { return fn_(t, y, x); }
  /// sigma and lambda must be the model's values at y.
  Vec operator()(double t, const Vec& y, double x, const Mat& sigma, const Vec& lambda) const {
    return market_ ? market_(t, y, x, sigma, lambda) : fn_(t, y, x);
  }
  const std::string& name() const noexcept { return name_; }
  explicit operator bool() const noexcept { return static_cast<bool>(fn_); }

  /// pi(t,y,x) = c * base(t,y,x).
  static PortfolioRule scaled(const PortfolioRule& base, double c);
  static PortfolioRule cash(int traded);
  static PortfolioRule constant(const Vec& pi);

 private:
  std::string name_;
  Fn fn_;
  MarketFn market_;
};

struct WealthDynamics {
  double drift = 0.0;
  Vec diffusion;  // R^d
};

/// drift = x (sigma pi)^T lambda, diffusion = x sigma pi, pi zero-padded to R^n.
WealthDynamics wealth_dynamics(const FactorModel& model, const PortfolioRule& rule, double t,
                               const Vec& y, double x);
WealthDynamics wealth_dynamics(const FactorModel& model, const Vec& pi, const Vec& y, double x);

// Built-in parametric families.

/// Exponential OU log-price: dY = (a - bY) dt + sigma dW, n = k = d = 1.
FactorModel schwartz_model(double a, double b, double sigma);

/// Y = (log S, v): dS/S = (kappa - mu v) e^v dt + e^v dW1,
/// dv = (a - b v) dt + sigma (rho dW1 + sqrt(1 - rho^2) dW2).
FactorModel stochvol_model(double a, double b, double sigma, double rho, double kappa, double mu);

/// Builds "schwartz" or "stochvol" from named parameters; throws BadParams.
FactorModel make_builtin_model(const std::string& name, const std::map<std::string, double>& params);

}  // namespace fpp

#include <fpp/errors.hpp>
#include <fpp/factor_model.hpp>

#include <cmath>
#include <set>
#include <sstream>

namespace fpp {

CoefficientField::CoefficientField(int dim_in, int rows, int cols, Fn fn)
    : dim_in_(dim_in), rows_(rows), cols_(cols), fn_(std::move(fn)) {
  if (dim_in < 1 || rows < 1 || cols < 1 || dim_in > kMaxDim || rows > kMaxDim || cols > kMaxDim)
    throw BadParams("coefficient field dimensions must lie in [1, " + std::to_string(kMaxDim) + "]");
  if (!fn_) throw BadParams("coefficient field needs an evaluator");
}

Mat CoefficientField::operator()(const Vec& y) const {
  if (y.size() != dim_in_) throw DomainError("coefficient field: input dimension mismatch");
  Mat out(rows_, cols_);
  fn_(y, out);
  if (out.rows() != rows_ || out.cols() != cols_)
    throw DomainError("coefficient field returned a value of the wrong shape");
  return out;
}

FactorModel::FactorModel(std::string name, int n, int k, int d, CoefficientField mu,
                         CoefficientField sigma, std::vector<OuComponent> ou)
    : name_(std::move(name)), n_(n), k_(k), d_(d), mu_(std::move(mu)), sigma_(std::move(sigma)),
      ou_(std::move(ou)) {
  if (n < 1 || n > kMaxDim || d < 1 || d > kMaxDim)
    throw BadParams("factor model dimensions out of range");
  if (k < 1 || k > n) throw BadParams("factor model needs 1 <= k <= n traded assets");
  if (mu_.dim_in() != n || mu_.rows() != n || mu_.cols() != 1)
    throw BadParams("drift field must map R^n to R^n");
  if (sigma_.dim_in() != n || sigma_.rows() != d || sigma_.cols() != n)
    throw BadParams("diffusion field must map R^n to R^{d x n}");
  for (const auto& c : ou_) {
    if (c.index < 0 || c.index >= n) throw BadParams("OU component index out of range");
  }
}

Vec FactorModel::drift(const Vec& y) const {
  Mat m = mu_(y);
  return m.col(0);
}

Mat FactorModel::diffusion(const Vec& y) const { return sigma_(y); }

void FactorModel::drift(const Vec& y, Vec& out) const {
  Mat m(n_, 1);
  mu_.eval(y, m);
  out = m.col(0);
}

void FactorModel::diffusion(const Vec& y, Mat& out) const {
  out.resize(d_, n_);
  sigma_.eval(y, out);
}

Vec FactorModel::asset_drift(const Vec& y) const {
  Vec mu;
  Mat sigma;
  drift(y, mu);
  diffusion(y, sigma);
  Vec out(k_);
  for (int i = 0; i < k_; ++i) out[i] = mu[i] + 0.5 * sigma.col(i).squaredNorm();
  return out;
}

void FactorModel::validate(const std::vector<Vec>& probes) const {
  for (const auto& y : probes) {
    (void)mu_(y);
    (void)sigma_(y);
  }
}

Vec market_price_of_risk(const Mat& sigma, const Vec& asset_drift, int traded) {
  const int d = static_cast<int>(sigma.rows());
  const double scale = std::max(1.0, asset_drift.cwiseAbs().maxCoeff());
  Vec lambda(d);

  if (traded == 1) {
    const double norm2 = sigma.col(0).squaredNorm();
    if (norm2 == 0.0) {
      lambda.setZero();
    } else {
      lambda = sigma.col(0) * (asset_drift[0] / norm2);
    }
  } else {
    Mat a = sigma.leftCols(traded).transpose();  // k x d
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    lambda = svd.solve(asset_drift);
  }

  Vec residual = sigma.leftCols(traded).transpose() * lambda - asset_drift;
  if (residual.cwiseAbs().maxCoeff() > 1e-10 * scale) {
    std::ostringstream msg;
    msg << "no market price of risk: residual " << residual.cwiseAbs().maxCoeff()
        << " (the traded-asset system is inconsistent)";
    throw NoRiskPremiumSolution(msg.str());
  }
  return lambda;
}

Vec market_price_of_risk(const FactorModel& model, const Vec& y) {
  Vec mu;
  Mat sigma;
  model.drift(y, mu);
  model.diffusion(y, sigma);
  const int k = model.traded();
  Vec tilde(k);
  for (int i = 0; i < k; ++i) tilde[i] = mu[i] + 0.5 * sigma.col(i).squaredNorm();
  return market_price_of_risk(sigma, tilde, k);
}

PortfolioRule PortfolioRule::scaled(const PortfolioRule& base, double c) {
  std::ostringstream name;
  name << c << "*" << base.name();
  return PortfolioRule(
      name.str(), [base, c](double t, const Vec& y, double x) -> Vec { return c * base(t, y, x); },
      [base, c](double t, const Vec& y, double x, const Mat& sigma, const Vec& lambda) -> Vec {
        return c * base(t, y, x, sigma, lambda);
      });
}

PortfolioRule PortfolioRule::cash(int traded) {
  return PortfolioRule("cash", [traded](double, const Vec&, double) -> Vec {
    return Vec::Zero(traded);
  });
}

PortfolioRule PortfolioRule::constant(const Vec& pi) {
  return PortfolioRule("constant", [pi](double, const Vec&, double) -> Vec { return pi; });
}

WealthDynamics wealth_dynamics(const FactorModel& model, const Vec& pi, const Vec& y, double x) {
  if (!(x > 0.0)) throw DomainError("wealth must be positive");
  if (pi.size() != model.traded()) throw DomainError("portfolio has the wrong dimension");
  Mat sigma;
  model.diffusion(y, sigma);
  const Vec lambda = market_price_of_risk(model, y);
  Vec exposure = sigma.leftCols(model.traded()) * pi;  // sigma pi in R^d
  WealthDynamics out;
  out.drift = x * exposure.dot(lambda);
  out.diffusion = x * exposure;
  return out;
}

WealthDynamics wealth_dynamics(const FactorModel& model, const PortfolioRule& rule, double t,
                               const Vec& y, double x) {
  return wealth_dynamics(model, rule(t, y, x), y, x);
}

FactorModel schwartz_model(double a, double b, double sigma) {
  if (!(sigma > 0.0)) throw BadParams("schwartz: sigma must be positive");
  if (!(b > 0.0)) throw BadParams("schwartz: b must be positive");
  CoefficientField mu(1, 1, 1, [a, b](const Vec& y, Mat& out) { out(0, 0) = a - b * y[0]; });
  CoefficientField sig(1, 1, 1, [sigma](const Vec&, Mat& out) { out(0, 0) = sigma; });
  return FactorModel("schwartz", 1, 1, 1, std::move(mu), std::move(sig), {{0, a, b}});
}

FactorModel stochvol_model(double a, double b, double sigma, double rho, double kappa, double mu) {
  if (!(sigma > 0.0)) throw BadParams("stochvol: sigma must be positive");
  if (!(b > 0.0)) throw BadParams("stochvol: b must be positive");
  if (!(rho >= -1.0 && rho <= 1.0)) throw BadParams("stochvol: rho must lie in [-1, 1]");
  if (!(mu >= 0.0)) throw BadParams("stochvol: mu must be non-negative");
  CoefficientField drift(2, 2, 1, [a, b, kappa, mu](const Vec& y, Mat& out) {
    const double vol = std::exp(y[1]);
    out(0, 0) = (kappa - mu * y[1]) * vol - 0.5 * vol * vol;
    out(1, 0) = a - b * y[1];
  });
  const double rho_bar = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  CoefficientField diff(2, 2, 2, [sigma, rho, rho_bar](const Vec& y, Mat& out) {
    out(0, 0) = std::exp(y[1]);
    out(1, 0) = 0.0;
    out(0, 1) = sigma * rho;
    out(1, 1) = sigma * rho_bar;
  });
  return FactorModel("stochvol", 2, 1, 2, std::move(drift), std::move(diff), {{1, a, b}});
}

namespace {

double take(const std::map<std::string, double>& p, const std::string& model, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw BadParams(model + ": missing parameter '" + key + "'");
  return it->second;
}

void reject_unknown(const std::map<std::string, double>& p, const std::string& model,
                    const std::set<std::string>& known) {
  for (const auto& [key, value] : p) {
    if (!known.count(key)) throw BadParams(model + ": unknown parameter '" + key + "'");
  }
}

}  // namespace

FactorModel make_builtin_model(const std::string& name, const std::map<std::string, double>& p) {
  if (name == "schwartz") {
    reject_unknown(p, name, {"a", "b", "sigma"});
    return schwartz_model(take(p, name, "a"), take(p, name, "b"), take(p, name, "sigma"));
  }
  if (name == "stochvol") {
    reject_unknown(p, name, {"a", "b", "sigma", "rho", "kappa", "mu"});
    return stochvol_model(take(p, name, "a"), take(p, name, "b"), take(p, name, "sigma"),
                          take(p, name, "rho"), take(p, name, "kappa"), take(p, name, "mu"));
  }
  throw BadParams("unknown model '" + name + "' (expected schwartz or stochvol)");
}

}  // namespace fpp

#pragma once
// Working models: the density-ratio model with sample normalization,
// Gaussian-linear conditional outcome models (fixed or MLE-fitted),
// conditional expectations by quadrature or closed form, and the
// nonparametric regression channel used by the singly-flexible path.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>

#include <labelshift/errors.hpp>
#include <labelshift/kernels.hpp>
#include <labelshift/normal.hpp>
#include <labelshift/quadrature.hpp>
#include <labelshift/sampling.hpp>

namespace labelshift {

// ---------------------------------------------------------------------------
// Density ratio working model rho*(y) = c* rho~(y)

struct ExpTilt {
  double a = 0.0;
  double b = 0.0;
};

struct DensityRatioModel {
  std::function<double(double)> base;  // rho~(y), strictly positive
  double normalizer = 1.0;             // c*
  std::optional<ExpTilt> tilt;         // set when rho~(y) = exp(a + b y)
  bool normalized = false;             // c* was calibrated on a sample

  double operator()(double y) const {
    const double v = normalizer * base(y);
    if (!std::isfinite(v) || v <= 0.0) {
      throw ComputeError("DensityRatioModel: non-positive or non-finite ratio at y=" +
                         std::to_string(y));
    }
    return v;
  }
};

inline DensityRatioModel exp_tilt_ratio(double a, double b) {
  DensityRatioModel m;
  m.base = [a, b](double y) { return std::exp(a + b * y); };
  m.tilt = ExpTilt{a, b};
  return m;
}

// c* = pi / (n^{-1} sum_i r_i rho~(y_i)), so that the normalized model
// satisfies n^{-1} sum_i r_i rho*(y_i) = pi.
inline DensityRatioModel normalize_ratio(const DensityRatioModel& model,
                                         const StackedSample& s) {
  double sum = 0.0;
  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] == 1) sum += model.base(s.y[i]);
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw ComputeError("normalize_ratio: sum of base ratio over source rows "
                       "must be positive and finite");
  }
  DensityRatioModel out = model;
  out.normalizer = static_cast<double>(s.n1) / sum;
  out.normalized = true;
  return out;
}

inline DensityRatioModel normalize_ratio(std::function<double(double)> base,
                                         const StackedSample& s) {
  DensityRatioModel m;
  m.base = std::move(base);
  return normalize_ratio(m, s);
}

// ---------------------------------------------------------------------------
// Conditional outcome working model p*(y | x)

using FeatureMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct ConditionalOutcomeModel {
  enum class Kind { GaussianLinear, FixedDensity };

  Kind kind = Kind::GaussianLinear;

  // GaussianLinear: y | x ~ N(beta_0 + beta_1' f(x), sigma2)
  Eigen::VectorXd beta;  // intercept first, then feature coefficients
  double sigma2 = 1.0;
  FeatureMap feature_map;  // empty means identity

  // FixedDensity: caller-supplied evaluator with its own support interval
  // for the quadrature mass check.
  std::function<double(double, const Eigen::VectorXd&)> density;
  double support_lo = 0.0;
  double support_hi = 0.0;

  bool fitted = false;  // produced by fit_gaussian_linear on a sample

  Eigen::VectorXd features(const Eigen::VectorXd& x) const {
    return feature_map ? feature_map(x) : x;
  }

  double mean(const Eigen::VectorXd& x) const {
    if (kind != Kind::GaussianLinear) {
      throw ConfigError("ConditionalOutcomeModel: mean() needs GaussianLinear");
    }
    const Eigen::VectorXd f = features(x);
    if (f.size() + 1 != beta.size()) {
      throw ConfigError("ConditionalOutcomeModel: feature/coefficient mismatch");
    }
    return beta[0] + beta.tail(f.size()).dot(f);
  }

  double density_at(double y, const Eigen::VectorXd& x) const {
    if (kind == Kind::GaussianLinear) {
      if (!(sigma2 > 0.0)) {
        throw ComputeError("ConditionalOutcomeModel: density needs sigma2 > 0");
      }
      const double sd = std::sqrt(sigma2);
      return normal_pdf((y - mean(x)) / sd) / sd;
    }
    return density(y, x);
  }
};

inline ConditionalOutcomeModel gaussian_linear_model(Eigen::VectorXd beta,
                                                     double sigma2,
                                                     FeatureMap fm = {}) {
  if (beta.size() < 2) {
    throw ConfigError("gaussian_linear_model: need intercept and >= 1 slope");
  }
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
    throw ConfigError("gaussian_linear_model: sigma2 must be >= 0 and finite");
  }
  ConditionalOutcomeModel m;
  m.kind = ConditionalOutcomeModel::Kind::GaussianLinear;
  m.beta = std::move(beta);
  m.sigma2 = sigma2;
  m.feature_map = std::move(fm);
  return m;
}

inline ConditionalOutcomeModel fixed_density_model(
    std::function<double(double, const Eigen::VectorXd&)> density, double lo,
    double hi) {
  if (!(lo < hi)) throw ConfigError("fixed_density_model: need lo < hi");
  ConditionalOutcomeModel m;
  m.kind = ConditionalOutcomeModel::Kind::FixedDensity;
  m.density = std::move(density);
  m.support_lo = lo;
  m.support_hi = hi;
  return m;
}

// Source-population conditional outcome law of the synthetic design.
inline ConditionalOutcomeModel true_conditional_model() {
  Eigen::VectorXd beta(4);
  beta << 0.0, -0.2, 0.2, 0.4;
  return gaussian_linear_model(beta, 0.4);
}

// Covariate transform used by the fixed misspecified model.
inline Eigen::VectorXd paper_feature_transform(const Eigen::VectorXd& x) {
  if (x.size() != 3) {
    throw ConfigError("paper_feature_transform: needs 3 covariates");
  }
  Eigen::VectorXd f(3);
  f[0] = x[0];
  f[1] = std::exp(x[1] / 2.0);
  f[2] = x[2] / (1.0 + std::exp(x[1])) + 10.0;
  return f;
}

inline ConditionalOutcomeModel paper_misspecified_model() {
  Eigen::VectorXd beta(4);
  beta << -7.000, -0.223, 0.363, 0.664;
  return gaussian_linear_model(beta, 0.449, paper_feature_transform);
}

// MLE fit of the Gaussian-linear family on the source rows: beta by least
// squares of y on (1, f(x)), sigma2 = RSS / n1.
inline ConditionalOutcomeModel fit_gaussian_linear(const StackedSample& s,
                                                   const FeatureMap& fm = {}) {
  const Eigen::VectorXd f0 =
      fm ? fm(s.x.row(0).transpose()) : Eigen::VectorXd(s.x.row(0).transpose());
  const int p = static_cast<int>(f0.size()) + 1;
  if (s.n1 <= p) {
    throw ConfigError("fit_gaussian_linear: need n1 > number of coefficients");
  }
  Eigen::MatrixXd a(s.n1, p);
  Eigen::VectorXd b(s.n1);
  int k = 0;
  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] != 1) continue;
    const Eigen::VectorXd f =
        fm ? fm(s.x.row(i).transpose()) : Eigen::VectorXd(s.x.row(i).transpose());
    a(k, 0) = 1.0;
    a.row(k).tail(p - 1) = f.transpose();
    b[k] = s.y[i];
    ++k;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < p) {
    throw ComputeError("fit_gaussian_linear: rank-deficient design");
  }
  Eigen::VectorXd beta = qr.solve(b);
  const double rss = (b - a * beta).squaredNorm();
  auto model = gaussian_linear_model(std::move(beta), rss / s.n1, fm);
  model.fitted = true;
  return model;
}

// ---------------------------------------------------------------------------
// Conditional expectations

// Quadrature evaluation of E*{ integrand(Y) | x }. The mass check guards
// against an interval that truncates too much of p*(.|x).
inline double cond_expect(const ConditionalOutcomeModel& model,
                          const std::function<double(double)>& integrand,
                          const Eigen::VectorXd& x, const QuadratureRule& rule) {
  double mass = 0.0;
  double val = 0.0;
  for (int j = 0; j < rule.m(); ++j) {
    const double t = rule.nodes[j];
    const double p = model.density_at(t, x);
    const double g = integrand(t);
    if (!std::isfinite(p) || !std::isfinite(g)) {
      throw ComputeError("cond_expect: non-finite value at node " +
                         std::to_string(t));
    }
    mass += rule.weights[j] * p;
    val += rule.weights[j] * g * p;
  }
  if (mass < 0.99) {
    throw TruncationError("cond_expect: quadrature mass " +
                          std::to_string(mass) +
                          " < 0.99; interval too narrow for this x");
  }
  return val;
}

// Closed form E*{exp(sY) | x} = exp(s mu(x) + s^2 sigma^2 / 2) for
// Gaussian-linear models.
inline double cond_expect_exp(const ConditionalOutcomeModel& model, double s,
                              const Eigen::VectorXd& x) {
  if (model.kind != ConditionalOutcomeModel::Kind::GaussianLinear) {
    throw ConfigError("cond_expect_exp: GaussianLinear only");
  }
  return std::exp(s * model.mean(x) + 0.5 * s * s * model.sigma2);
}

// P(i, j) = p*(t_j | x_i) for all rows of xs on the rule's nodes.
inline Eigen::MatrixXd density_matrix(const ConditionalOutcomeModel& model,
                                      const Eigen::MatrixXd& xs,
                                      const QuadratureRule& rule) {
  const auto n = xs.rows();
  const int m = rule.m();
  Eigen::MatrixXd p(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = xs.row(i).transpose();
    if (model.kind == ConditionalOutcomeModel::Kind::GaussianLinear) {
      if (!(model.sigma2 > 0.0)) {
        throw ComputeError("density_matrix: needs sigma2 > 0");
      }
      const double mu = model.mean(xi);
      const double sd = std::sqrt(model.sigma2);
      for (int j = 0; j < m; ++j) {
        p(i, j) = normal_pdf((rule.nodes[j] - mu) / sd) / sd;
      }
    } else {
      for (int j = 0; j < m; ++j) {
        p(i, j) = model.density_at(rule.nodes[j], xi);
      }
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Balancing weights w_i = [E*{rho*^2(Y)|x_i} + pi/(1-pi) E*{rho*(Y)|x_i}]^{-1}

// Parametric-model path. With strict_mass, a quadrature mass below 0.99 on
// any row is an error; otherwise such rows are only counted.
inline Eigen::VectorXd weights_w(const DensityRatioModel& ratio,
                                 const ConditionalOutcomeModel& model,
                                 const StackedSample& s,
                                 const QuadratureRule& rule,
                                 bool strict_mass = true,
                                 int* mass_violations = nullptr) {
  const int m = rule.m();
  Eigen::VectorXd rho_t(m);
  for (int j = 0; j < m; ++j) rho_t[j] = ratio(rule.nodes[j]);

  const Eigen::MatrixXd p = density_matrix(model, s.x, rule);
  const Eigen::VectorXd mass = p * rule.weights;
  const Eigen::VectorXd e1 =
      p * rule.weights.cwiseProduct(rho_t);  // E{rho* | x_i}
  const Eigen::VectorXd e2 =
      p * rule.weights.cwiseProduct(rho_t.cwiseProduct(rho_t));

  int violations = 0;
  const double shift = s.pi / (1.0 - s.pi);
  Eigen::VectorXd w(s.n());
  for (int i = 0; i < s.n(); ++i) {
    if (mass[i] < 0.99) {
      if (strict_mass) {
        throw TruncationError("weights_w: quadrature mass " +
                              std::to_string(mass[i]) + " < 0.99 at row " +
                              std::to_string(i));
      }
      ++violations;
    }
    const double denom = e2[i] + shift * e1[i];
    if (!(denom > 0.0) || !std::isfinite(denom)) {
      throw ComputeError("weights_w: non-positive denominator at row " +
                         std::to_string(i));
    }
    w[i] = 1.0 / denom;
  }
  if (mass_violations) *mass_violations = violations;
  return w;
}

// ---------------------------------------------------------------------------
// Nonparametric regression channel E^_p(. | x)

struct NonparamRegressor {
  KernelSpec kernel;         // multivariate product kernel
  Eigen::MatrixXd centers;   // n1 x d source covariates, row order preserved
  Eigen::VectorXd source_y;  // matching source outcomes
};

inline NonparamRegressor make_nonparam_regressor(
    const StackedSample& s, double bandwidth_scale = 2.5,
    std::optional<double> bandwidth = {},
    KernelFamily family = KernelFamily::Gaussian) {
  NonparamRegressor reg;
  reg.kernel.family = family;
  reg.kernel.bandwidth =
      bandwidth ? *bandwidth
                : default_bandwidth_multi(s.n1, s.d(), bandwidth_scale);
  reg.centers.resize(s.n1, s.d());
  reg.source_y.resize(s.n1);
  int k = 0;
  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] != 1) continue;
    reg.centers.row(k) = s.x.row(i);
    reg.source_y[k] = s.y[i];
    ++k;
  }
  return reg;
}

// E^_p{values | x} as the NW weighted average over source rows.
inline double nonparam_cond_expect(const NonparamRegressor& reg,
                                   const Eigen::VectorXd& values_on_source,
                                   const Eigen::VectorXd& x) {
  if (values_on_source.size() != reg.centers.rows()) {
    throw ConfigError("nonparam_cond_expect: values/centers mismatch");
  }
  return nw_regress_multi(reg.kernel, reg.centers, values_on_source,
                          Eigen::VectorXi::Ones(reg.centers.rows()), x);
}

// Row-normalized NW weight matrix: out(i, k) is the weight of source row k
// in E^_p(. | queries.row(i)); rows sum to one.
inline Eigen::MatrixXd nw_weight_matrix(const NonparamRegressor& reg,
                                        const Eigen::MatrixXd& queries) {
  validate(reg.kernel);
  const auto n = queries.rows();
  const auto n1 = reg.centers.rows();
  const auto d = reg.centers.cols();
  if (queries.cols() != d) {
    throw ConfigError("nw_weight_matrix: query dimension mismatch");
  }
  const double h = reg.kernel.bandwidth;
  Eigen::MatrixXd out(n, n1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n1; ++k) {
      double kk = 1.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        kk *= kernel_value(reg.kernel.family,
                           (queries(i, j) - reg.centers(k, j)) / h) /
              h;
      }
      out(i, k) = kk;
    }
    const double den = out.row(i).sum();
    if (den < 1e-300) {
      throw DegenerateQueryError("nw_weight_matrix: kernel mass underflow at row " +
                                 std::to_string(i));
    }
    out.row(i) /= den;
  }
  return out;
}

// Nonparametric-path balancing weights, using NW conditional expectations of
// rho*^2 and rho* over the source outcomes.
inline Eigen::VectorXd weights_w(const DensityRatioModel& ratio,
                                 const NonparamRegressor& reg,
                                 const StackedSample& s) {
  const auto n1 = reg.centers.rows();
  Eigen::VectorXd rho(n1), rho2(n1);
  for (Eigen::Index k = 0; k < n1; ++k) {
    rho[k] = ratio(reg.source_y[k]);
    rho2[k] = rho[k] * rho[k];
  }
  const Eigen::MatrixXd nw = nw_weight_matrix(reg, s.x);
  const Eigen::VectorXd e1 = nw * rho;
  const Eigen::VectorXd e2 = nw * rho2;
  const double shift = s.pi / (1.0 - s.pi);
  Eigen::VectorXd w(s.n());
  for (int i = 0; i < s.n(); ++i) {
    const double denom = e2[i] + shift * e1[i];
    if (!(denom > 0.0) || !std::isfinite(denom)) {
      throw ComputeError("weights_w: non-positive denominator at row " +
                         std::to_string(i));
    }
    w[i] = 1.0 / denom;
  }
  return w;
}

}  // namespace labelshift

#pragma once
// Kernel weight functions and Nadaraya-Watson regression, one-dimensional
// and multivariate via a product kernel with one shared bandwidth.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include <labelshift/errors.hpp>

namespace labelshift {

enum class KernelFamily { Gaussian, Epanechnikov };

struct KernelSpec {
  KernelFamily family = KernelFamily::Gaussian;
  double bandwidth = 1.0;
};

inline void validate(const KernelSpec& spec) {
  if (!(spec.bandwidth > 0.0) || !std::isfinite(spec.bandwidth)) {
    throw ConfigError("KernelSpec: bandwidth must be positive and finite");
  }
}

// K(v): standard normal density, or 0.75(1 - v^2) on |v| < 1.
inline double kernel_value(KernelFamily family, double v) {
  if (family == KernelFamily::Gaussian) {
    return std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
  }
  return std::abs(v) < 1.0 ? 0.75 * (1.0 - v * v) : 0.0;
}

// K_h(u) = K(u/h)/h.
inline double kernel_weight(const KernelSpec& spec, double u) {
  validate(spec);
  return kernel_value(spec.family, u / spec.bandwidth) / spec.bandwidth;
}

inline double nw_regress_1d(const KernelSpec& spec,
                            const Eigen::VectorXd& centers,
                            const Eigen::VectorXd& values,
                            const Eigen::VectorXi& mask, double query) {
  validate(spec);
  const auto n = centers.size();
  if (values.size() != n || mask.size() != n) {
    throw ConfigError("nw_regress_1d: length mismatch");
  }
  double num = 0.0;
  double den = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask[i] == 0) continue;
    any = true;
    const double k = kernel_value(spec.family,
                                  (query - centers[i]) / spec.bandwidth) /
                     spec.bandwidth;
    num += k * values[i];
    den += k;
  }
  if (!any) throw ConfigError("nw_regress_1d: no masked-in centers");
  if (den < 1e-300) {
    throw DegenerateQueryError("nw_regress_1d: kernel mass underflow at query " +
                               std::to_string(query));
  }
  return num / den;
}

inline double nw_regress_multi(const KernelSpec& spec,
                               const Eigen::MatrixXd& centers,
                               const Eigen::VectorXd& values,
                               const Eigen::VectorXi& mask,
                               const Eigen::VectorXd& query) {
  validate(spec);
  const auto n = centers.rows();
  const auto d = centers.cols();
  if (values.size() != n || mask.size() != n) {
    throw ConfigError("nw_regress_multi: length mismatch");
  }
  if (query.size() != d) throw ConfigError("nw_regress_multi: query dimension mismatch");
  double num = 0.0;
  double den = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask[i] == 0) continue;
    any = true;
    double k = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      k *= kernel_value(spec.family,
                        (query[j] - centers(i, j)) / spec.bandwidth) /
           spec.bandwidth;
    }
    num += k * values[i];
    den += k;
  }
  if (!any) throw ConfigError("nw_regress_multi: no masked-in centers");
  if (den < 1e-300) {
    throw DegenerateQueryError("nw_regress_multi: kernel mass underflow");
  }
  return num / den;
}

// Outcome-regression bandwidth n1^{-1/3}.
inline double default_bandwidth_1d(int n1) {
  if (n1 < 1) throw ConfigError("default_bandwidth_1d: n1 must be >= 1");
  return std::pow(static_cast<double>(n1), -1.0 / 3.0);
}

// Covariate-regression bandwidth scale * n1^{-1/(4+d)}.
inline double default_bandwidth_multi(int n1, int d, double scale) {
  if (n1 < 1) throw ConfigError("default_bandwidth_multi: n1 must be >= 1");
  if (d < 1) throw ConfigError("default_bandwidth_multi: d must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("default_bandwidth_multi: scale must be positive");
  }
  return scale * std::pow(static_cast<double>(n1), -1.0 / (4.0 + d));
}

}  // namespace labelshift

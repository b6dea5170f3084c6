#pragma once
// Fixed quadrature rules on finite intervals: Gauss-Legendre nodes/weights
// computed by Newton iteration on the Legendre recurrence, and an
// equally-spaced trapezoid rule sharing the same representation.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include <labelshift/errors.hpp>

namespace labelshift {

struct QuadratureRule {
  Eigen::VectorXd nodes;    // strictly increasing, inside [a, b]
  Eigen::VectorXd weights;  // positive, sum to b - a
  double a = 0.0;
  double b = 0.0;

  int m() const { return static_cast<int>(nodes.size()); }
};

inline QuadratureRule gauss_legendre(int m, double a, double b) {
  if (m < 1) throw ConfigError("gauss_legendre: m must be >= 1");
  if (!(a < b)) throw ConfigError("gauss_legendre: interval requires a < b");

  QuadratureRule rule;
  rule.a = a;
  rule.b = b;
  rule.nodes.resize(m);
  rule.weights.resize(m);

  const double mid = 0.5 * (b + a);
  const double half = 0.5 * (b - a);
  const int pairs = (m + 1) / 2;

  for (int i = 0; i < pairs; ++i) {
    // Chebyshev initial guess for the i-th root of P_m, largest first.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double pp = 0.0;
    double z_prev;
    int iter = 0;
    do {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 0; j < m; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = m * (z * p1 - p2) / (z * z - 1.0);
      z_prev = z;
      z = z_prev - p1 / pp;
    } while (std::abs(z - z_prev) > 1e-15 && ++iter < 100);

    rule.nodes[i] = mid - half * z;
    rule.nodes[m - 1 - i] = mid + half * z;
    const double w = 2.0 * half / ((1.0 - z * z) * pp * pp);
    rule.weights[i] = w;
    rule.weights[m - 1 - i] = w;
  }
  return rule;
}

// Equally spaced nodes on [a, b] inclusive with trapezoid weights. Used for
// grid-style evaluation where endpoint nodes are wanted.
inline QuadratureRule trapezoid(int m, double a, double b) {
  if (m < 2) throw ConfigError("trapezoid: m must be >= 2");
  if (!(a < b)) throw ConfigError("trapezoid: interval requires a < b");

  QuadratureRule rule;
  rule.a = a;
  rule.b = b;
  rule.nodes = Eigen::VectorXd::LinSpaced(m, a, b);
  const double h = (b - a) / (m - 1);
  rule.weights = Eigen::VectorXd::Constant(m, h);
  rule.weights[0] = 0.5 * h;
  rule.weights[m - 1] = 0.5 * h;
  return rule;
}

template <typename F>
double integrate(const QuadratureRule& rule, F&& f) {
  double total = 0.0;
  for (int i = 0; i < rule.m(); ++i) {
    const double fi = f(rule.nodes[i]);
    if (!std::isfinite(fi)) {
      throw ComputeError("integrate: integrand not finite at node " +
                         std::to_string(rule.nodes[i]));
    }
    total += rule.weights[i] * fi;
  }
  return total;
}

}  // namespace labelshift

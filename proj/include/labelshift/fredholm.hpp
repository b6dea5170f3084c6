#pragma once
// First-kind Fredholm discretization for the two flexible estimation paths
// and the Landweber iteration that solves the resulting linear systems.
//
// Both paths reduce to the same system  ytilde = Phi (a .* quad_weights):
//   - parametric path: columns indexed by quadrature nodes t_j, the
//     conditional-expectation channel is the working density p*(t|x);
//   - nonparametric path: columns indexed by the source outcomes y_k, the
//     channel is the covariate-space NW weight, quad_weights is all ones.
// Rows are indexed by evaluation points (deduplicated source outcomes). For
// general estimating functions U(x,y,theta) only the right-hand side changes.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <labelshift/errors.hpp>
#include <labelshift/kernels.hpp>
#include <labelshift/models.hpp>
#include <labelshift/quadrature.hpp>
#include <labelshift/sampling.hpp>

namespace labelshift {

struct SolveDiagnostics {
  int iterations = 0;
  double final_rel_change = std::numeric_limits<double>::quiet_NaN();
  double final_residual_norm = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

struct DiscretizedFredholm {
  Eigen::MatrixXd phi;           // l x m
  Eigen::VectorXd target;        // l
  Eigen::VectorXd quad_weights;  // m, positive (all ones in sample-point form)
  double step = 0.0;             // <= 0 selects the default 1/l
  double tol = 1e-8;             // relative-change stopping threshold
  int max_iter = 50000;
  bool spectral_guard = false;   // rescale step from the spectral norm
};

inline void validate(const DiscretizedFredholm& p) {
  if (p.phi.rows() < 1 || p.phi.cols() < 1) {
    throw ConfigError("DiscretizedFredholm: empty system");
  }
  if (p.target.size() != p.phi.rows() ||
      p.quad_weights.size() != p.phi.cols()) {
    throw ConfigError("DiscretizedFredholm: size mismatch");
  }
  if (!p.phi.allFinite() || !p.target.allFinite()) {
    throw ConfigError("DiscretizedFredholm: non-finite entries");
  }
  if (!(p.quad_weights.array() > 0.0).all()) {
    throw ConfigError("DiscretizedFredholm: quad_weights must be positive");
  }
  if (!(p.tol > 0.0) || p.max_iter < 1) {
    throw ConfigError("DiscretizedFredholm: invalid solver parameters");
  }
}

// Deterministic power iteration estimate of the largest singular value.
inline double spectral_norm(const Eigen::MatrixXd& b, int iters = 30) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(b.cols());
  v.normalize();
  double sigma = 0.0;
  for (int k = 0; k < iters; ++k) {
    Eigen::VectorXd u = b.transpose() * (b * v);
    const double norm = u.norm();
    if (norm == 0.0) return 0.0;
    v = u / norm;
    sigma = std::sqrt(norm);
  }
  return sigma;
}

namespace detail {

// Core iteration on the normal-equations pieces h = Phi'Phi, g = Phi'ytilde.
// yty = ||ytilde||^2 is used to report the final residual norm.
inline std::pair<Eigen::VectorXd, SolveDiagnostics> landweber_core(
    const Eigen::MatrixXd& h, const Eigen::VectorXd& g, double yty,
    const Eigen::VectorXd& w, double step, double tol, int max_iter,
    Eigen::VectorXd a) {
  SolveDiagnostics diag;
  double min_rel = std::numeric_limits<double>::infinity();
  for (int k = 0; k < max_iter; ++k) {
    const Eigen::VectorXd delta = step * (g - h * a.cwiseProduct(w));
    const double change = delta.squaredNorm();
    const double base = a.squaredNorm();
    const double rel = base > 0.0 ? change / base : change;
    a += delta;
    if (!std::isfinite(rel) || a.squaredNorm() > 1e200) {
      throw DivergenceError("landweber_solve: iterate overflow at iteration " +
                            std::to_string(k + 1));
    }
    if (base > 0.0) {  // the absolute criterion at a_k = 0 is not comparable
      min_rel = std::min(min_rel, rel);
      if (rel > 1e3 * min_rel) {
        throw DivergenceError(
            "landweber_solve: relative change grew 1e3x above its minimum at "
            "iteration " +
            std::to_string(k + 1));
      }
    }
    diag.iterations = k + 1;
    diag.final_rel_change = rel;
    if (rel <= tol) {
      diag.converged = true;
      break;
    }
  }
  const Eigen::VectorXd aw = a.cwiseProduct(w);
  const double res2 = aw.dot(h * aw) - 2.0 * aw.dot(g) + yty;
  diag.final_residual_norm = std::sqrt(std::max(res2, 0.0));
  return {std::move(a), diag};
}

}  // namespace detail

inline std::pair<Eigen::VectorXd, SolveDiagnostics> landweber_solve(
    const DiscretizedFredholm& p, const Eigen::VectorXd& a0) {
  validate(p);
  const int l = static_cast<int>(p.phi.rows());
  const int m = static_cast<int>(p.phi.cols());
  if (a0.size() != m) throw ConfigError("landweber_solve: a0 size mismatch");

  double step = p.step > 0.0 ? p.step : 1.0 / l;
  if (p.spectral_guard) {
    // Convergence is governed by Phi diag(sqrt(w)) because the iteration
    // matrix I - step Phi'Phi diag(w) is similar to I - step B'B with
    // B = Phi diag(sqrt(w)).
    const Eigen::MatrixXd b =
        p.phi * p.quad_weights.cwiseSqrt().asDiagonal();
    const double sigma = spectral_norm(b);
    step = 1.0 / (sigma * sigma + 1e-12);
  }
  const Eigen::MatrixXd h = p.phi.transpose() * p.phi;
  const Eigen::VectorXd g = p.phi.transpose() * p.target;
  return detail::landweber_core(h, g, p.target.squaredNorm(), p.quad_weights,
                                step, p.tol, p.max_iter, a0);
}

inline std::pair<Eigen::VectorXd, SolveDiagnostics> landweber_solve(
    const DiscretizedFredholm& p) {
  return landweber_solve(p, Eigen::VectorXd::Zero(p.phi.cols()));
}

// ---------------------------------------------------------------------------
// Discretization shared by both flexible paths

// Per-(sample row, outcome) evaluator of the estimating function U; absent
// means the mean target (right-hand side = the evaluation points).
using USlice = std::function<double(int, double)>;

inline Eigen::VectorXd dedup_sorted_source_outcomes(const StackedSample& s) {
  std::vector<double> ys;
  ys.reserve(s.n1);
  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] == 1) ys.push_back(s.y[i]);
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  return Eigen::Map<Eigen::VectorXd>(ys.data(), ys.size());
}

// Row-stochastic outcome-space NW matrix: out(e, k) is the weight of source
// outcome k at evaluation point eval[e].
inline Eigen::MatrixXd nw_outcome_matrix(const KernelSpec& kspec,
                                         const Eigen::VectorXd& source_y,
                                         const Eigen::VectorXd& eval) {
  validate(kspec);
  const auto l = eval.size();
  const auto n1 = source_y.size();
  Eigen::MatrixXd out(l, n1);
  for (Eigen::Index e = 0; e < l; ++e) {
    for (Eigen::Index k = 0; k < n1; ++k) {
      out(e, k) = kernel_value(kspec.family,
                               (eval[e] - source_y[k]) / kspec.bandwidth) /
                  kspec.bandwidth;
    }
    const double den = out.row(e).sum();
    if (den < 1e-300) {
      throw DegenerateQueryError(
          "nw_outcome_matrix: degenerate NW denominator at evaluation point " +
          std::to_string(eval[e]));
    }
    out.row(e) /= den;
  }
  return out;
}

// Everything both flexible paths need: the kernel matrix plus the pieces for
// balancing weights, right-hand sides, and the b-hat back-substitution.
struct FlexibleDiscretization {
  Eigen::VectorXd grid;          // m column values (quad nodes or source y)
  Eigen::VectorXd grid_weights;  // m (quadrature weights or all ones)
  Eigen::VectorXd rho_grid;      // rho* on the grid
  Eigen::MatrixXd g_full;        // n x m conditional-expectation channel
  Eigen::VectorXd w;             // n balancing weights
  Eigen::VectorXd ytilde;        // l evaluation points
  Eigen::MatrixXd nw;            // l x n1 outcome-space NW weights
  std::vector<int> source_rows;  // sample rows with r = 1, in order
  Eigen::MatrixXd phi;           // l x m kernel matrix
  int mass_violations = 0;       // rows whose quadrature mass fell below 0.99

  int l() const { return static_cast<int>(ytilde.size()); }
  int m() const { return static_cast<int>(grid.size()); }

  // E{f(Y) | x_i} for f given on the grid.
  double channel_expect(int row, const Eigen::VectorXd& f_grid) const {
    return g_full.row(row).dot(grid_weights.cwiseProduct(f_grid));
  }
};

// Kernel matrix at given balancing weights; linear in each rho_grid entry.
inline Eigen::MatrixXd assemble_phi(const FlexibleDiscretization& d) {
  const auto n1 = static_cast<Eigen::Index>(d.source_rows.size());
  Eigen::MatrixXd weighted_src(n1, d.m());
  for (Eigen::Index k = 0; k < n1; ++k) {
    weighted_src.row(k) =
        d.w[d.source_rows[k]] * d.g_full.row(d.source_rows[k]);
  }
  return (d.nw * weighted_src) * d.rho_grid.asDiagonal();
}

namespace detail {

inline void finish_discretization(FlexibleDiscretization& d,
                                  const StackedSample& s) {
  const Eigen::VectorXd rho2 = d.rho_grid.cwiseProduct(d.rho_grid);
  const Eigen::VectorXd e1 =
      d.g_full * d.grid_weights.cwiseProduct(d.rho_grid);
  const Eigen::VectorXd e2 = d.g_full * d.grid_weights.cwiseProduct(rho2);
  const double shift = s.pi / (1.0 - s.pi);
  d.w.resize(s.n());
  for (int i = 0; i < s.n(); ++i) {
    const double denom = e2[i] + shift * e1[i];
    if (!(denom > 0.0) || !std::isfinite(denom)) {
      throw ComputeError("discretize: non-positive weight denominator at row " +
                         std::to_string(i));
    }
    d.w[i] = 1.0 / denom;
  }
  d.phi = assemble_phi(d);
}

}  // namespace detail

// Parametric path: channel = working conditional density on the rule nodes.
inline FlexibleDiscretization discretize_doubly(
    const StackedSample& s, const DensityRatioModel& ratio,
    const ConditionalOutcomeModel& model, const KernelSpec& kspec,
    const QuadratureRule& rule, bool strict_mass = false) {
  FlexibleDiscretization d;
  d.grid = rule.nodes;
  d.grid_weights = rule.weights;
  d.rho_grid.resize(rule.m());
  for (int j = 0; j < rule.m(); ++j) d.rho_grid[j] = ratio(rule.nodes[j]);
  d.g_full = density_matrix(model, s.x, rule);

  const Eigen::VectorXd mass = d.g_full * d.grid_weights;
  for (int i = 0; i < s.n(); ++i) {
    if (mass[i] < 0.99) {
      if (strict_mass) {
        throw TruncationError("discretize_doubly: quadrature mass " +
                              std::to_string(mass[i]) + " < 0.99 at row " +
                              std::to_string(i));
      }
      ++d.mass_violations;
    }
  }

  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] == 1) d.source_rows.push_back(i);
  }
  Eigen::VectorXd source_y(s.n1);
  for (int k = 0; k < s.n1; ++k) source_y[k] = s.y[d.source_rows[k]];
  d.ytilde = dedup_sorted_source_outcomes(s);
  d.nw = nw_outcome_matrix(kspec, source_y, d.ytilde);
  detail::finish_discretization(d, s);
  return d;
}

// Nonparametric path: channel = covariate-space NW weights, grid = source
// outcomes, unit grid weights.
inline FlexibleDiscretization discretize_singly(const StackedSample& s,
                                                const DensityRatioModel& ratio,
                                                const NonparamRegressor& reg,
                                                const KernelSpec& kspec) {
  FlexibleDiscretization d;
  d.grid = reg.source_y;
  d.grid_weights = Eigen::VectorXd::Ones(reg.source_y.size());
  d.rho_grid.resize(reg.source_y.size());
  for (Eigen::Index k = 0; k < reg.source_y.size(); ++k) {
    d.rho_grid[k] = ratio(reg.source_y[k]);
  }
  d.g_full = nw_weight_matrix(reg, s.x);

  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] == 1) d.source_rows.push_back(i);
  }
  d.ytilde = dedup_sorted_source_outcomes(s);
  d.nw = nw_outcome_matrix(kspec, reg.source_y, d.ytilde);
  detail::finish_discretization(d, s);
  return d;
}

// Right-hand side of the discretized system. Mean target: the evaluation
// points themselves. General U: the NW smooth of
// U(x_i, y, theta) - w_i E{U(x_i, Y, theta) rho*^2(Y) | x_i} over source rows
// (both sides of the estimating equation divided by the NW denominator).
inline Eigen::VectorXd fredholm_target(const FlexibleDiscretization& d,
                                       const USlice& u_slice = {}) {
  if (!u_slice) return d.ytilde;
  const auto n1 = static_cast<Eigen::Index>(d.source_rows.size());
  const Eigen::VectorXd rho2w =
      d.grid_weights.cwiseProduct(d.rho_grid.cwiseProduct(d.rho_grid));
  Eigen::VectorXd adj(n1);  // w_i E{U rho*^2 | x_i} per source row
  Eigen::VectorXd u_grid(d.m());
  for (Eigen::Index k = 0; k < n1; ++k) {
    const int row = d.source_rows[k];
    for (int j = 0; j < d.m(); ++j) u_grid[j] = u_slice(row, d.grid[j]);
    adj[k] = d.w[row] * d.g_full.row(row).dot(rho2w.cwiseProduct(u_grid));
  }
  Eigen::VectorXd target(d.l());
  for (int e = 0; e < d.l(); ++e) {
    double val = 0.0;
    for (Eigen::Index k = 0; k < n1; ++k) {
      val += d.nw(e, k) * (u_slice(d.source_rows[k], d.ytilde[e]) - adj[k]);
    }
    target[e] = val;
  }
  return target;
}

inline DiscretizedFredholm to_fredholm(const FlexibleDiscretization& d,
                                       const USlice& u_slice = {}) {
  DiscretizedFredholm p;
  p.phi = d.phi;
  p.quad_weights = d.grid_weights;
  p.target = fredholm_target(d, u_slice);
  return p;
}

inline DiscretizedFredholm build_doubly_kernel(
    const StackedSample& s, const DensityRatioModel& ratio,
    const ConditionalOutcomeModel& model, const KernelSpec& kspec,
    const QuadratureRule& rule, const USlice& u_slice = {}) {
  return to_fredholm(discretize_doubly(s, ratio, model, kspec, rule), u_slice);
}

inline DiscretizedFredholm build_singly_kernel(const StackedSample& s,
                                               const DensityRatioModel& ratio,
                                               const NonparamRegressor& reg,
                                               const KernelSpec& kspec,
                                               const USlice& u_slice = {}) {
  return to_fredholm(discretize_singly(s, ratio, reg, kspec), u_slice);
}

}  // namespace labelshift

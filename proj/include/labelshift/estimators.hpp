#pragma once
// Target-population estimators: shift-dependent, doubly-flexible,
// singly-flexible, and the oracle, for the mean and for quantiles, with
// plugin and stratified-bootstrap standard errors.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <labelshift/errors.hpp>
#include <labelshift/fredholm.hpp>
#include <labelshift/kernels.hpp>
#include <labelshift/models.hpp>
#include <labelshift/normal.hpp>
#include <labelshift/quadrature.hpp>
#include <labelshift/rng.hpp>
#include <labelshift/sampling.hpp>

namespace labelshift {

struct Estimand {
  enum class Kind { Mean, Quantile };
  Kind kind = Kind::Mean;
  double level = 0.5;  // quantile level t, used when kind == Quantile

  static Estimand mean() { return {}; }
  static Estimand quantile(double t) { return {Kind::Quantile, t}; }
};

inline void validate(const Estimand& e) {
  if (e.kind == Estimand::Kind::Quantile &&
      !(e.level > 0.0 && e.level < 1.0)) {
    throw ConfigError("Estimand: quantile level must lie strictly in (0,1)");
  }
}

enum class SeMethod { None, Plugin, Bootstrap };

struct SeSpec {
  SeMethod method = SeMethod::None;
  int bootstrap_b = 200;
  std::uint64_t seed = 0;
};

struct VectorSummary {
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  double mean = std::numeric_limits<double>::quiet_NaN();

  static VectorSummary of(const Eigen::VectorXd& v) {
    VectorSummary s;
    if (v.size() > 0) {
      s.min = v.minCoeff();
      s.max = v.maxCoeff();
      s.mean = v.mean();
    }
    return s;
  }
};

struct EstimateResult {
  double theta = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> se;
  std::optional<std::pair<double, double>> ci;
  SeMethod se_method = SeMethod::None;
  SolveDiagnostics solver;  // zero iterations when no linear solve is involved
  VectorSummary bhat;       // empty for shift-dependent and oracle
  bool ci_excludes_theta = false;  // pathological bootstrap percentile CI
};

struct SolverOptions {
  double step = 0.0;  // <= 0 selects the default 1/l
  double tol = 1e-8;
  int max_iter = 50000;
  bool spectral_guard = false;
};

struct FlexibleConfig {
  KernelSpec kernel{KernelFamily::Gaussian, 0.0};  // <= 0: n1^(-1/3)
  QuadratureRule rule;  // parametric path; empty selects 50 nodes on [-5, 5]
  SolverOptions solver;
  SeSpec se;
  double ci_level = 0.95;
  bool strict_mass = false;
};

// ---------------------------------------------------------------------------
// Small statistical helpers

inline double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) throw ConfigError("sample_sd: need at least two values");
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() /
                   static_cast<double>(v.size() - 1));
}

// t-th empirical quantile with the generalized-inverse convention
// inf{y : F(y) >= t}.
inline double empirical_quantile(std::vector<double> v, double t) {
  if (v.empty()) throw ConfigError("empirical_quantile: empty sample");
  if (!(t > 0.0 && t < 1.0)) {
    throw ConfigError("empirical_quantile: level must lie strictly in (0,1)");
  }
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  auto k = static_cast<long>(std::ceil(n * t - 1.0 - 1e-9));
  k = std::clamp<long>(k, 0, static_cast<long>(v.size()) - 1);
  return v[static_cast<std::size_t>(k)];
}

// ---------------------------------------------------------------------------
// Estimating-equation root finder

// Bisection for a monotone non-increasing psi on [lo, hi]; returns the
// smallest point where psi crosses or touches zero, to within
// 1e-6 * (hi - lo). psi may be piecewise constant (quantile case).
inline double solve_estimating_equation(
    const std::function<double(double)>& psi,
    std::pair<double, double> bracket) {
  auto [lo, hi] = bracket;
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ConfigError("solve_estimating_equation: invalid bracket");
  }
  const double flo = psi(lo);
  const double fhi = psi(hi);
  if (!std::isfinite(flo) || !std::isfinite(fhi)) {
    throw ComputeError("solve_estimating_equation: non-finite psi value");
  }
  if (!(flo >= 0.0 && fhi <= 0.0)) {
    throw ComputeError(
        "solve_estimating_equation: no sign change on the bracket");
  }
  if (flo == 0.0) return lo;
  const double width_tol = 1e-6 * (hi - lo);
  while (hi - lo > width_tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (psi(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

namespace detail {

// Retry with a geometrically widened bracket, at most four widenings.
inline double solve_with_widening(const std::function<double(double)>& psi,
                                  double lo, double hi) {
  for (int attempt = 0;; ++attempt) {
    try {
      return solve_estimating_equation(psi, {lo, hi});
    } catch (const ComputeError&) {
      if (attempt >= 4) throw;
      const double width = hi - lo;
      lo -= width;
      hi += width;
    }
  }
}

inline double ci_half_width(double level, double se) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("confidence level must lie strictly in (0,1)");
  }
  return normal_quantile(0.5 * (1.0 + level)) * se;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stratified bootstrap

// Resample n1 rows from the source stratum and n0 from the target stratum,
// with replacement; source rows come first in the resampled sample.
inline StackedSample stratified_resample(const StackedSample& s,
                                         std::mt19937_64& rng) {
  std::vector<int> src, tgt;
  src.reserve(s.n1);
  tgt.reserve(s.n0);
  for (int i = 0; i < s.n(); ++i) {
    (s.r[i] == 1 ? src : tgt).push_back(i);
  }
  Eigen::MatrixXd x(s.n(), s.d());
  Eigen::VectorXi r(s.n());
  Eigen::VectorXd y(s.n());
  std::uniform_int_distribution<int> pick_src(0, s.n1 - 1);
  std::uniform_int_distribution<int> pick_tgt(0, s.n0 - 1);
  for (int k = 0; k < s.n1; ++k) {
    const int i = src[static_cast<std::size_t>(pick_src(rng))];
    x.row(k) = s.x.row(i);
    r[k] = 1;
    y[k] = s.y[i];
  }
  for (int k = 0; k < s.n0; ++k) {
    const int i = tgt[static_cast<std::size_t>(pick_tgt(rng))];
    x.row(s.n1 + k) = s.x.row(i);
    r[s.n1 + k] = 0;
    y[s.n1 + k] = absent_outcome();
  }
  return finalize_sample(std::move(x), std::move(r), std::move(y));
}

struct BootstrapSummary {
  double se = std::numeric_limits<double>::quiet_NaN();
  std::pair<double, double> ci{std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::quiet_NaN()};
  int failures = 0;
  std::vector<double> thetas;
};

// Re-runs the full estimation pipeline on B stratified resamples.
// Deterministic given (b, seed); failed resamples are skipped and counted,
// with at most 20% tolerated.
inline BootstrapSummary bootstrap_pipeline(
    const StackedSample& s,
    const std::function<double(const StackedSample&)>& point, int b,
    std::uint64_t seed, double level) {
  if (b < 20) throw ConfigError("bootstrap: B must be at least 20");
  if (!point) throw ConfigError("bootstrap: missing point-estimate pipeline");
  BootstrapSummary out;
  out.thetas.reserve(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const StackedSample sb = stratified_resample(s, rng);
    try {
      out.thetas.push_back(point(sb));
    } catch (const ComputeError&) {
      ++out.failures;
    }
  }
  if (out.thetas.size() < static_cast<std::size_t>(0.8 * b)) {
    throw ComputeError("bootstrap: more than 20% of resamples failed (" +
                       std::to_string(out.failures) + " of " +
                       std::to_string(b) + ")");
  }
  const Eigen::Map<const Eigen::VectorXd> t(out.thetas.data(),
                                            static_cast<Eigen::Index>(
                                                out.thetas.size()));
  out.se = sample_sd(t);
  out.ci = {empirical_quantile(out.thetas, 0.5 * (1.0 - level)),
            empirical_quantile(out.thetas, 0.5 * (1.0 + level))};
  return out;
}

struct EstimatorContext {
  std::function<double(const StackedSample&)> point;  // full re-estimation
  std::optional<double> plugin_se;  // precomputed; mean targets only
};

inline double estimate_se(const StackedSample& s, const EstimatorContext& ctx,
                          const SeSpec& spec) {
  switch (spec.method) {
    case SeMethod::Plugin:
      if (!ctx.plugin_se) {
        throw ConfigError("estimate_se: plugin SE unavailable (mean targets only)");
      }
      return *ctx.plugin_se;
    case SeMethod::Bootstrap:
      return bootstrap_pipeline(s, ctx.point, spec.bootstrap_b, spec.seed,
                                0.95)
          .se;
    case SeMethod::None:
      break;
  }
  throw ConfigError("estimate_se: no method selected");
}

namespace detail {

// Attach SE/CI to a point estimate, re-running `point` on resamples for the
// bootstrap. `plugin_se` empty means plugin is unavailable for this target.
inline void attach_se(EstimateResult& out, const StackedSample& s,
                      const SeSpec& se, double level,
                      const std::optional<double>& plugin_se,
                      const std::function<double(const StackedSample&)>& point) {
  switch (se.method) {
    case SeMethod::None:
      return;
    case SeMethod::Plugin: {
      if (!plugin_se) {
        throw ConfigError("plugin SE is available for the mean target only");
      }
      out.se = *plugin_se;
      const double hw = ci_half_width(level, *plugin_se);
      out.ci = {out.theta - hw, out.theta + hw};
      out.se_method = SeMethod::Plugin;
      return;
    }
    case SeMethod::Bootstrap: {
      const BootstrapSummary bs =
          bootstrap_pipeline(s, point, se.bootstrap_b, se.seed, level);
      out.se = bs.se;
      out.ci = bs.ci;
      out.se_method = SeMethod::Bootstrap;
      out.ci_excludes_theta =
          out.theta < bs.ci.first || out.theta > bs.ci.second;
      return;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shift-dependent estimator

// Per-unit terms (r_i/pi) rho*(y_i) y_i; their average is the estimator.
inline Eigen::VectorXd shift_dependent_terms(const Eigen::VectorXi& r,
                                             const Eigen::VectorXd& y,
                                             const DensityRatioModel& ratio,
                                             double pi) {
  if (r.size() != y.size() || r.size() < 1) {
    throw ConfigError("shift_dependent_terms: r and y sizes must match");
  }
  if (!(pi > 0.0 && pi <= 1.0)) {
    throw ConfigError("shift_dependent_terms: pi must lie in (0, 1]");
  }
  Eigen::VectorXd terms = Eigen::VectorXd::Zero(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (r[i] == 1) terms[i] = ratio(y[i]) * y[i] / pi;
  }
  return terms;
}

inline DensityRatioModel maybe_renormalize(const DensityRatioModel& ratio,
                                           const StackedSample& s) {
  return ratio.normalized ? normalize_ratio(ratio, s) : ratio;
}

inline EstimateResult shift_dependent(const StackedSample& s,
                                      const DensityRatioModel& ratio,
                                      const Estimand& est,
                                      const SeSpec& se = {},
                                      double ci_level = 0.95) {
  validate(s);
  validate(est);
  EstimateResult out;
  std::optional<double> plugin_se;
  if (est.kind == Estimand::Kind::Mean) {
    const Eigen::VectorXd terms =
        shift_dependent_terms(s.r, s.y, ratio, s.pi);
    out.theta = terms.mean();
    plugin_se = sample_sd(terms) / std::sqrt(static_cast<double>(s.n()));
  } else {
    const double t = est.level;
    double ylo = std::numeric_limits<double>::infinity();
    double yhi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < s.n(); ++i) {
      if (s.r[i] == 1) {
        ylo = std::min(ylo, s.y[i]);
        yhi = std::max(yhi, s.y[i]);
      }
    }
    const auto psi = [&](double theta) {
      double acc = 0.0;
      for (int i = 0; i < s.n(); ++i) {
        if (s.r[i] == 1) {
          acc += ratio(s.y[i]) * (t - (s.y[i] < theta ? 1.0 : 0.0)) / s.pi;
        }
      }
      return acc / s.n();
    };
    out.theta = detail::solve_with_widening(psi, ylo - 1.0, yhi + 1.0);
  }
  const auto point = [&ratio, &est](const StackedSample& sb) {
    return shift_dependent(sb, maybe_renormalize(ratio, sb), est).theta;
  };
  detail::attach_se(out, s, se, ci_level, plugin_se, point);
  return out;
}

// ---------------------------------------------------------------------------
// Oracle estimator (synthetic data only: uses the hidden target outcomes)

inline EstimateResult oracle(const SyntheticSample& synth, const Estimand& est,
                             const SeSpec& se = {}, double ci_level = 0.95) {
  validate(est);
  const Eigen::VectorXd& hy = synth.hidden_target_y;
  if (hy.size() < 1) {
    throw ConfigError("oracle: hidden target outcomes are unavailable");
  }
  EstimateResult out;
  std::optional<double> plugin_se;
  const std::vector<double> values(hy.data(), hy.data() + hy.size());
  if (est.kind == Estimand::Kind::Mean) {
    out.theta = hy.mean();
    plugin_se = sample_sd(hy) / std::sqrt(static_cast<double>(hy.size()));
  } else {
    out.theta = empirical_quantile(values, est.level);
  }

  switch (se.method) {
    case SeMethod::None:
      break;
    case SeMethod::Plugin: {
      if (!plugin_se) {
        throw ConfigError("plugin SE is available for the mean target only");
      }
      out.se = *plugin_se;
      const double hw = detail::ci_half_width(ci_level, *plugin_se);
      out.ci = {out.theta - hw, out.theta + hw};
      out.se_method = SeMethod::Plugin;
      break;
    }
    case SeMethod::Bootstrap: {
      if (se.bootstrap_b < 20) {
        throw ConfigError("bootstrap: B must be at least 20");
      }
      std::vector<double> thetas;
      thetas.reserve(static_cast<std::size_t>(se.bootstrap_b));
      std::uniform_int_distribution<Eigen::Index> pick(0, hy.size() - 1);
      for (int b = 0; b < se.bootstrap_b; ++b) {
        std::mt19937_64 rng(mix_seed(se.seed, static_cast<std::uint64_t>(b)));
        std::vector<double> resampled(values.size());
        for (auto& v : resampled) v = hy[pick(rng)];
        thetas.push_back(est.kind == Estimand::Kind::Mean
                             ? Eigen::Map<Eigen::VectorXd>(resampled.data(),
                                                           static_cast<Eigen::Index>(
                                                               resampled.size()))
                                   .mean()
                             : empirical_quantile(resampled, est.level));
      }
      const Eigen::Map<const Eigen::VectorXd> t(
          thetas.data(), static_cast<Eigen::Index>(thetas.size()));
      out.se = sample_sd(t);
      out.ci = {empirical_quantile(thetas, 0.5 * (1.0 - ci_level)),
                empirical_quantile(thetas, 0.5 * (1.0 + ci_level))};
      out.se_method = SeMethod::Bootstrap;
      out.ci_excludes_theta =
          out.theta < out.ci->first || out.theta > out.ci->second;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flexible estimators (shared machinery)

// theta assembly of the flexible estimators given the b-hat vector:
// n^{-1} sum_i [ (r_i/pi) rho*(y_i) (y_i - bhat_i) + ((1-r_i)/(1-pi)) bhat_i ].
// rho_y holds rho*(y_i) on source rows (ignored on target rows).
inline double flexible_theta(const StackedSample& s,
                             const Eigen::VectorXd& rho_y,
                             const Eigen::VectorXd& bhat) {
  if (rho_y.size() != s.n() || bhat.size() != s.n()) {
    throw ConfigError("flexible_theta: vector sizes must match the sample");
  }
  double acc = 0.0;
  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] == 1) {
      acc += rho_y[i] * (s.y[i] - bhat[i]) / s.pi;
    } else {
      acc += bhat[i] / (1.0 - s.pi);
    }
  }
  return acc / s.n();
}

namespace detail {

// Precomputed linear maps for repeated solves and back-substitution:
//   e_a u = diag(w) G diag(gw . rho) u          (b-hat from a-hat)
//   e_u u = diag(w) G diag(gw . rho^2) u        (b-hat U-term)
//   d_adj u = N diag(w_src) G_src diag(gw . rho^2) u   (target adjustment)
struct FlexPipeline {
  FlexibleDiscretization d;
  Eigen::MatrixXd h;  // Phi' Phi
  Eigen::MatrixXd e_a;
  Eigen::MatrixXd e_u;
  Eigen::MatrixXd d_adj;
  Eigen::VectorXd rho_y;  // rho*(y_i) on source rows, zero elsewhere
  double step = 0.0;
};

inline FlexPipeline make_pipeline(FlexibleDiscretization d,
                                  const StackedSample& s,
                                  const DensityRatioModel& ratio,
                                  const SolverOptions& solver) {
  FlexPipeline p;
  p.rho_y = Eigen::VectorXd::Zero(s.n());
  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] == 1) p.rho_y[i] = ratio(s.y[i]);
  }
  const Eigen::VectorXd gw_rho = d.grid_weights.cwiseProduct(d.rho_grid);
  const Eigen::VectorXd gw_rho2 = gw_rho.cwiseProduct(d.rho_grid);
  p.e_a = d.w.asDiagonal() * (d.g_full * gw_rho.asDiagonal());
  p.e_u = d.w.asDiagonal() * (d.g_full * gw_rho2.asDiagonal());
  const auto n1 = static_cast<Eigen::Index>(d.source_rows.size());
  Eigen::MatrixXd weighted_src(n1, d.m());
  for (Eigen::Index k = 0; k < n1; ++k) {
    weighted_src.row(k) =
        d.w[d.source_rows[k]] * d.g_full.row(d.source_rows[k]);
  }
  p.d_adj = (d.nw * weighted_src) * gw_rho2.asDiagonal();
  p.h = d.phi.transpose() * d.phi;
  if (solver.step > 0.0) {
    p.step = solver.step;
  } else if (solver.spectral_guard) {
    const double sigma =
        spectral_norm(d.phi * d.grid_weights.cwiseSqrt().asDiagonal());
    p.step = 1.0 / (sigma * sigma + 1e-12);
  } else {
    p.step = 1.0 / d.l();
  }
  p.d = std::move(d);
  return p;
}

// psi(theta) of the general-U estimating equation given U on source outcomes.
inline double flexible_psi(const StackedSample& s,
                           const Eigen::VectorXd& rho_y,
                           const Eigen::VectorXd& u_y,
                           const Eigen::VectorXd& bhat) {
  double acc = 0.0;
  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] == 1) {
      acc += rho_y[i] * (u_y[i] - bhat[i]) / s.pi;
    } else {
      acc += bhat[i] / (1.0 - s.pi);
    }
  }
  return acc / s.n();
}

inline EstimateResult flexible_estimate(
    const StackedSample& s, const FlexPipeline& p, const Estimand& est,
    const FlexibleConfig& cfg,
    const std::function<double(const StackedSample&)>& point_rebuild) {
  EstimateResult out;
  const auto& d = p.d;
  std::optional<double> plugin_se;
  Eigen::VectorXd bhat;

  if (est.kind == Estimand::Kind::Mean) {
    const Eigen::VectorXd& target = d.ytilde;
    auto [a, diag] = landweber_core(
        p.h, d.phi.transpose() * target, target.squaredNorm(), d.grid_weights,
        p.step, cfg.solver.tol, cfg.solver.max_iter,
        Eigen::VectorXd::Zero(d.m()));
    bhat = p.e_a * a;
    out.theta = flexible_theta(s, p.rho_y, bhat);
    out.solver = diag;
    // Influence contribution sqrt(pi) * phi_eff per unit; SE = sd / sqrt(n1).
    Eigen::VectorXd z(s.n());
    for (int i = 0; i < s.n(); ++i) {
      const double phi_eff =
          s.r[i] == 1 ? p.rho_y[i] * (s.y[i] - bhat[i]) / s.pi
                      : (bhat[i] - out.theta) / (1.0 - s.pi);
      z[i] = std::sqrt(s.pi) * phi_eff;
    }
    plugin_se = sample_sd(z) / std::sqrt(static_cast<double>(s.n1));
  } else {
    const double t = est.level;
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(d.m());
    SolveDiagnostics last;
    const auto evaluate = [&](double theta) {
      Eigen::VectorXd u_grid(d.m());
      for (int j = 0; j < d.m(); ++j) {
        u_grid[j] = t - (d.grid[j] < theta ? 1.0 : 0.0);
      }
      Eigen::VectorXd target(d.l());
      for (int e = 0; e < d.l(); ++e) {
        target[e] = t - (d.ytilde[e] < theta ? 1.0 : 0.0);
      }
      target -= p.d_adj * u_grid;
      auto [a, diag] =
          landweber_core(p.h, d.phi.transpose() * target,
                         target.squaredNorm(), d.grid_weights, p.step,
                         cfg.solver.tol, cfg.solver.max_iter, warm);
      warm = a;
      last = diag;
      bhat = p.e_u * u_grid + p.e_a * a;
      Eigen::VectorXd u_y = Eigen::VectorXd::Zero(s.n());
      for (int i = 0; i < s.n(); ++i) {
        if (s.r[i] == 1) u_y[i] = t - (s.y[i] < theta ? 1.0 : 0.0);
      }
      return flexible_psi(s, p.rho_y, u_y, bhat);
    };
    out.theta = solve_with_widening(evaluate, d.ytilde[0] - 1.0,
                                    d.ytilde[d.l() - 1] + 1.0);
    evaluate(out.theta);  // leave bhat and diagnostics at the returned root
    out.solver = last;
  }
  out.bhat = VectorSummary::of(bhat);
  attach_se(out, s, cfg.se, cfg.ci_level, plugin_se, point_rebuild);
  return out;
}

inline KernelSpec resolve_kernel(KernelSpec k, int n1) {
  if (k.bandwidth <= 0.0) k.bandwidth = default_bandwidth_1d(n1);
  validate(k);
  return k;
}

}  // namespace detail

// Regressor over the source rows of a (re)sample, keeping the kernel.
inline NonparamRegressor rebuild_regressor(const NonparamRegressor& reg,
                                           const StackedSample& s) {
  NonparamRegressor out;
  out.kernel = reg.kernel;
  out.centers.resize(s.n1, s.d());
  out.source_y.resize(s.n1);
  int k = 0;
  for (int i = 0; i < s.n(); ++i) {
    if (s.r[i] != 1) continue;
    out.centers.row(k) = s.x.row(i);
    out.source_y[k] = s.y[i];
    ++k;
  }
  return out;
}

inline EstimateResult doubly_flexible(const StackedSample& s,
                                      const DensityRatioModel& ratio,
                                      const ConditionalOutcomeModel& model,
                                      const Estimand& est,
                                      const FlexibleConfig& cfg = {}) {
  validate(s);
  validate(est);
  const QuadratureRule rule =
      cfg.rule.nodes.size() > 0 ? cfg.rule : gauss_legendre(50, -5.0, 5.0);
  const KernelSpec kspec = detail::resolve_kernel(cfg.kernel, s.n1);
  auto pipeline = detail::make_pipeline(
      discretize_doubly(s, ratio, model, kspec, rule, cfg.strict_mass), s,
      ratio, cfg.solver);
  const auto point = [&](const StackedSample& sb) {
    const DensityRatioModel ratio_b = maybe_renormalize(ratio, sb);
    const ConditionalOutcomeModel model_b =
        model.fitted ? fit_gaussian_linear(sb, model.feature_map) : model;
    FlexibleConfig c2 = cfg;
    c2.se.method = SeMethod::None;
    return doubly_flexible(sb, ratio_b, model_b, est, c2).theta;
  };
  return detail::flexible_estimate(s, pipeline, est, cfg, point);
}

inline EstimateResult singly_flexible(const StackedSample& s,
                                      const DensityRatioModel& ratio,
                                      const NonparamRegressor& reg,
                                      const Estimand& est,
                                      const FlexibleConfig& cfg = {}) {
  validate(s);
  validate(est);
  const KernelSpec kspec = detail::resolve_kernel(cfg.kernel, s.n1);
  auto pipeline = detail::make_pipeline(
      discretize_singly(s, ratio, reg, kspec), s, ratio, cfg.solver);
  const auto point = [&](const StackedSample& sb) {
    const DensityRatioModel ratio_b = maybe_renormalize(ratio, sb);
    const NonparamRegressor reg_b = rebuild_regressor(reg, sb);
    FlexibleConfig c2 = cfg;
    c2.se.method = SeMethod::None;
    return singly_flexible(sb, ratio_b, reg_b, est, c2).theta;
  };
  return detail::flexible_estimate(s, pipeline, est, cfg, point);
}

}  // namespace labelshift

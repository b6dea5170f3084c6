#pragma once

// Monte Carlo study harness for the synthetic label-shift design: runs the
// seven study estimators over independent replicates, aggregates accuracy
// and coverage metrics, and serializes result tables.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <labelshift/estimators.hpp>
#include <labelshift/rng.hpp>

namespace labelshift {

// ---------------------------------------------------------------------------
// Estimator identifiers

enum class EstimatorId {
  ShiftDepMis,   // shift-dependent, misspecified renormalized ratio
  DoublyMis,     // doubly flexible, misspecified ratio + refit transformed model
  SinglyMis,     // singly flexible, misspecified ratio + covariate regressor
  ShiftDepTrue,  // shift-dependent, true ratio
  DoublyTrue,    // doubly flexible, true ratio + refit linear model
  SinglyTrue,    // singly flexible, true ratio
  Oracle,        // mean/quantile of the hidden target outcomes
};

inline const std::array<EstimatorId, 7>& all_estimator_ids() {
  static const std::array<EstimatorId, 7> ids = {
      EstimatorId::ShiftDepMis,  EstimatorId::DoublyMis,
      EstimatorId::SinglyMis,    EstimatorId::ShiftDepTrue,
      EstimatorId::DoublyTrue,   EstimatorId::SinglyTrue,
      EstimatorId::Oracle,
  };
  return ids;
}

inline std::string to_string(EstimatorId id) {
  switch (id) {
    case EstimatorId::ShiftDepMis: return "shift-dep-mis";
    case EstimatorId::DoublyMis: return "doubly-mis";
    case EstimatorId::SinglyMis: return "singly-mis";
    case EstimatorId::ShiftDepTrue: return "shift-dep-true";
    case EstimatorId::DoublyTrue: return "doubly-true";
    case EstimatorId::SinglyTrue: return "singly-true";
    case EstimatorId::Oracle: return "oracle";
  }
  throw ConfigError("to_string: unknown estimator id");
}

inline EstimatorId parse_estimator_id(const std::string& token) {
  for (EstimatorId id : all_estimator_ids()) {
    if (to_string(id) == token) return id;
  }
  throw ConfigError("parse_estimator_id: unknown estimator '" + token + "'");
}

// Estimand tokens: "mean" or "quantile:<level>".
inline std::string to_string(const Estimand& est) {
  if (est.kind == Estimand::Kind::Mean) return "mean";
  char buf[40];
  std::snprintf(buf, sizeof buf, "quantile:%.12g", est.level);
  return buf;
}

inline Estimand parse_estimand(const std::string& token) {
  if (token == "mean") return Estimand::mean();
  const std::string prefix = "quantile:";
  if (token.rfind(prefix, 0) == 0) {
    double level = 0.0;
    try {
      std::size_t pos = 0;
      level = std::stod(token.substr(prefix.size()), &pos);
      if (pos != token.size() - prefix.size()) {
        throw std::invalid_argument("trailing characters");
      }
    } catch (const std::exception&) {
      throw ConfigError("parse_estimand: bad quantile level in '" + token +
                        "'");
    }
    const Estimand est = Estimand::quantile(level);
    validate(est);
    return est;
  }
  throw ConfigError("parse_estimand: unknown estimand '" + token + "'");
}

// ---------------------------------------------------------------------------
// Study configuration

// Solver settings the study uses by default. The bare solver default
// (fixed small step, looser tolerance) leaves the iteration far from the
// least-squares solution on the study's ill-conditioned systems and the
// flexible estimators inherit a visible bias; the spectral step guard plus
// a tighter tolerance removes it at moderate cost.
inline SolverOptions study_solver_defaults() {
  SolverOptions o;
  o.tol = 1e-10;
  o.spectral_guard = true;
  return o;
}

struct SimConfig {
  int n = 1000;
  int replicates = 1;
  std::uint64_t seed = 0;
  std::vector<EstimatorId> estimators{all_estimator_ids().begin(),
                                      all_estimator_ids().end()};
  std::vector<Estimand> estimands{Estimand::mean(), Estimand::quantile(0.5)};
  double bandwidth_scale = 2.5;  // covariate kernel scale, singly path
  KernelSpec kernel{KernelFamily::Gaussian, 0.0};  // <= 0: n1^(-1/3)
  QuadratureRule rule;  // empty selects 50 Gauss-Legendre nodes on [-5, 5]
  SolverOptions solver = study_solver_defaults();
  // Per-estimator override; absent entries default by estimand:
  // mean -> plugin, quantile -> bootstrap.
  std::map<EstimatorId, SeMethod> se_method;
  int bootstrap_b = 200;
  double ci_level = 0.95;
  int threads = 0;  // 0: hardware concurrency
};

inline SeMethod resolve_se_method(const SimConfig& config, EstimatorId id,
                                  const Estimand& est) {
  const auto it = config.se_method.find(id);
  if (it != config.se_method.end()) return it->second;
  return est.kind == Estimand::Kind::Mean ? SeMethod::Plugin
                                          : SeMethod::Bootstrap;
}

inline void validate(const SimConfig& config) {
  if (config.n < 10) {
    throw ConfigError("SimConfig: n must be >= 10");
  }
  if (config.replicates < 1) {
    throw ConfigError("SimConfig: replicates must be >= 1");
  }
  if (config.estimators.empty()) {
    throw ConfigError("SimConfig: estimator set must be non-empty");
  }
  for (std::size_t i = 0; i < config.estimators.size(); ++i) {
    for (std::size_t j = i + 1; j < config.estimators.size(); ++j) {
      if (config.estimators[i] == config.estimators[j]) {
        throw ConfigError("SimConfig: duplicate estimator '" +
                          to_string(config.estimators[i]) + "'");
      }
    }
  }
  if (config.estimands.empty()) {
    throw ConfigError("SimConfig: estimand list must be non-empty");
  }
  for (const auto& est : config.estimands) validate(est);
  if (!(config.bandwidth_scale > 0.0)) {
    throw ConfigError("SimConfig: bandwidth_scale must be positive");
  }
  if (!(config.ci_level > 0.0 && config.ci_level < 1.0)) {
    throw ConfigError("SimConfig: ci_level must lie strictly in (0,1)");
  }
  if (config.threads < 0) {
    throw ConfigError("SimConfig: threads must be >= 0");
  }
  bool any_bootstrap = false;
  for (const auto& est : config.estimands) {
    for (EstimatorId id : config.estimators) {
      const SeMethod m = resolve_se_method(config, id, est);
      if (m == SeMethod::Plugin && est.kind == Estimand::Kind::Quantile) {
        throw ConfigError(
            "SimConfig: plugin standard errors are mean-only; use bootstrap "
            "for quantile estimands");
      }
      if (m == SeMethod::Bootstrap) any_bootstrap = true;
    }
  }
  if (any_bootstrap && config.bootstrap_b < 20) {
    throw ConfigError("SimConfig: bootstrap_b must be >= 20");
  }
}

// True value of a study estimand under the synthetic design.
inline double design_truth(const Estimand& est) {
  return est.kind == Estimand::Kind::Mean ? 1.0
                                          : paper_design_quantile(est.level);
}

// ---------------------------------------------------------------------------
// Replicates

struct ReplicateResult {
  int rep = -1;
  bool failed = false;
  std::string error;
  // cells[estimand index][estimator index], aligned with the config lists;
  // empty when the replicate failed.
  std::vector<std::vector<EstimateResult>> cells;
};

namespace detail {

// Working models shared across the estimators of one replicate. The fitted
// models and the regressor are built lazily so estimator subsets never pay
// for (or fail on) inputs they do not use.
struct WorkingModels {
  DensityRatioModel ratio_mis;
  DensityRatioModel ratio_true;
  std::optional<ConditionalOutcomeModel> model_mis;
  std::optional<ConditionalOutcomeModel> model_true;
  std::optional<NonparamRegressor> regressor;
};

inline const ConditionalOutcomeModel& misspec_model(WorkingModels& wm,
                                                    const StackedSample& s) {
  if (!wm.model_mis) {
    wm.model_mis = fit_gaussian_linear(s, paper_feature_transform);
  }
  return *wm.model_mis;
}

inline const ConditionalOutcomeModel& true_family_model(
    WorkingModels& wm, const StackedSample& s) {
  if (!wm.model_true) wm.model_true = fit_gaussian_linear(s);
  return *wm.model_true;
}

inline const NonparamRegressor& covariate_regressor(WorkingModels& wm,
                                                    const StackedSample& s,
                                                    double scale) {
  if (!wm.regressor) wm.regressor = make_nonparam_regressor(s, scale);
  return *wm.regressor;
}

inline EstimateResult run_cell(EstimatorId id, const SyntheticSample& synth,
                               WorkingModels& wm, const Estimand& est,
                               const FlexibleConfig& fcfg, double scale) {
  const StackedSample& s = synth.sample;
  switch (id) {
    case EstimatorId::ShiftDepMis:
      return shift_dependent(s, wm.ratio_mis, est, fcfg.se, fcfg.ci_level);
    case EstimatorId::ShiftDepTrue:
      return shift_dependent(s, wm.ratio_true, est, fcfg.se, fcfg.ci_level);
    case EstimatorId::DoublyMis:
      return doubly_flexible(s, wm.ratio_mis, misspec_model(wm, s), est, fcfg);
    case EstimatorId::DoublyTrue:
      return doubly_flexible(s, wm.ratio_true, true_family_model(wm, s), est,
                             fcfg);
    case EstimatorId::SinglyMis:
      return singly_flexible(s, wm.ratio_mis, covariate_regressor(wm, s, scale),
                             est, fcfg);
    case EstimatorId::SinglyTrue:
      return singly_flexible(s, wm.ratio_true,
                             covariate_regressor(wm, s, scale), est, fcfg);
    case EstimatorId::Oracle:
      return oracle(synth, est, fcfg.se, fcfg.ci_level);
  }
  throw ConfigError("run_cell: unknown estimator id");
}

}  // namespace detail

inline ReplicateResult run_replicate(const SimConfig& config, int rep_index) {
  validate(config);
  if (rep_index < 0 || rep_index >= config.replicates) {
    throw ConfigError("run_replicate: rep_index out of range");
  }
  ReplicateResult out;
  out.rep = rep_index;

  const auto synth =
      generate_paper_design(config.n, mix_seed(config.seed, rep_index));

  const std::size_t n_est = config.estimators.size();
  const std::size_t n_tgt = config.estimands.size();
  const std::uint64_t cell_base = config.seed ^ 0x626f6f7473ULL;

  try {
    detail::WorkingModels wm;
    wm.ratio_mis = normalize_ratio(exp_tilt_ratio(-0.7, 1.2), synth.sample);
    wm.ratio_true = exp_tilt_ratio(-0.5, 1.0);

    out.cells.assign(n_tgt, std::vector<EstimateResult>(n_est));
    for (std::size_t mi = 0; mi < n_tgt; ++mi) {
      for (std::size_t ei = 0; ei < n_est; ++ei) {
        const Estimand& est = config.estimands[mi];
        FlexibleConfig fcfg;
        fcfg.kernel = config.kernel;
        fcfg.rule = config.rule;
        fcfg.solver = config.solver;
        fcfg.ci_level = config.ci_level;
        fcfg.se.method = resolve_se_method(config, config.estimators[ei], est);
        fcfg.se.bootstrap_b = config.bootstrap_b;
        fcfg.se.seed = mix_seed(
            cell_base, (static_cast<std::uint64_t>(rep_index) * n_tgt + mi) *
                               n_est +
                           ei);
        out.cells[mi][ei] = detail::run_cell(config.estimators[ei], synth, wm,
                                             est, fcfg,
                                             config.bandwidth_scale);
      }
    }
  } catch (const ComputeError& e) {
    out.failed = true;
    out.error = e.what();
    out.cells.clear();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

struct MetricsRow {
  EstimatorId estimator = EstimatorId::Oracle;
  Estimand estimand;
  double mse = std::numeric_limits<double>::quiet_NaN();
  double bias = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double se_hat_mean = std::numeric_limits<double>::quiet_NaN();
  double coverage = std::numeric_limits<double>::quiet_NaN();
  int replicates = 0;  // successful replicates aggregated into this row
};

struct StudyResult {
  std::vector<MetricsRow> rows;        // estimand-major, config order
  std::vector<ReplicateResult> raw;    // replicate order
  int failures = 0;
};

namespace detail {

inline std::vector<MetricsRow> aggregate_rows(
    const SimConfig& config, const std::vector<ReplicateResult>& raw) {
  std::vector<MetricsRow> rows;
  for (std::size_t mi = 0; mi < config.estimands.size(); ++mi) {
    const Estimand& est = config.estimands[mi];
    const double truth = design_truth(est);
    for (std::size_t ei = 0; ei < config.estimators.size(); ++ei) {
      MetricsRow row;
      row.estimator = config.estimators[ei];
      row.estimand = est;

      std::vector<double> thetas;
      double se_hat_sum = 0.0;
      int se_hat_count = 0;
      int ci_count = 0;
      int covered = 0;
      for (const auto& rep : raw) {
        if (rep.failed) continue;
        const EstimateResult& cell = rep.cells[mi][ei];
        thetas.push_back(cell.theta);
        if (cell.se) {
          se_hat_sum += *cell.se;
          ++se_hat_count;
        }
        if (cell.ci) {
          ++ci_count;
          if (cell.ci->first <= truth && truth <= cell.ci->second) ++covered;
        }
      }

      row.replicates = static_cast<int>(thetas.size());
      if (!thetas.empty()) {
        double mean = 0.0;
        for (double t : thetas) mean += t;
        mean /= static_cast<double>(thetas.size());
        // Population variance divisor, so mse = bias^2 + se^2 exactly.
        double var = 0.0;
        for (double t : thetas) var += (t - mean) * (t - mean);
        var /= static_cast<double>(thetas.size());
        row.bias = mean - truth;
        row.se = std::sqrt(var);
        row.mse = row.bias * row.bias + var;
        if (se_hat_count > 0) {
          row.se_hat_mean = se_hat_sum / se_hat_count;
        }
        if (ci_count > 0) {
          row.coverage = static_cast<double>(covered) / ci_count;
        }
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace detail

inline StudyResult run_study(const SimConfig& config) {
  validate(config);
  const int replicates = config.replicates;
  std::vector<ReplicateResult> buf(replicates);

  int threads = config.threads > 0
                    ? config.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, replicates));

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= replicates) return;
      try {
        buf[rep] = run_replicate(config, rep);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  StudyResult out;
  out.raw = std::move(buf);
  for (const auto& rep : out.raw) {
    if (rep.failed) ++out.failures;
  }
  if (out.failures * 20 > replicates) {
    throw ComputeError("run_study: " + std::to_string(out.failures) + " of " +
                       std::to_string(replicates) +
                       " replicates failed (more than 5%)");
  }
  out.rows = detail::aggregate_rows(config, out.raw);
  return out;
}

// ---------------------------------------------------------------------------
// Table serialization

enum class TableFormat { Csv, Markdown };

namespace detail {

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline constexpr const char* kTableCsvHeader =
    "estimator,estimand,mse,bias,se,se_hat,coverage,replicates";

// Metric columns are fixed 4-decimal; parse_table reads back the CSV form.
inline std::string emit_table(const std::vector<MetricsRow>& rows,
                              TableFormat format) {
  std::ostringstream out;
  if (format == TableFormat::Csv) {
    out << kTableCsvHeader << '\n';
    for (const auto& r : rows) {
      out << to_string(r.estimator) << ',' << to_string(r.estimand) << ','
          << detail::format_metric(r.mse) << ','
          << detail::format_metric(r.bias) << ','
          << detail::format_metric(r.se) << ','
          << detail::format_metric(r.se_hat_mean) << ','
          << detail::format_metric(r.coverage) << ',' << r.replicates << '\n';
    }
  } else {
    out << "| Estimator | Estimand | MSE | Bias | SE | SE-hat | CI | Reps |\n"
        << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
      out << "| " << to_string(r.estimator) << " | " << to_string(r.estimand)
          << " | " << detail::format_metric(r.mse) << " | "
          << detail::format_metric(r.bias) << " | "
          << detail::format_metric(r.se) << " | "
          << detail::format_metric(r.se_hat_mean) << " | "
          << detail::format_metric(r.coverage) << " | " << r.replicates
          << " |\n";
    }
  }
  return out.str();
}

inline std::vector<MetricsRow> parse_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("parse_table: empty input");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTableCsvHeader) {
    throw ConfigError("parse_table: unexpected header '" + line + "'");
  }
  std::vector<MetricsRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 8) {
      throw ConfigError("parse_table: line " + std::to_string(lineno) +
                        " has " + std::to_string(fields.size()) +
                        " fields, expected 8");
    }
    MetricsRow row;
    try {
      row.estimator = parse_estimator_id(fields[0]);
      row.estimand = parse_estimand(fields[1]);
      row.mse = std::stod(fields[2]);
      row.bias = std::stod(fields[3]);
      row.se = std::stod(fields[4]);
      row.se_hat_mean = std::stod(fields[5]);
      row.coverage = std::stod(fields[6]);
      row.replicates = std::stoi(fields[7]);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("parse_table: line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    rows.push_back(row);
  }
  return rows;
}

// Per-replicate raw table; theta and interval columns carry full precision.
inline std::string emit_raw(const SimConfig& config,
                            const std::vector<ReplicateResult>& raw) {
  std::ostringstream out;
  out << "rep,estimator,estimand,status,theta,se,ci_lo,ci_hi\n";
  for (const auto& rep : raw) {
    if (rep.failed) {
      out << rep.rep << ",,,failed,,,,\n";
      continue;
    }
    for (std::size_t mi = 0; mi < config.estimands.size(); ++mi) {
      for (std::size_t ei = 0; ei < config.estimators.size(); ++ei) {
        const EstimateResult& cell = rep.cells[mi][ei];
        out << rep.rep << ',' << to_string(config.estimators[ei]) << ','
            << to_string(config.estimands[mi]) << ",ok,"
            << detail::format_full(cell.theta) << ','
            << (cell.se ? detail::format_full(*cell.se) : std::string()) << ',';
        if (cell.ci) {
          out << detail::format_full(cell.ci->first) << ','
              << detail::format_full(cell.ci->second);
        } else {
          out << ',';
        }
        out << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace labelshift

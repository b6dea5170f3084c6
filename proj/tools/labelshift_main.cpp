// Command-line front end: Monte Carlo studies, single-sample estimation,
// Gauss-Legendre node dumps, and a direct interface to the Landweber solver.
//
// Exit status: 0 success, 1 computational failure, 2 usage/config error.
// Diagnostics go to standard error; data go to files or standard output.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <labelshift/estimators.hpp>
#include <labelshift/fredholm.hpp>
#include <labelshift/models.hpp>
#include <labelshift/sampling.hpp>
#include <labelshift/simulation.hpp>

using json = nlohmann::ordered_json;
using namespace labelshift;

namespace {

constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Output helpers

// Write to a temp file and rename, so a failed run never leaves a partial
// output file behind.
void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ComputeError("cannot open '" + tmp + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw ComputeError("failed writing '" + tmp + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw ComputeError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

void emit_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
  } else {
    write_file_atomic(path, content);
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Flag-value parsers

// Exponential-tilt ratio text: exp(a+b*y), e.g. exp(-0.7+1.2*y) or
// exp(-0.5+y).
std::pair<double, double> parse_rho_text(const std::string& text) {
  static const std::regex pattern(
      R"(^exp\(([+-]?[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)([+-](?:[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)?)\*?y\)$)");
  std::string compact;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) compact += ch;
  }
  std::smatch m;
  if (!std::regex_match(compact, m, pattern)) {
    throw ConfigError("--rho must look like exp(a+b*y), got '" + text + "'");
  }
  const double a = std::stod(m[1].str());
  const std::string bs = m[2].str();
  double b = 0.0;
  if (bs == "+") {
    b = 1.0;
  } else if (bs == "-") {
    b = -1.0;
  } else {
    b = std::stod(bs);
  }
  return {a, b};
}

struct SeChoice {
  SeMethod method = SeMethod::None;
  std::optional<int> bootstrap_b;
};

SeChoice parse_se_text(const std::string& text) {
  SeChoice out;
  if (text == "none") return out;
  if (text == "plugin") {
    out.method = SeMethod::Plugin;
    return out;
  }
  if (text == "bootstrap") {
    out.method = SeMethod::Bootstrap;
    return out;
  }
  const std::string prefix = "bootstrap:";
  if (text.rfind(prefix, 0) == 0) {
    out.method = SeMethod::Bootstrap;
    try {
      out.bootstrap_b = std::stoi(text.substr(prefix.size()));
    } catch (const std::exception&) {
      throw ConfigError("--se bootstrap:B needs an integer B, got '" + text +
                        "'");
    }
    return out;
  }
  throw ConfigError("--se must be none, plugin, bootstrap, or bootstrap:B");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<EstimatorId> parse_estimator_list(const std::string& text) {
  if (text == "all") {
    return {all_estimator_ids().begin(), all_estimator_ids().end()};
  }
  std::vector<EstimatorId> out;
  for (const auto& token : split_list(text)) {
    out.push_back(parse_estimator_id(token));
  }
  return out;
}

std::vector<Estimand> parse_target_list(const std::string& text) {
  std::vector<Estimand> out;
  for (const auto& token : split_list(text)) {
    out.push_back(parse_estimand(token));
  }
  return out;
}

int resolve_threads(bool flag_given, int flag_value) {
  if (flag_given) return flag_value;
  if (const char* env = std::getenv("LABELSHIFT_THREADS")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("LABELSHIFT_THREADS must be an integer, got '" +
                        std::string(env) + "'");
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// JSON config files: values for keys whose flag was not passed on the
// command line; unknown keys are rejected.

using KeySetter = std::function<void(const json&)>;

void apply_config_file(const std::string& path, const CLI::App& sub,
                       const std::map<std::string, KeySetter>& setters) {
  json file;
  try {
    file = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  if (!file.is_object()) {
    throw ConfigError("config file '" + path + "' must hold a JSON object");
  }
  for (const auto& [key, value] : file.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("config file '" + path + "': unknown key '" + key +
                        "'");
    }
    if (sub.count("--" + key) > 0) continue;  // flags override file values
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError("config file '" + path + "', key '" + key +
                        "': " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// CSV matrix/vector input for solve-fredholm

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& field : split_list(line)) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(field, &pos));
        if (pos != field.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": bad number '" + field + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": ragged row width");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": no data rows");
  Eigen::MatrixXd out(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      out(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
  }
  return out;
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw ConfigError(path + ": expected a single row or column of numbers");
}

// ---------------------------------------------------------------------------
// Shared solver/kernel flag block

struct SolverFlags {
  double step = 0.0;
  double tol = 1e-10;
  int max_iter = 50000;
  bool guard = true;

  SolverOptions to_options() const {
    SolverOptions o;
    o.step = step;
    o.tol = tol;
    o.max_iter = max_iter;
    o.spectral_guard = guard;
    return o;
  }
};

void add_solver_flags(CLI::App* sub, SolverFlags& flags) {
  sub->add_option("--step", flags.step,
                  "Landweber step size (<=0 selects the default)");
  sub->add_option("--tol", flags.tol, "relative-change stopping tolerance");
  sub->add_option("--max-iter", flags.max_iter, "iteration cap");
  sub->add_flag("--guard,!--no-guard", flags.guard,
                "rescale the step from the estimated spectral norm");
}

json diagnostics_json(const SolveDiagnostics& d) {
  json out;
  out["iterations"] = d.iterations;
  out["converged"] = d.converged;
  if (std::isfinite(d.final_rel_change)) {
    out["final_rel_change"] = d.final_rel_change;
  }
  if (std::isfinite(d.final_residual_norm)) {
    out["final_residual_norm"] = d.final_residual_norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config_path;
  int n = 1000;
  int replicates = 200;
  std::uint64_t seed = 0;
  std::string estimators = "all";
  std::string targets = "mean,quantile:0.5";
  double scale = 2.5;
  double bandwidth = 0.0;
  int nodes = 50;
  double lo = -5.0;
  double hi = 5.0;
  SolverFlags solver;
  std::string se;
  int bootstrap_b = 200;
  double ci_level = 0.95;
  int threads = 0;
  std::string out_path;
  std::string raw_path;
  std::string format = "csv";
};

int run_simulate(const SimulateArgs& args, const CLI::App& sub) {
  SimConfig config;
  config.n = args.n;
  config.replicates = args.replicates;
  config.seed = args.seed;
  config.estimators = parse_estimator_list(args.estimators);
  config.estimands = parse_target_list(args.targets);
  config.bandwidth_scale = args.scale;
  config.kernel = KernelSpec{KernelFamily::Gaussian, args.bandwidth};
  config.rule = gauss_legendre(args.nodes, args.lo, args.hi);
  config.solver = args.solver.to_options();
  config.bootstrap_b = args.bootstrap_b;
  config.ci_level = args.ci_level;
  config.threads = resolve_threads(sub.count("--threads") > 0, args.threads);
  if (!args.se.empty()) {
    const SeChoice choice = parse_se_text(args.se);
    for (EstimatorId id : config.estimators) {
      config.se_method[id] = choice.method;
    }
    if (choice.bootstrap_b) config.bootstrap_b = *choice.bootstrap_b;
  }
  TableFormat format = TableFormat::Csv;
  if (args.format == "markdown") {
    format = TableFormat::Markdown;
  } else if (args.format != "csv") {
    throw ConfigError("--format must be csv or markdown");
  }

  const StudyResult study = run_study(config);
  if (study.failures > 0) {
    std::cerr << "simulate: " << study.failures << " of " << config.replicates
              << " replicates failed\n";
  }
  emit_output(args.out_path, emit_table(study.rows, format));
  if (!args.raw_path.empty()) {
    write_file_atomic(args.raw_path, emit_raw(config, study.raw));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string config_path;
  std::string input;
  std::string estimator;
  std::string target = "mean";
  std::string rho;
  bool normalize = false;
  std::string cond = "fit-gaussian";
  double scale = 2.5;
  double bandwidth = 0.0;
  int nodes = 50;
  double lo = -5.0;
  double hi = 5.0;
  SolverFlags solver;
  std::string se = "none";
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  std::string out_path;
};

int run_estimate(const EstimateArgs& args) {
  if (args.input.empty()) {
    throw ConfigError("estimate requires --input");
  }
  std::ifstream in(args.input);
  if (!in) throw ConfigError("cannot open '" + args.input + "'");
  const CsvData data = load_csv_data(in);
  const Estimand est = parse_estimand(args.target);

  const SeChoice se = parse_se_text(args.se);
  SeSpec se_spec;
  se_spec.method = se.method;
  if (se.bootstrap_b) se_spec.bootstrap_b = *se.bootstrap_b;
  se_spec.seed = args.seed;

  DensityRatioModel ratio;
  if (!args.rho.empty()) {
    const auto [a, b] = parse_rho_text(args.rho);
    ratio = exp_tilt_ratio(a, b);
    if (args.normalize) ratio = normalize_ratio(ratio, data.sample);
  } else if (args.estimator != "oracle") {
    throw ConfigError("estimate requires --rho for estimator '" +
                      args.estimator + "'");
  }

  FlexibleConfig fcfg;
  fcfg.kernel = KernelSpec{KernelFamily::Gaussian, args.bandwidth};
  fcfg.rule = gauss_legendre(args.nodes, args.lo, args.hi);
  fcfg.solver = args.solver.to_options();
  fcfg.se = se_spec;
  fcfg.ci_level = args.ci_level;

  EstimateResult result;
  bool flexible = false;
  if (args.estimator == "shift-dep") {
    result = shift_dependent(data.sample, ratio, est, se_spec, args.ci_level);
  } else if (args.estimator == "doubly") {
    ConditionalOutcomeModel model;
    if (args.cond == "fit-gaussian") {
      model = fit_gaussian_linear(data.sample);
    } else if (args.cond == "paper-misspecified") {
      model = paper_misspecified_model();
    } else if (args.cond == "true-paper") {
      model = true_conditional_model();
    } else {
      throw ConfigError(
          "--cond must be fit-gaussian, paper-misspecified, or true-paper");
    }
    result = doubly_flexible(data.sample, ratio, model, est, fcfg);
    flexible = true;
  } else if (args.estimator == "singly") {
    const NonparamRegressor reg =
        make_nonparam_regressor(data.sample, args.scale);
    result = singly_flexible(data.sample, ratio, reg, est, fcfg);
    flexible = true;
  } else if (args.estimator == "oracle") {
    if (!data.hidden_target_y) {
      throw ConfigError(
          "estimate --estimator oracle needs a y_hidden column in the input");
    }
    SyntheticSample synth;
    synth.sample = data.sample;
    synth.hidden_target_y = *data.hidden_target_y;
    result = oracle(synth, est, se_spec, args.ci_level);
  } else {
    throw ConfigError(
        "--estimator must be shift-dep, doubly, singly, or oracle");
  }

  json out;
  out["schema_version"] = kSchemaVersion;
  out["estimator"] = args.estimator;
  out["target"] = to_string(est);
  out["n"] = data.sample.n();
  out["n1"] = data.sample.n1;
  out["theta"] = result.theta;
  if (result.se) out["se"] = *result.se;
  if (result.ci) out["ci"] = {result.ci->first, result.ci->second};
  if (result.se_method == SeMethod::Plugin) out["se_method"] = "plugin";
  if (result.se_method == SeMethod::Bootstrap) out["se_method"] = "bootstrap";
  if (flexible) {
    out["solver"] = diagnostics_json(result.solver);
    if (std::isfinite(result.bhat.mean)) {
      out["bhat"] = {{"min", result.bhat.min},
                     {"max", result.bhat.max},
                     {"mean", result.bhat.mean}};
    }
  }
  emit_output(args.out_path, out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// gl-nodes

int run_gl_nodes(int m, double a, double b, const std::string& out_path) {
  const QuadratureRule rule = gauss_legendre(m, a, b);
  std::ostringstream out;
  out << "node,weight\n";
  char buf[80];
  for (int j = 0; j < rule.m(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", rule.nodes[j],
                  rule.weights[j]);
    out << buf;
  }
  emit_output(out_path, out.str());
  return 0;
}

// ---------------------------------------------------------------------------
// solve-fredholm

int run_solve_fredholm(const std::string& phi_path,
                       const std::string& target_path,
                       const std::string& weights_path,
                       const SolverFlags& solver,
                       const std::string& out_path) {
  DiscretizedFredholm problem;
  problem.phi = read_matrix_csv(phi_path);
  problem.target = read_vector_csv(target_path);
  if (!weights_path.empty()) {
    problem.quad_weights = read_vector_csv(weights_path);
  } else {
    problem.quad_weights = Eigen::VectorXd::Ones(problem.phi.cols());
  }
  problem.step = solver.step;
  problem.tol = solver.tol;
  problem.max_iter = solver.max_iter;
  problem.spectral_guard = solver.guard;

  const auto [a_hat, diag] = landweber_solve(problem);

  json out;
  out["schema_version"] = kSchemaVersion;
  out["a_hat"] = std::vector<double>(a_hat.data(), a_hat.data() + a_hat.size());
  out["diagnostics"] = diagnostics_json(diag);
  emit_output(out_path, out.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"label-shift target-population estimation toolkit"};
  app.require_subcommand(1);

  // simulate
  SimulateArgs sim;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "run a Monte Carlo study");
  sim_cmd->add_option("--config", sim.config_path,
                      "JSON config file (flags override file values)");
  sim_cmd->add_option("--n", sim.n, "stacked sample size per replicate");
  sim_cmd->add_option("--replicates", sim.replicates, "number of replicates");
  sim_cmd->add_option("--seed", sim.seed, "study seed");
  sim_cmd->add_option("--estimators", sim.estimators,
                      "'all' or a comma list of estimator ids");
  sim_cmd->add_option("--targets", sim.targets,
                      "comma list: mean, quantile:<level>");
  sim_cmd->add_option("--scale", sim.scale, "covariate bandwidth scale");
  sim_cmd->add_option("--bandwidth", sim.bandwidth,
                      "outcome kernel bandwidth (<=0: n1^(-1/3))");
  sim_cmd->add_option("--nodes", sim.nodes, "quadrature nodes");
  sim_cmd->add_option("--lo", sim.lo, "quadrature interval start");
  sim_cmd->add_option("--hi", sim.hi, "quadrature interval end");
  add_solver_flags(sim_cmd, sim.solver);
  sim_cmd->add_option("--se", sim.se,
                      "override SE method for every estimator "
                      "(none|plugin|bootstrap[:B])");
  sim_cmd->add_option("--bootstrap-b", sim.bootstrap_b, "bootstrap resamples");
  sim_cmd->add_option("--ci-level", sim.ci_level, "confidence level");
  sim_cmd->add_option("--threads", sim.threads,
                      "worker cap (default: LABELSHIFT_THREADS or all cores)");
  sim_cmd->add_option("--out", sim.out_path, "table output path");
  sim_cmd->add_option("--raw", sim.raw_path, "per-replicate output path");
  sim_cmd->add_option("--format", sim.format, "table format: csv|markdown");

  // estimate
  EstimateArgs et;
  CLI::App* est_cmd =
      app.add_subcommand("estimate", "estimate from a CSV sample");
  est_cmd->add_option("--config", et.config_path,
                      "JSON config file (flags override file values)");
  est_cmd->add_option("--input", et.input, "CSV sample: r,y,x1..xd[,y_hidden]");
  est_cmd->add_option("--estimator", et.estimator,
                      "shift-dep|doubly|singly|oracle");
  est_cmd->add_option("--target", et.target, "mean or quantile:<level>");
  est_cmd->add_option("--rho", et.rho, "density-ratio text, e.g. exp(-0.7+1.2*y)");
  est_cmd->add_flag("--normalize", et.normalize,
                    "renormalize the ratio on the source rows");
  est_cmd->add_option("--cond", et.cond,
                      "conditional model: fit-gaussian|paper-misspecified|"
                      "true-paper");
  est_cmd->add_option("--scale", et.scale, "covariate bandwidth scale");
  est_cmd->add_option("--bandwidth", et.bandwidth,
                      "outcome kernel bandwidth (<=0: n1^(-1/3))");
  est_cmd->add_option("--nodes", et.nodes, "quadrature nodes");
  est_cmd->add_option("--lo", et.lo, "quadrature interval start");
  est_cmd->add_option("--hi", et.hi, "quadrature interval end");
  add_solver_flags(est_cmd, et.solver);
  est_cmd->add_option("--se", et.se, "none|plugin|bootstrap[:B]");
  est_cmd->add_option("--seed", et.seed, "bootstrap seed");
  est_cmd->add_option("--ci-level", et.ci_level, "confidence level");
  est_cmd->add_option("--out", et.out_path, "JSON result path");

  // gl-nodes
  int gl_m = 0;
  double gl_a = -5.0, gl_b = 5.0;
  std::string gl_out;
  CLI::App* gl_cmd =
      app.add_subcommand("gl-nodes", "dump Gauss-Legendre nodes and weights");
  gl_cmd->add_option("--m", gl_m, "node count")->required();
  gl_cmd->add_option("--a", gl_a, "interval start");
  gl_cmd->add_option("--b", gl_b, "interval end");
  gl_cmd->add_option("--out", gl_out, "CSV output path");

  // solve-fredholm
  std::string sf_phi, sf_target, sf_weights, sf_out;
  SolverFlags sf_solver;
  sf_solver.tol = 1e-8;
  sf_solver.guard = false;
  CLI::App* sf_cmd = app.add_subcommand(
      "solve-fredholm", "solve a discretized system with Landweber iteration");
  sf_cmd->add_option("--phi", sf_phi, "CSV kernel matrix")->required();
  sf_cmd->add_option("--target", sf_target, "CSV right-hand side")->required();
  sf_cmd->add_option("--weights", sf_weights, "CSV quadrature weights");
  add_solver_flags(sf_cmd, sf_solver);
  sf_cmd->add_option("--out", sf_out, "JSON result path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (sim_cmd->parsed()) {
      if (!sim.config_path.empty()) {
        const std::map<std::string, KeySetter> setters = {
            {"n", [&](const json& v) { sim.n = v.get<int>(); }},
            {"replicates",
             [&](const json& v) { sim.replicates = v.get<int>(); }},
            {"seed",
             [&](const json& v) { sim.seed = v.get<std::uint64_t>(); }},
            {"estimators",
             [&](const json& v) { sim.estimators = v.get<std::string>(); }},
            {"targets",
             [&](const json& v) { sim.targets = v.get<std::string>(); }},
            {"scale", [&](const json& v) { sim.scale = v.get<double>(); }},
            {"bandwidth",
             [&](const json& v) { sim.bandwidth = v.get<double>(); }},
            {"nodes", [&](const json& v) { sim.nodes = v.get<int>(); }},
            {"lo", [&](const json& v) { sim.lo = v.get<double>(); }},
            {"hi", [&](const json& v) { sim.hi = v.get<double>(); }},
            {"step",
             [&](const json& v) { sim.solver.step = v.get<double>(); }},
            {"tol", [&](const json& v) { sim.solver.tol = v.get<double>(); }},
            {"max-iter",
             [&](const json& v) { sim.solver.max_iter = v.get<int>(); }},
            {"guard",
             [&](const json& v) { sim.solver.guard = v.get<bool>(); }},
            {"se", [&](const json& v) { sim.se = v.get<std::string>(); }},
            {"bootstrap-b",
             [&](const json& v) { sim.bootstrap_b = v.get<int>(); }},
            {"ci-level",
             [&](const json& v) { sim.ci_level = v.get<double>(); }},
            {"threads", [&](const json& v) { sim.threads = v.get<int>(); }},
            {"out",
             [&](const json& v) { sim.out_path = v.get<std::string>(); }},
            {"raw",
             [&](const json& v) { sim.raw_path = v.get<std::string>(); }},
            {"format",
             [&](const json& v) { sim.format = v.get<std::string>(); }},
        };
        apply_config_file(sim.config_path, *sim_cmd, setters);
      }
      return run_simulate(sim, *sim_cmd);
    }
    if (est_cmd->parsed()) {
      if (!et.config_path.empty()) {
        const std::map<std::string, KeySetter> setters = {
            {"input",
             [&](const json& v) { et.input = v.get<std::string>(); }},
            {"estimator",
             [&](const json& v) { et.estimator = v.get<std::string>(); }},
            {"target",
             [&](const json& v) { et.target = v.get<std::string>(); }},
            {"rho", [&](const json& v) { et.rho = v.get<std::string>(); }},
            {"normalize",
             [&](const json& v) { et.normalize = v.get<bool>(); }},
            {"cond", [&](const json& v) { et.cond = v.get<std::string>(); }},
            {"scale", [&](const json& v) { et.scale = v.get<double>(); }},
            {"bandwidth",
             [&](const json& v) { et.bandwidth = v.get<double>(); }},
            {"nodes", [&](const json& v) { et.nodes = v.get<int>(); }},
            {"lo", [&](const json& v) { et.lo = v.get<double>(); }},
            {"hi", [&](const json& v) { et.hi = v.get<double>(); }},
            {"step",
             [&](const json& v) { et.solver.step = v.get<double>(); }},
            {"tol", [&](const json& v) { et.solver.tol = v.get<double>(); }},
            {"max-iter",
             [&](const json& v) { et.solver.max_iter = v.get<int>(); }},
            {"guard",
             [&](const json& v) { et.solver.guard = v.get<bool>(); }},
            {"se", [&](const json& v) { et.se = v.get<std::string>(); }},
            {"seed",
             [&](const json& v) { et.seed = v.get<std::uint64_t>(); }},
            {"ci-level",
             [&](const json& v) { et.ci_level = v.get<double>(); }},
            {"out",
             [&](const json& v) { et.out_path = v.get<std::string>(); }},
        };
        apply_config_file(et.config_path, *est_cmd, setters);
      }
      return run_estimate(et);
    }
    if (gl_cmd->parsed()) {
      return run_gl_nodes(gl_m, gl_a, gl_b, gl_out);
    }
    if (sf_cmd->parsed()) {
      return run_solve_fredholm(sf_phi, sf_target, sf_weights, sf_solver,
                                sf_out);
    }
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "landweber solver diverged: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ComputeError& e) {
    std::cerr << "compute error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#pragma once
// Stacked two-population sample: data model, CSV round trip, synthetic data
// generator for the simulation design, and the discrete identifiability
// example.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <labelshift/errors.hpp>
#include <labelshift/normal.hpp>

namespace labelshift {

// Outcomes on r=0 rows are absent; they hold this sentinel and must be read
// through outcome(), which refuses absent entries.
inline double absent_outcome() {
  return std::numeric_limits<double>::quiet_NaN();
}

struct StackedSample {
  Eigen::MatrixXd x;   // n x d covariates
  Eigen::VectorXi r;   // 1 = source population P (y observed), 0 = target Q
  Eigen::VectorXd y;   // observed outcomes; absent sentinel where r = 0
  int n1 = 0;
  int n0 = 0;
  double pi = 0.0;     // n1 / n

  int n() const { return static_cast<int>(r.size()); }
  int d() const { return static_cast<int>(x.cols()); }

  double outcome(int i) const {
    if (r[i] != 1 || std::isnan(y[i])) {
      throw ComputeError("StackedSample: outcome absent at row " +
                         std::to_string(i));
    }
    return y[i];
  }
};

inline void validate(const StackedSample& s) {
  const auto n = s.r.size();
  if (n == 0 || s.y.size() != n || s.x.rows() != n) {
    throw ConfigError("StackedSample: inconsistent row counts");
  }
  if (s.x.cols() < 1) throw ConfigError("StackedSample: d must be >= 1");
  if (!s.x.allFinite()) throw ConfigError("StackedSample: non-finite covariate");
  int n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s.r[i] != 0 && s.r[i] != 1) {
      throw ConfigError("StackedSample: r must be 0 or 1");
    }
    const bool present = !std::isnan(s.y[i]);
    if (present != (s.r[i] == 1)) {
      throw ConfigError("StackedSample: y must be present exactly where r=1");
    }
    if (present && !std::isfinite(s.y[i])) {
      throw ConfigError("StackedSample: non-finite outcome");
    }
    n1 += s.r[i];
  }
  if (s.n1 != n1 || s.n0 != n - n1) {
    throw ConfigError("StackedSample: n1/n0 do not match r");
  }
  if (s.n1 < 1 || s.n0 < 1) {
    throw ConfigError("StackedSample: both populations must be non-empty");
  }
  if (std::abs(s.pi - static_cast<double>(s.n1) / n) > 1e-12) {
    throw ConfigError("StackedSample: pi must equal n1/n");
  }
}

// Fills n1/n0/pi from r and validates.
inline StackedSample finalize_sample(Eigen::MatrixXd x, Eigen::VectorXi r,
                                     Eigen::VectorXd y) {
  StackedSample s;
  s.x = std::move(x);
  s.r = std::move(r);
  s.y = std::move(y);
  s.n1 = s.r.sum();
  s.n0 = s.n() - s.n1;
  s.pi = static_cast<double>(s.n1) / s.n();
  validate(s);
  return s;
}

struct DesignTruth {
  double theta_mean = std::numeric_limits<double>::quiet_NaN();
  std::map<double, double> theta_quantiles;
};

struct SyntheticSample {
  StackedSample sample;
  Eigen::VectorXd hidden_target_y;  // true outcomes of the r=0 rows, in order
  DesignTruth truth;
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
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

inline double parse_number(const std::string& field, int row) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw ConfigError("csv: unparsable number '" + field + "' in row " +
                      std::to_string(row));
  }
  if (pos != field.size()) {
    throw ConfigError("csv: trailing characters in '" + field + "' in row " +
                      std::to_string(row));
  }
  return v;
}

}  // namespace detail

struct CsvData {
  StackedSample sample;
  // Present when the file carries a y_hidden column with the true target
  // outcomes of the r=0 rows.
  std::optional<Eigen::VectorXd> hidden_target_y;
};

// Expected header: r,y,x1..xd with an optional trailing y_hidden column.
// A non-empty schema pins the exact header names.
inline CsvData load_csv_data(std::istream& in,
                             const std::vector<std::string>& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: empty input");
  const auto header = detail::split_csv_line(line);

  if (!schema.empty() && header != schema) {
    std::string want;
    for (const auto& s : schema) want += s + ",";
    throw ConfigError("csv: header does not match expected schema " + want);
  }
  std::size_t ncol = header.size();
  bool has_hidden = false;
  if (ncol >= 1 && header.back() == "y_hidden") {
    has_hidden = true;
    --ncol;
  }
  if (ncol < 3 || header[0] != "r" || header[1] != "y") {
    throw ConfigError("csv: header must start with r,y,x1,...");
  }
  const int d = static_cast<int>(ncol) - 2;
  for (int j = 0; j < d; ++j) {
    if (header[2 + j] != "x" + std::to_string(j + 1)) {
      throw ConfigError("csv: covariate columns must be named x1..xd");
    }
  }

  std::vector<int> r;
  std::vector<double> y, hidden;
  std::vector<double> xflat;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ConfigError("csv: row " + std::to_string(row) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    const double rv = detail::parse_number(fields[0], row);
    if (rv != 0.0 && rv != 1.0) {
      throw ConfigError("csv: r must be 0 or 1 in row " + std::to_string(row));
    }
    const bool y_present = !fields[1].empty();
    if (y_present != (rv == 1.0)) {
      throw ConfigError("csv: y must be present exactly when r=1, row " +
                        std::to_string(row));
    }
    r.push_back(static_cast<int>(rv));
    y.push_back(y_present ? detail::parse_number(fields[1], row)
                          : absent_outcome());
    for (int j = 0; j < d; ++j) {
      xflat.push_back(detail::parse_number(fields[2 + j], row));
    }
    if (has_hidden) {
      const std::string& hf = fields.back();
      if (rv == 0.0) {
        if (hf.empty()) {
          throw ConfigError("csv: y_hidden missing on r=0 row " +
                            std::to_string(row));
        }
        hidden.push_back(detail::parse_number(hf, row));
      } else if (!hf.empty()) {
        throw ConfigError("csv: y_hidden set on r=1 row " + std::to_string(row));
      }
    }
  }
  const int n = static_cast<int>(r.size());
  if (n == 0) throw ConfigError("csv: no data rows");

  Eigen::MatrixXd x(n, d);
  Eigen::VectorXi rv(n);
  Eigen::VectorXd yv(n);
  for (int i = 0; i < n; ++i) {
    rv[i] = r[i];
    yv[i] = y[i];
    for (int j = 0; j < d; ++j) x(i, j) = xflat[i * d + j];
  }
  CsvData out;
  out.sample = finalize_sample(std::move(x), std::move(rv), std::move(yv));
  if (has_hidden) {
    out.hidden_target_y =
        Eigen::Map<Eigen::VectorXd>(hidden.data(), hidden.size());
  }
  return out;
}

inline StackedSample load_csv(std::istream& in,
                              const std::vector<std::string>& schema = {}) {
  return load_csv_data(in, schema).sample;
}

namespace detail {

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline void write_csv(std::ostream& out, const StackedSample& s,
                      const std::optional<Eigen::VectorXd>& hidden = {}) {
  validate(s);
  if (hidden && hidden->size() != s.n0) {
    throw ConfigError("write_csv: y_hidden length must equal n0");
  }
  out << "r,y";
  for (int j = 1; j <= s.d(); ++j) out << ",x" << j;
  if (hidden) out << ",y_hidden";
  out << "\n";
  int q = 0;
  for (int i = 0; i < s.n(); ++i) {
    out << s.r[i] << ",";
    if (s.r[i] == 1) out << detail::format_number(s.y[i]);
    for (int j = 0; j < s.d(); ++j) {
      out << "," << detail::format_number(s.x(i, j));
    }
    if (hidden) {
      out << ",";
      if (s.r[i] == 0) out << detail::format_number((*hidden)[q++]);
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Synthetic design: R ~ Bernoulli(1/2); Y|R=1 ~ N(0,1), Y|R=0 ~ N(1,1);
// X|Y three-dimensional normal with mean (-0.5, 0.5, 1)' Y and identity
// covariance. Target truth: mean 1, t-quantile 1 + z_t.

inline double paper_design_quantile(double t) {
  return 1.0 + normal_quantile(t);
}

inline SyntheticSample generate_paper_design(int n, std::uint64_t seed) {
  if (n < 10) throw ConfigError("generate_paper_design: n must be >= 10");

  for (std::uint64_t attempt_seed = seed;; ++attempt_seed) {
    std::mt19937_64 rng(attempt_seed);
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Eigen::VectorXi r(n);
    Eigen::VectorXd y(n);
    Eigen::MatrixXd x(n, 3);
    std::vector<double> hidden;
    for (int i = 0; i < n; ++i) {
      r[i] = coin(rng) ? 1 : 0;
      const double yi = r[i] == 1 ? gauss(rng) : 1.0 + gauss(rng);
      y[i] = r[i] == 1 ? yi : absent_outcome();
      if (r[i] == 0) hidden.push_back(yi);
      x(i, 0) = -0.5 * yi + gauss(rng);
      x(i, 1) = 0.5 * yi + gauss(rng);
      x(i, 2) = yi + gauss(rng);
    }
    const int n1 = r.sum();
    if (n1 == 0 || n1 == n) continue;  // degenerate draw, advance the seed

    SyntheticSample out;
    out.sample = finalize_sample(std::move(x), std::move(r), std::move(y));
    out.hidden_target_y =
        Eigen::Map<Eigen::VectorXd>(hidden.data(), hidden.size());
    out.truth.theta_mean = 1.0;
    out.truth.theta_quantiles[0.5] = 1.0;
    return out;
  }
}

// Density ratio q_Y / p_Y of the synthetic design.
inline double true_density_ratio(double y) { return std::exp(-0.5 + y); }

// ---------------------------------------------------------------------------
// Discrete identifiability example: binary X, Y in {0,1,2},
// pr(X=0|Y) = (1/5, 1/8, 2/3), and a one-parameter family of target
// marginals q_Y(.; t) that all produce the same target covariate marginal.

inline Eigen::Vector3d example1_q_y(double t) {
  if (!(t > 1.0 / 32.0 && t < 25.0 / 336.0)) {
    throw ConfigError("example1_q_y: t outside (1/32, 25/336)");
  }
  Eigen::Vector3d q;
  q[0] = 5.0 * (25.0 - 416.0 * t) / 336.0;
  q[1] = (32.0 * t - 1.0) / 6.0;
  q[2] = (89.0 + 96.0 * t) / 112.0;
  return q;
}

inline double example1_target_marginal(double t) {
  const Eigen::Vector3d q = example1_q_y(t);
  const Eigen::Vector3d px0{1.0 / 5.0, 1.0 / 8.0, 2.0 / 3.0};
  return px0.dot(q);
}

}  // namespace labelshift

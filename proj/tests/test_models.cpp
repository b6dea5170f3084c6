#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <labelshift/models.hpp>

using labelshift::ConditionalOutcomeModel;
using labelshift::DensityRatioModel;
using labelshift::StackedSample;
using labelshift::cond_expect;
using labelshift::cond_expect_exp;
using labelshift::exp_tilt_ratio;
using labelshift::finalize_sample;
using labelshift::fit_gaussian_linear;
using labelshift::gauss_legendre;
using labelshift::generate_paper_design;
using labelshift::make_nonparam_regressor;
using labelshift::nonparam_cond_expect;
using labelshift::normalize_ratio;
using labelshift::paper_misspecified_model;
using labelshift::true_conditional_model;
using labelshift::weights_w;

namespace {

// n rows, all source except the last ones; x filled with zeros.
StackedSample zero_x_sample(const std::vector<double>& source_y, int n0) {
  const int n1 = static_cast<int>(source_y.size());
  const int n = n1 + n0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 3);
  Eigen::VectorXi r(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    r[i] = i < n1 ? 1 : 0;
    y[i] = i < n1 ? source_y[i] : labelshift::absent_outcome();
  }
  return finalize_sample(x, r, y);
}

}  // namespace

TEST_CASE("ratio normalization", "[models]") {
  SECTION("identity base gives c* = 1") {
    const auto s = zero_x_sample({0.3, -0.4, 1.1}, 2);
    const auto m = normalize_ratio(exp_tilt_ratio(0.0, 0.0), s);
    CHECK(m.normalizer == Catch::Approx(1.0).epsilon(1e-15));
    CHECK(m(2.0) == Catch::Approx(1.0).epsilon(1e-15));
  }
  SECTION("hand-computed normalizer") {
    const auto s = zero_x_sample({0.0, std::log(2.0)}, 1);
    const auto m = normalize_ratio([](double y) { return std::exp(y); }, s);
    CHECK(m.normalizer == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
  }
  SECTION("postcondition holds on generated data") {
    const auto gen = generate_paper_design(400, 3);
    const auto& s = gen.sample;
    const auto m = normalize_ratio(exp_tilt_ratio(-0.7, 1.2), s);
    double mean = 0.0;
    for (int i = 0; i < s.n(); ++i) {
      if (s.r[i] == 1) mean += m(s.y[i]);
    }
    mean /= s.n();
    CHECK(mean == Catch::Approx(s.pi).margin(1e-12));
  }
  SECTION("scaling the base is absorbed exactly") {
    const auto s = zero_x_sample({0.5, -1.0, 0.2, 2.0}, 3);
    const auto m1 = normalize_ratio([](double y) { return std::exp(0.3 * y); }, s);
    const auto m2 = normalize_ratio(
        [](double y) { return 17.0 * std::exp(0.3 * y); }, s);
    for (double y : {-1.0, 0.0, 0.7}) {
      CHECK(m1(y) == Catch::Approx(m2(y)).epsilon(1e-13));
    }
  }
  SECTION("zero base is an error") {
    const auto s = zero_x_sample({0.1, 0.2}, 1);
    CHECK_THROWS_AS(normalize_ratio([](double) { return 0.0; }, s),
                    labelshift::ComputeError);
  }
}

TEST_CASE("gaussian linear fitting", "[models]") {
  SECTION("noise-free linear data is interpolated") {
    Eigen::MatrixXd x(5, 1);
    x << 0.0, 1.0, 2.0, 3.0, 1.5;
    Eigen::VectorXi r(5);
    r << 1, 1, 1, 1, 0;
    Eigen::VectorXd y(5);
    y << 2.0, 5.0, 8.0, 11.0, labelshift::absent_outcome();
    const auto m = fit_gaussian_linear(finalize_sample(x, r, y));
    CHECK(m.beta[0] == Catch::Approx(2.0).margin(1e-10));
    CHECK(m.beta[1] == Catch::Approx(3.0).margin(1e-10));
    CHECK(m.sigma2 == Catch::Approx(0.0).margin(1e-18));
  }
  SECTION("constant outcomes") {
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 1.0, 2.0, 9.0;
    Eigen::VectorXi r(4);
    r << 1, 1, 1, 0;
    Eigen::VectorXd y(4);
    y << 4.0, 4.0, 4.0, labelshift::absent_outcome();
    const auto m = fit_gaussian_linear(finalize_sample(x, r, y));
    CHECK(m.beta[0] == Catch::Approx(4.0).margin(1e-10));
    CHECK(m.beta[1] == Catch::Approx(0.0).margin(1e-10));
    CHECK(m.sigma2 == Catch::Approx(0.0).margin(1e-18));
  }
  SECTION("recovers the synthetic-design source law at large n1") {
    const auto gen = generate_paper_design(100000, 5);
    const auto m = fit_gaussian_linear(gen.sample);
    Eigen::VectorXd truth(4);
    truth << 0.0, -0.2, 0.2, 0.4;
    for (int j = 0; j < 4; ++j) {
      CHECK(m.beta[j] == Catch::Approx(truth[j]).margin(0.02));
    }
    CHECK(m.sigma2 == Catch::Approx(0.4).margin(0.02));
  }
  SECTION("rank-deficient design is rejected") {
    Eigen::MatrixXd x(6, 2);
    for (int i = 0; i < 6; ++i) {
      x(i, 0) = i;
      x(i, 1) = 2.0 * i;  // collinear
    }
    Eigen::VectorXi r = Eigen::VectorXi::Ones(6);
    r[5] = 0;
    Eigen::VectorXd y(6);
    y << 0.0, 1.0, 2.1, 2.9, 4.2, labelshift::absent_outcome();
    CHECK_THROWS_AS(fit_gaussian_linear(finalize_sample(x, r, y)),
                    labelshift::ComputeError);
  }
  SECTION("too few source rows") {
    Eigen::MatrixXd x(3, 2);
    x << 0.0, 1.0, 1.0, 0.0, 0.5, 0.5;
    Eigen::VectorXi r(3);
    r << 1, 1, 0;
    Eigen::VectorXd y(3);
    y << 0.0, 1.0, labelshift::absent_outcome();
    CHECK_THROWS_AS(fit_gaussian_linear(finalize_sample(x, r, y)),
                    labelshift::ConfigError);
  }
}

TEST_CASE("fixed model constants", "[models]") {
  const auto mis = paper_misspecified_model();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3);
  CHECK(mis.mean(x0) == Catch::Approx(0.003).margin(1e-12));
  CHECK(mis.sigma2 == 0.449);
  const Eigen::VectorXd f = labelshift::paper_feature_transform(
      (Eigen::VectorXd(3) << 2.0, 0.0, 3.0).finished());
  CHECK(f[0] == 2.0);
  CHECK(f[1] == 1.0);
  CHECK(f[2] == Catch::Approx(3.0 / 2.0 + 10.0).epsilon(1e-15));

  const auto tru = true_conditional_model();
  CHECK(tru.mean(x0) == 0.0);
  CHECK(tru.mean(Eigen::VectorXd::Ones(3)) == Catch::Approx(0.4).epsilon(1e-15));
  CHECK(tru.sigma2 == 0.4);
}

TEST_CASE("conditional expectations by quadrature and closed form", "[models]") {
  const auto tru = true_conditional_model();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3);
  const auto rule = gauss_legendre(50, -5.0, 5.0);

  CHECK(cond_expect(tru, [](double) { return 1.0; }, x0, rule) ==
        Catch::Approx(1.0).margin(1e-6));
  CHECK(cond_expect_exp(tru, 1.0, x0) ==
        Catch::Approx(std::exp(0.2)).epsilon(1e-15));
  CHECK(cond_expect(tru, [](double t) { return std::exp(t); }, x0, rule) ==
        Catch::Approx(std::exp(0.2)).margin(1e-8));

  SECTION("closed form matches quadrature over a spread of tilts and x") {
    const auto mis = paper_misspecified_model();
    Eigen::VectorXd x1(3);
    x1 << 0.4, -0.3, 1.2;
    for (const auto* model : {&tru, &mis}) {
      const double mu = model->mean(x1);
      const double sd = std::sqrt(model->sigma2);
      const auto wide = gauss_legendre(50, mu - 8.0 * sd, mu + 8.0 * sd);
      for (double s : {-1.0, 0.5, 1.2}) {
        const double closed = cond_expect_exp(*model, s, x1);
        const double quad = cond_expect(
            *model, [s](double t) { return std::exp(s * t); }, x1, wide);
        CHECK(quad == Catch::Approx(closed).epsilon(1e-8));
      }
    }
  }

  SECTION("mass check fires when the interval misses the density") {
    Eigen::VectorXd beta(2);
    beta << 10.0, 0.0;
    const auto far = labelshift::gaussian_linear_model(beta, 0.25);
    Eigen::VectorXd q(1);
    q << 0.0;
    CHECK_THROWS_AS(cond_expect(far, [](double) { return 1.0; }, q, rule),
                    labelshift::TruncationError);
  }
}

TEST_CASE("balancing weights", "[models]") {
  const auto rule = gauss_legendre(50, -5.0, 5.0);
  const auto tru = true_conditional_model();

  SECTION("constant ratio closed forms") {
    const auto s = zero_x_sample({0.1, -0.2}, 2);  // pi = 1/2
    const auto w1 = weights_w(exp_tilt_ratio(0.0, 0.0), tru, s, rule);
    for (int i = 0; i < s.n(); ++i) {
      CHECK(w1[i] == Catch::Approx(0.5).margin(1e-6));
    }
    const auto w2 = weights_w(exp_tilt_ratio(std::log(2.0), 0.0), tru, s, rule);
    for (int i = 0; i < s.n(); ++i) {
      CHECK(w2[i] == Catch::Approx(1.0 / 6.0).margin(1e-6));
    }
  }

  SECTION("quadrature path matches the closed form") {
    const auto s = zero_x_sample({0.1, -0.2}, 2);
    const auto mis = paper_misspecified_model();
    const auto ratio = exp_tilt_ratio(-0.7, 1.2);
    const auto w = weights_w(ratio, mis, s, rule);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3);
    const double e1 = std::exp(-0.7) * cond_expect_exp(mis, 1.2, x0);
    const double e2 = std::exp(-1.4) * cond_expect_exp(mis, 2.4, x0);
    const double closed = 1.0 / (e2 + 1.0 * e1);
    CHECK(w[0] == Catch::Approx(closed).epsilon(1e-8));
    CHECK((w.array() > 0.0).all());
  }

  SECTION("nonparametric path with constant ratio") {
    const auto gen = generate_paper_design(200, 21);
    const auto reg = make_nonparam_regressor(gen.sample);
    const auto w = weights_w(exp_tilt_ratio(0.0, 0.0), reg, gen.sample);
    const double pi = gen.sample.pi;
    const double expect = 1.0 / (1.0 + pi / (1.0 - pi));
    for (int i = 0; i < gen.sample.n(); ++i) {
      CHECK(w[i] == Catch::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("nonparametric conditional expectation", "[models]") {
  const auto gen = generate_paper_design(400, 31);
  const auto reg = make_nonparam_regressor(gen.sample);

  SECTION("constant values") {
    const Eigen::VectorXd vals =
        Eigen::VectorXd::Constant(gen.sample.n1, 3.25);
    Eigen::VectorXd q(3);
    q << 0.2, -0.1, 0.5;
    CHECK(nonparam_cond_expect(reg, vals, q) ==
          Catch::Approx(3.25).epsilon(1e-12));
  }

  SECTION("matches the analytic source-population regression at large n1") {
    const auto big = generate_paper_design(60000, 17);
    const auto breg = make_nonparam_regressor(big.sample, 1.0);
    Eigen::VectorXd q(3);
    q << -0.5, 0.5, 1.0;
    // E_p(Y | x) = -0.2 x1 + 0.2 x2 + 0.4 x3 = 0.6 at this query.
    const double got = nonparam_cond_expect(breg, breg.source_y, q);
    CHECK(got == Catch::Approx(0.6).margin(0.1));
  }

  SECTION("weight matrix rows are normalized NW weights") {
    const auto nw = labelshift::nw_weight_matrix(reg, gen.sample.x);
    REQUIRE(nw.rows() == gen.sample.n());
    REQUIRE(nw.cols() == gen.sample.n1);
    for (int i = 0; i < 5; ++i) {
      CHECK(nw.row(i).sum() == Catch::Approx(1.0).epsilon(1e-12));
    }
    const Eigen::VectorXd vals = reg.source_y;
    const double direct = nonparam_cond_expect(reg, vals, gen.sample.x.row(7).transpose());
    CHECK((nw.row(7) * vals)(0) == Catch::Approx(direct).epsilon(1e-12));
  }
}

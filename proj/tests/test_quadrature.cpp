#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <labelshift/quadrature.hpp>

using labelshift::QuadratureRule;
using labelshift::gauss_legendre;
using labelshift::integrate;
using labelshift::trapezoid;

namespace {

// Independent oracle: adaptive Simpson with recursive interval halving.
double adaptive_simpson(double (*f)(double), double a, double b, double fa,
                        double fm, double fb, double whole, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(double (*f)(double), double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Analytic monomial moment over [-1, 1].
double monomial_moment(int k) { return k % 2 == 1 ? 0.0 : 2.0 / (k + 1.0); }

}  // namespace

TEST_CASE("two point rule on [-1,1]", "[quadrature]") {
  const auto rule = gauss_legendre(2, -1.0, 1.0);
  REQUIRE(rule.m() == 2);
  const double r = 1.0 / std::sqrt(3.0);
  CHECK(rule.nodes[0] == Catch::Approx(-r).margin(1e-14));
  CHECK(rule.nodes[1] == Catch::Approx(r).margin(1e-14));
  CHECK(rule.weights[0] == Catch::Approx(1.0).margin(1e-14));
  CHECK(rule.weights[1] == Catch::Approx(1.0).margin(1e-14));
  CHECK(integrate(rule, [](double x) { return x * x; }) ==
        Catch::Approx(2.0 / 3.0).margin(1e-14));
}

TEST_CASE("one point rule is the midpoint", "[quadrature]") {
  const auto rule = gauss_legendre(1, 0.0, 2.0);
  CHECK(rule.nodes[0] == Catch::Approx(1.0).margin(1e-14));
  CHECK(rule.weights[0] == Catch::Approx(2.0).margin(1e-14));
}

TEST_CASE("polynomial exactness up to degree 2m-1", "[quadrature]") {
  for (int m = 1; m <= 10; ++m) {
    const auto rule = gauss_legendre(m, -1.0, 1.0);
    for (int k = 0; k <= 2 * m - 1; ++k) {
      const double got =
          integrate(rule, [k](double x) { return std::pow(x, k); });
      INFO("m=" << m << " k=" << k);
      CHECK(std::abs(got - monomial_moment(k)) < 1e-12);
    }
  }
}

TEST_CASE("weights sum to interval length and nodes are interior increasing",
          "[quadrature]") {
  for (auto [m, a, b] : {std::tuple{5, -5.0, 5.0}, std::tuple{50, -5.0, 5.0},
                         std::tuple{17, 0.25, 0.26}, std::tuple{3, -2.0, 9.0}}) {
    const auto rule = gauss_legendre(m, a, b);
    CHECK(rule.weights.sum() == Catch::Approx(b - a).margin(1e-12));
    CHECK((rule.weights.array() > 0.0).all());
    for (int i = 0; i < rule.m(); ++i) {
      CHECK(rule.nodes[i] > a);
      CHECK(rule.nodes[i] < b);
      if (i > 0) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
    }
  }
}

TEST_CASE("affine mapping consistency", "[quadrature]") {
  const double a = 0.5, b = 2.7;
  const auto mapped = gauss_legendre(8, a, b);
  const auto base = gauss_legendre(8, -1.0, 1.0);
  auto f = [](double x) { return x * x * x - 2.0 * x + 1.0; };
  const double direct = integrate(mapped, f);
  const double pulled =
      0.5 * (b - a) *
      integrate(base, [&](double u) { return f(0.5 * (a + b) + 0.5 * (b - a) * u); });
  CHECK(direct == Catch::Approx(pulled).margin(1e-12));
}

TEST_CASE("fifty point rule on [-5,5]", "[quadrature]") {
  const auto rule = gauss_legendre(50, -5.0, 5.0);
  CHECK(integrate(rule, [](double) { return 1.0; }) ==
        Catch::Approx(10.0).margin(1e-12));
  const auto unit = gauss_legendre(50, -1.0, 1.0);
  CHECK(std::abs(integrate(unit, [](double x) { return std::pow(x, 99); })) <
        1e-12);

  const double oracle = adaptive_simpson(std_normal_pdf, -5.0, 5.0, 1e-13);
  CHECK(oracle == Catch::Approx(0.99999943).margin(5e-9));
  const double got = integrate(rule, std_normal_pdf);
  CHECK(got == Catch::Approx(0.99999943).margin(1e-6));
  CHECK(got == Catch::Approx(oracle).margin(1e-6));
}

TEST_CASE("trapezoid rule hits endpoints and integrates lines exactly",
          "[quadrature]") {
  const auto rule = trapezoid(50, 0.0, 19.0);
  REQUIRE(rule.m() == 50);
  CHECK(rule.nodes[0] == 0.0);
  CHECK(rule.nodes[49] == Catch::Approx(19.0).margin(1e-12));
  CHECK(rule.weights.sum() == Catch::Approx(19.0).margin(1e-12));
  CHECK(integrate(rule, [](double x) { return 3.0 * x - 1.0; }) ==
        Catch::Approx(3.0 / 2.0 * 19.0 * 19.0 - 19.0).margin(1e-9));
}

TEST_CASE("quadrature rejects bad arguments", "[quadrature]") {
  CHECK_THROWS_AS(gauss_legendre(0, -1.0, 1.0), labelshift::ConfigError);
  CHECK_THROWS_AS(gauss_legendre(5, 1.0, 1.0), labelshift::ConfigError);
  CHECK_THROWS_AS(gauss_legendre(5, 2.0, 1.0), labelshift::ConfigError);
  CHECK_THROWS_AS(trapezoid(1, 0.0, 1.0), labelshift::ConfigError);
}

TEST_CASE("integrate rejects non finite integrands", "[quadrature]") {
  const auto rule = gauss_legendre(4, -1.0, 1.0);
  CHECK_THROWS_AS(integrate(rule, [](double x) { return 1.0 / (x - x); }),
                  labelshift::ComputeError);
}

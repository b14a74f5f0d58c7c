#include <doctest.h>

#include <cmath>
#include <random>

#include "etsim/errors.hpp"
#include "etsim/matrix.hpp"

using namespace etsim;

namespace {

void check_close(const Matrix& got, const Matrix& want, double tol) {
  REQUIRE(got.rows() == want.rows());
  REQUIRE(got.cols() == want.cols());
  for (std::size_t r = 0; r < got.rows(); ++r)
    for (std::size_t c = 0; c < got.cols(); ++c) CHECK(got(r, c) == doctest::Approx(want(r, c)).epsilon(tol));
}

// Coefficients c_1..c_n of prod_k (s + r_k).
std::vector<double> poly_from_roots(const std::vector<double>& roots) {
  std::vector<double> c{1.0};
  for (double r : roots) {
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
      next[k] += c[k];
      next[k + 1] += r * c[k];
    }
    c = next;
  }
  return {c.begin() + 1, c.end()};
}

}  // namespace

TEST_SUITE("matrix") {

TEST_CASE("observer companion layout") {
  const auto oc = build_observer_companion(HurwitzCoeffs({8.0, 1.0}));
  CHECK(oc.a_e == Matrix{{-8.0, 1.0}, {-1.0, 0.0}});
  CHECK(oc.g_e == std::vector<double>{8.0, 1.0});

  CHECK(build_observer_companion(HurwitzCoeffs({1.0})).a_e == Matrix{{-1.0}});

  const auto three = build_observer_companion(HurwitzCoeffs({2.0, 3.0, 4.0})).a_e;
  CHECK(three == Matrix{{-2.0, 1.0, 0.0}, {-3.0, 0.0, 1.0}, {-4.0, 0.0, 0.0}});
}

TEST_CASE("controller companion layout") {
  const auto cc = build_controller_companion(HurwitzCoeffs({20.0, 2.0}));
  CHECK(cc.a_z == Matrix{{0.0, 1.0}, {-2.0, -20.0}});
  CHECK(cc.r_z == std::vector<double>{0.0, 1.0});
  CHECK(cc.d_z == std::vector<double>{1.0, 0.0});

  CHECK(build_controller_companion(HurwitzCoeffs({1.0})).a_z == Matrix{{-1.0}});

  const auto three = build_controller_companion(HurwitzCoeffs({3.0, 2.0, 1.0})).a_z;
  CHECK(three == Matrix{{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {-1.0, -2.0, -3.0}});
}

TEST_CASE("coefficient validation") {
  CHECK_THROWS_AS(HurwitzCoeffs({8.0, 0.0}), InvalidInputError);
  CHECK_THROWS_AS(HurwitzCoeffs({-1.0}), InvalidInputError);
  CHECK_THROWS_AS(HurwitzCoeffs({}), InvalidInputError);
  // positive but not Hurwitz: s^3 + s^2 + s + 5
  CHECK_THROWS_AS(HurwitzCoeffs({1.0, 1.0, 5.0}), InvalidInputError);
  CHECK(is_hurwitz_polynomial(std::vector<double>{8.0, 1.0}));
  CHECK_FALSE(is_hurwitz_polynomial(std::vector<double>{1.0, 1.0, 5.0}));
}

TEST_CASE("lyapunov fixtures") {
  const Matrix ae{{-8.0, 1.0}, {-1.0, 0.0}};
  const Matrix p = solve_lyapunov(ae);
  const Matrix p_want{{0.125, -0.5}, {-0.5, 4.125}};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(p(r, c) - p_want(r, c)) <= 1e-9);
  CHECK(lyapunov_residual(ae, p) <= 1e-10);

  const Matrix az{{0.0, 1.0}, {-2.0, -20.0}};
  const Matrix q = solve_lyapunov(az);
  const Matrix q_want{{5.075, 0.25}, {0.25, 0.0375}};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(q(r, c) - q_want(r, c)) <= 1e-9);
  CHECK(lyapunov_residual(az, q) <= 1e-10);

  CHECK(solve_lyapunov(Matrix{{-1.0}})(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("lyapunov rejects unstable input") {
  CHECK_THROWS_AS(solve_lyapunov(Matrix{{0.0, 1.0}, {0.0, 0.0}}), NoSolutionError);
  CHECK_THROWS_AS(solve_lyapunov(Matrix{{1.0}}), NoSolutionError);
  CHECK_THROWS_AS(solve_lyapunov(Matrix(2, 3)), InvalidInputError);
}

TEST_CASE("spectral norm examples") {
  // closed form for symmetric 2x2: mean + sqrt(halfdiff^2 + off^2)
  const double p_norm = 2.125 + std::sqrt(4.0 + 0.25);
  CHECK(spectral_norm(Matrix{{0.125, -0.5}, {-0.5, 4.125}}) == doctest::Approx(p_norm).epsilon(1e-9));
  CHECK(spectral_norm(Matrix{{0.125, -0.5}, {-0.5, 4.125}}) == doctest::Approx(4.18655).epsilon(1e-5));
  CHECK(spectral_norm(Matrix::identity(3)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spectral_norm(Matrix{{5.075, 0.25}, {0.25, 0.0375}}) == doctest::Approx(5.08738).epsilon(1e-5));
  CHECK(spectral_norm(Matrix{{-3.0, 0.0}, {0.0, 1.0}}) == doctest::Approx(3.0));
  CHECK_THROWS_AS(spectral_norm(Matrix{{1.0, 2.0}, {0.0, 1.0}}), InvalidInputError);
}

TEST_CASE("is_hurwitz examples") {
  CHECK(is_hurwitz(Matrix{{-8.0, 1.0}, {-1.0, 0.0}}));
  CHECK_FALSE(is_hurwitz(Matrix{{0.0, 1.0}, {0.0, 0.0}}));
  CHECK(is_hurwitz(Matrix{{0.0, 1.0}, {-2.0, -20.0}}));
  // oscillator: purely imaginary pair
  CHECK_FALSE(is_hurwitz(Matrix{{0.0, 1.0}, {-1.0, 0.0}}));
}

TEST_CASE("characteristic polynomial and expm") {
  const auto c = characteristic_polynomial(Matrix{{0.0, 1.0}, {-2.0, -20.0}});
  REQUIRE(c.size() == 2);
  CHECK(c[0] == doctest::Approx(20.0));
  CHECK(c[1] == doctest::Approx(2.0));

  const Matrix e = expm(Matrix{{-1.0, 0.0}, {0.0, 2.0}});
  CHECK(e(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
  CHECK(e(1, 1) == doctest::Approx(std::exp(2.0)).epsilon(1e-13));
  CHECK(e(0, 1) == doctest::Approx(0.0));

  // rotation generator
  const Matrix r = expm(Matrix{{0.0, -1.0}, {1.0, 0.0}});
  check_close(r, Matrix{{std::cos(1.0), -std::sin(1.0)}, {std::sin(1.0), std::cos(1.0)}}, 1e-13);
}

TEST_CASE("lyapunov solutions over random stable companions") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> root(0.5, 3.0);
  std::uniform_int_distribution<int> size(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> roots(static_cast<std::size_t>(size(rng)));
    for (double& r : roots) r = root(rng);
    const HurwitzCoeffs coeffs(poly_from_roots(roots));
    for (const Matrix& a :
         {build_observer_companion(coeffs).a_e, build_controller_companion(coeffs).a_z}) {
      REQUIRE(is_hurwitz(a));
      const Matrix x = solve_lyapunov(a);
      CHECK(lyapunov_residual(a, x) <= 1e-10);
      CHECK(x.is_symmetric(0.0));
      for (double ev : symmetric_eigenvalues(x)) CHECK(ev > 0.0);
    }
  }
}

TEST_CASE("spectral norm agrees with the Rayleigh quotient") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> entry(-3.0, 3.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  for (int trial = 0; trial < 20; ++trial) {
    const double off = entry(rng);
    const Matrix m{{entry(rng), off}, {off, entry(rng)}};
    double best = 0.0;
    for (int s = 0; s < 10000; ++s) {
      const double th = angle(rng);
      const std::vector<double> v{std::cos(th), std::sin(th)};
      best = std::max(best, std::abs(quadratic_form(m, v)));
    }
    CHECK(std::abs(spectral_norm(m) - best) <= 1e-6 * std::max(1.0, best));
  }
}

}  // TEST_SUITE

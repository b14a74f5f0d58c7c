#include <doctest.h>

#include <cmath>
#include <random>

#include "etsim/gain_design.hpp"
#include "etsim/observer_controller.hpp"
#include "fixtures.hpp"

using namespace etsim;

TEST_SUITE("observer_controller") {

TEST_CASE("observer drift") {
  const auto d = fixtures::benchmark_design();
  auto f = observer_drift(d, std::vector<double>{0.2, 0.2}, 0.0);
  CHECK(f[0] == doctest::Approx(-6.2).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(-3.2).epsilon(1e-14));

  f = observer_drift(d, std::vector<double>{0.0, 0.0}, 0.0);
  CHECK(f[0] == 0.0);
  CHECK(f[1] == 0.0);

  f = observer_drift(d, std::vector<double>{0.0, 1.0}, 2.0);
  CHECK(f[0] == 1.0);
  CHECK(f[1] == 2.0);
}

TEST_CASE("transform and reconstruction examples") {
  const auto d = fixtures::benchmark_design();
  const auto t = transform(d, std::vector<double>{0.1, 0.1}, std::vector<double>{0.2, 0.2});
  CHECK(t.z[0] == doctest::Approx(0.1));
  CHECK(t.z[1] == doctest::Approx(0.2 / 12.0).epsilon(1e-14));
  CHECK(t.e[0] == doctest::Approx(-0.1));
  CHECK(t.e[1] == doctest::Approx(-0.025));
  CHECK(t.z_star[0] == 0.0);
  CHECK(t.z_star[1] == t.z[1]);

  const auto back = reconstruct_x(d, t);
  CHECK(back[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(back[1] == doctest::Approx(0.1).epsilon(1e-14));

  const auto zero = transform(d, std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0});
  for (double v : zero.z) CHECK(v == 0.0);
  for (double v : zero.e) CHECK(v == 0.0);
  for (double v : reconstruct_x(d, zero)) CHECK(v == 0.0);

  const auto same = transform(d, std::vector<double>{1.0, 12.0}, std::vector<double>{1.0, 12.0});
  CHECK(same.e[0] == 0.0);
  CHECK(same.e[1] == 0.0);
  CHECK(same.z[0] == 1.0);
  CHECK(same.z[1] == doctest::Approx(1.0));

  TransformedState manual{{1.0, 1.0}, {0.0, 0.0}, {0.0, 1.0}};
  const auto x = reconstruct_x(d, manual);
  CHECK(x[0] == 1.0);
  CHECK(x[1] == doctest::Approx(12.0));

  CHECK(z_star_norm_sq(d, std::vector<double>{0.2, 0.2}) ==
        doctest::Approx(t.z[1] * t.z[1]).epsilon(1e-14));
}

TEST_CASE("control laws") {
  const auto d = fixtures::benchmark_design();
  CHECK(control_continuous(d, 0.1, std::vector<double>{0.0, 0.2}) == doctest::Approx(-76.8).epsilon(1e-13));
  CHECK(control_continuous(d, 0.0, std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(control_continuous(d, -0.1, std::vector<double>{0.0, -0.2}) == doctest::Approx(76.8).epsilon(1e-13));
  CHECK(control_event(d, 0.1, std::vector<double>{0.5, 0.2}) == doctest::Approx(-76.8).epsilon(1e-13));
  CHECK(control_event(d, 0.0, std::vector<double>{0.0, 0.0}) == 0.0);
  // first estimate entry is not used by either law
  CHECK(control_continuous(d, 0.1, std::vector<double>{9.0, 0.2}) ==
        control_continuous(d, 0.1, std::vector<double>{-9.0, 0.2}));
}

TEST_CASE("general order pairing") {
  // n = 3: u = -kappa (b3 y + b2 xhat2/(L1L2) + b1 xhat3/(L1L2)^2)
  const SubsystemDesign d{HurwitzCoeffs({2.0, 3.0, 4.0}), HurwitzCoeffs({3.0, 2.0, 1.0}), 2.0, 1.5};
  const double g = 3.0, kappa = g * g * g;
  const std::vector<double> xh{0.3, -0.2, 0.7};
  const double want = -kappa * (1.0 * 0.4 + 2.0 * -0.2 / g + 3.0 * 0.7 / (g * g));
  CHECK(control_continuous(d, 0.4, xh) == doctest::Approx(want).epsilon(1e-13));

  const auto f = observer_drift(d, xh, 1.5);
  CHECK(f[0] == doctest::Approx(-0.2 - 2.0 * 2.0 * 0.3));
  CHECK(f[1] == doctest::Approx(0.7 - 4.0 * 3.0 * 0.3));
  CHECK(f[2] == doctest::Approx(1.5 - 8.0 * 4.0 * 0.3));
}

TEST_CASE("round trip and state bound over random samples") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  std::uniform_real_distribution<double> gain(1.0, 20.0);
  std::uniform_int_distribution<int> order(1, 4);
  const std::vector<std::vector<double>> polys{{1.0}, {8.0, 1.0}, {3.0, 3.0, 1.0}, {4.0, 6.0, 4.0, 1.0}};
  int round_trip_failures = 0, bound_violations = 0;
  for (int s = 0; s < 10000; ++s) {
    const auto n = static_cast<std::size_t>(order(rng));
    const HurwitzCoeffs c(polys[n - 1]);
    const SubsystemDesign d{c, c, gain(rng), gain(rng)};

    std::vector<double> x(n), xh(n);
    for (auto& v : x) v = val(rng);
    for (auto& v : xh) v = val(rng);
    const auto back = reconstruct_x(d, transform(d, x, xh));
    for (std::size_t k = 0; k < n; ++k)
      if (std::abs(back[k] - x[k]) > 1e-12 * std::max(1.0, std::abs(x[k]))) ++round_trip_failures;

    TransformedState t;
    t.z.resize(n);
    t.e.resize(n);
    for (auto& v : t.z) v = val(rng);
    for (auto& v : t.e) v = val(rng);
    t.z_star = t.z;
    t.z_star[0] = 0.0;
    const auto xr = reconstruct_x(d, t);
    double xs = 0.0, zs = 0.0, es = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      xs += xr[k] * xr[k];
      zs += t.z[k] * t.z[k];
      es += t.e[k] * t.e[k];
    }
    const auto b = state_bound_constants(n, d.l1, d.l2);
    if (xs > b.eps_x * zs + b.sigma_x * es) ++bound_violations;
  }
  CHECK(round_trip_failures == 0);
  CHECK(bound_violations == 0);
}

TEST_CASE("control laws are linear and agree on equal outputs") {
  const auto d = fixtures::benchmark_design();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  for (int s = 0; s < 1000; ++s) {
    const double y = val(rng), a = val(rng);
    const std::vector<double> xh{val(rng), val(rng)};
    const std::vector<double> scaled{a * xh[0], a * xh[1]};
    const double u = control_continuous(d, y, xh);
    CHECK(control_continuous(d, a * y, scaled) == doctest::Approx(a * u).epsilon(1e-12));
    CHECK(control_event(d, y, xh) == u);
  }
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "etsim/errors.hpp"
#include "etsim/plant.hpp"

using namespace etsim;

namespace {

PlantState state_at(double a, double b, double c, double d, double t = 0.0) {
  return {{{a, b}, {c, d}}, t};
}

}  // namespace

TEST_SUITE("plant") {

TEST_CASE("drift at the documented initial state") {
  const auto sc = section6_scenario();
  const std::vector<double> u{0.0, 0.0};
  const auto f = eval_drift(sc, state_at(0.1, 0.1, 0.1, 0.1), u);
  const double r = std::sqrt(0.02);
  CHECK(f[0][0] == doctest::Approx(0.1 + 0.15 * r).epsilon(1e-14));
  CHECK(f[0][0] == doctest::Approx(0.1212132).epsilon(1e-6));
  CHECK(f[0][1] == doctest::Approx(0.1 * r + 0.15 * std::sin(r)).epsilon(1e-14));
  CHECK(f[0][1] == doctest::Approx(0.0352848).epsilon(1e-5));
}

TEST_CASE("origin is an equilibrium of the noiseless plant") {
  const auto sc = section6_scenario();
  const std::vector<double> u{0.0, 0.0};
  const auto st = state_at(0.0, 0.0, 0.0, 0.0, 1.3);
  for (const auto& row : eval_drift(sc, st, u))
    for (double v : row) CHECK(v == 0.0);
  for (const auto& spec : sc.subsystems) {
    const auto g = eval_diffusion(spec, std::vector<double>{0.0, 0.0});
    for (double v : g.entries()) CHECK(v == 0.0);
  }
}

TEST_CASE("last row carries the input") {
  const auto sc = section6_scenario();
  const std::vector<double> u{2.0, -3.0};
  const auto f = eval_drift(sc, state_at(0.0, 0.0, 0.0, 0.0), u);
  CHECK(f[0][1] == 2.0);
  CHECK(f[1][1] == -3.0);
  CHECK(f[0][0] == 0.0);
}

TEST_CASE("non-finite coupling names the term") {
  Scenario sc = section6_scenario();
  sc.subsystems[1].couplings[2].fn = [](const PlantState&, std::span<const double>) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  const std::vector<double> u{0.0, 0.0};
  try {
    eval_drift(sc, state_at(0.1, 0.1, 0.1, 0.1), u);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(std::string(e.what()).find("f_{22,2}") != std::string::npos);
  }
  CHECK_THROWS_AS(eval_drift(section6_scenario(), state_at(0.1, 0.1, 0.1, 0.1),
                             std::vector<double>{NAN, 0.0}),
                  InvalidInputError);
}

TEST_CASE("diffusion rows") {
  const auto sc = section6_scenario();
  const auto& spec = sc.subsystems[0];
  const auto g = eval_diffusion(spec, std::vector<double>{0.1, 0.1});
  CHECK(g.rows() == 2);
  CHECK(g.cols() == 1);
  CHECK(g(0, 0) == doctest::Approx(0.5 * 0.1 * std::sin(0.02)).epsilon(1e-14));
  CHECK(g(0, 0) == doctest::Approx(9.9993e-4).epsilon(1e-4));
  CHECK(g(1, 0) == doctest::Approx(0.25 * 0.01 * 0.01 * std::cos(0.1)).epsilon(1e-14));
  CHECK(g(1, 0) == doctest::Approx(2.48751e-5).epsilon(1e-5));
}

TEST_CASE("diffusion writing past p is a configuration error") {
  Scenario sc = section6_scenario();
  sc.subsystems[0].diffusion[1].fn = [](std::span<const double>, std::span<double> out) {
    out[0] = 0.0;
    out[1] = 0.0;
  };
  CHECK_THROWS_AS(eval_diffusion(sc.subsystems[0], std::vector<double>{0.1, 0.1}), ConfigError);
}

TEST_CASE("output applies the sensor sensitivity") {
  const auto sc = section6_scenario();
  const auto& spec = sc.subsystems[0];
  const std::vector<double> x{0.1, 0.4};
  CHECK(eval_output(spec, x, 0.0) == doctest::Approx(0.1));
  CHECK(eval_output(spec, x, M_PI / 20.0) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(eval_output(spec, std::vector<double>{0.0, 1.0}, 0.37) == 0.0);
}

TEST_CASE("sensitivity stays in its declared band") {
  const auto sc = section6_scenario();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> t(0.0, 100.0);
  for (int s = 0; s < 10000; ++s) CHECK(sensitivity_in_band(sc.subsystems[0], t(rng)));

  ScenarioOptions wide;
  wide.sensitivity_amplitude = 0.4;
  const auto bad = section6_scenario(wide);
  CHECK_FALSE(sensitivity_in_band(bad.subsystems[0], M_PI / 20.0));
}

TEST_CASE("declared bounds on the unit box") {
  const auto sc = section6_scenario();
  BoundCheckOptions opts;
  opts.state_box.assign(4, Interval{-1.0, 1.0});
  opts.samples = 100000;
  opts.seed = 0;
  const auto rep = validate_bounds(sc, opts);
  CHECK(rep.samples == 100000);

  auto coupling = [&](std::size_t i, std::size_t j, std::size_t k) {
    for (const auto& c : rep.couplings)
      if (c.i == i && c.j == j && c.k == k) return c;
    FAIL("missing coupling entry");
    return CouplingBoundEntry{};
  };
  const auto f121 = coupling(0, 1, 0);
  CHECK(f121.empirical_sup <= 0.15 * (1.0 + 1e-12));
  CHECK(f121.empirical_sup == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(f121.pass);
  const auto f222 = coupling(1, 1, 1);
  CHECK(f222.empirical_sup <= 0.1);
  CHECK(f222.pass);

  for (const auto& d : rep.diffusion) {
    CHECK(d.pass);
    CHECK(d.local_only == (d.k == 1));
  }
  // brute-force sup of 0.25 |x1^2 x2^2 cos x2| / (|x1| + |x2|) over the box
  double brute = 0.0;
  for (int a = -200; a <= 200; ++a)
    for (int b = -200; b <= 200; ++b) {
      const double x1 = a / 200.0, x2 = b / 200.0;
      const double den = std::abs(x1) + std::abs(x2);
      if (den < 1e-12) continue;
      brute = std::max(brute, 0.25 * x1 * x1 * x2 * x2 * std::abs(std::cos(x2)) / den);
    }
  for (const auto& d : rep.diffusion)
    if (d.k == 1) CHECK(d.empirical_sup <= brute * (1.0 + 1e-12));
  CHECK(rep.all_pass());
}

TEST_CASE("bound validation is deterministic in the seed") {
  const auto sc = section6_scenario();
  BoundCheckOptions opts;
  opts.samples = 5000;
  opts.seed = 42;
  const auto a = validate_bounds(sc, opts);
  const auto b = validate_bounds(sc, opts);
  REQUIRE(a.couplings.size() == b.couplings.size());
  for (std::size_t k = 0; k < a.couplings.size(); ++k)
    CHECK(a.couplings[k].empirical_sup == b.couplings[k].empirical_sup);
  for (std::size_t k = 0; k < a.diffusion.size(); ++k)
    CHECK(a.diffusion[k].empirical_sup == b.diffusion[k].empirical_sup);

  opts.seed = 43;
  const auto c = validate_bounds(sc, opts);
  CHECK(c.couplings[0].empirical_sup != a.couplings[0].empirical_sup);
  opts.samples = 0;
  CHECK_THROWS_AS(validate_bounds(sc, opts), InvalidInputError);
}

TEST_CASE("scenario registry") {
  CHECK_THROWS_AS(make_scenario("nope"), ConfigError);
  register_scenario("scaled_copy", [](const ScenarioOptions& o) {
    auto sc = section6_scenario(o);
    sc.name = "scaled_copy";
    return sc;
  });
  CHECK(make_scenario("scaled_copy").name == "scaled_copy");
  CHECK(make_scenario("section6").total_order() == 4);
  CHECK(section6_scenario().coupling_bound(0, 1, 1) == 0.15);
  CHECK(section6_scenario().coupling_bound(1, 1, 0) == 0.0);
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "etsim/errors.hpp"
#include "etsim/sde_sim.hpp"
#include "fixtures.hpp"

using namespace etsim;

namespace {

std::string trajectory_text(const RunRecord& r) {
  std::ostringstream a;
  write_trajectory_csv(a, r);
  write_events_csv(a, r);
  return a.str();
}

// Closed loop of one decoupled, noiseless subsystem in (x1, x2, xhat1, xhat2)
// with the benchmark gains: u = -288 x1 - 240 xhat2.
Matrix linear_closed_loop() {
  return Matrix{{0.0, 1.0, 0.0, 0.0},
                {-288.0, 0.0, 0.0, -240.0},
                {0.0, 0.0, -32.0, 1.0},
                {-288.0, 0.0, -16.0, -240.0}};
}

double linear_error(double h, double horizon) {
  ScenarioOptions quiet;
  quiet.noise_scale = 0.0;
  quiet.coupling_scale = 0.0;
  quiet.sensitivity_amplitude = 0.0;
  const auto sc = section6_scenario(quiet);
  auto cfg = fixtures::benchmark_sim(ControlMode::Continuous, ClockMode::Proposed, horizon);
  cfg.step = h;
  cfg.record_every = 1u << 30;
  const auto rec = run_trajectory(sc, fixtures::benchmark_gains(), std::nullopt, cfg);
  const auto& last = rec.snapshots.back();
  REQUIRE(last.t == doctest::Approx(horizon));

  const Matrix phi = expm(horizon * linear_closed_loop());
  const std::vector<double> s0{0.1, 0.1, 0.2, 0.2};
  const auto ref = phi * s0;
  double err = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const double d[4] = {last.x[2 * i] - ref[0], last.x[2 * i + 1] - ref[1], last.xhat[2 * i] - ref[2],
                         last.xhat[2 * i + 1] - ref[3]};
    for (double v : d) err = std::max(err, std::abs(v));
  }
  return err;
}

}  // namespace

TEST_SUITE("sde_sim") {

TEST_CASE("wiener increments") {
  WienerStream s(1, 0, 0);
  for (double v : wiener_increments(s, 3, 0.0)) CHECK(v == 0.0);

  const double h = 1e-3;
  const int n = 100000;
  WienerStream lln(99, 3, 1);
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double v = wiener_increments(lln, 1, h)[0];
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(h / n));
  CHECK(std::abs(var - h) <= 0.05 * h);

  WienerStream a(7, 2, 1), b(7, 2, 1), other(7, 2, 0), rep(7, 3, 1);
  bool differs = false, rep_differs = false;
  for (int k = 0; k < 100; ++k) {
    const auto x = wiener_increments(a, 2, h);
    CHECK(x == wiener_increments(b, 2, h));
    if (x != wiener_increments(other, 2, h)) differs = true;
    if (x != wiener_increments(rep, 2, h)) rep_differs = true;
  }
  CHECK(differs);
  CHECK(rep_differs);
}

TEST_CASE("euler-maruyama step") {
  const std::vector<double> x{1.0}, drift{-1.0}, g{0.5};
  CHECK(em_step(x, drift, g, 0.01, std::vector<double>{0.02})[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(em_step(x, std::vector<double>{0.0}, g, 0.01, std::vector<double>{0.0})[0] == 1.0);

  // 2 states, p = 2
  const auto two = em_step(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, -1.0},
                           std::vector<double>{1.0, 2.0, 0.0, 3.0}, 0.1, std::vector<double>{0.5, -1.0});
  CHECK(two[0] == doctest::Approx(1.0 + 0.1 + 0.5 - 2.0));
  CHECK(two[1] == doctest::Approx(2.0 - 0.1 - 3.0));

  CHECK_THROWS_AS(em_step(x, std::vector<double>{INFINITY}, g, 0.01, std::vector<double>{0.0}),
                  DivergenceError);
}

TEST_CASE("strong order on geometric brownian motion") {
  // dx = -x dt + 0.5 x dw, exact x(T) = x0 exp(-1.125 T + 0.5 w(T))
  const int paths = 1000;
  const double fine = 5e-4;
  const int fine_steps = 2000;
  double err_coarse = 0.0, err_fine = 0.0;
  WienerStream w(2024, 0, 0);
  for (int p = 0; p < paths; ++p) {
    std::vector<double> dw(fine_steps);
    double wt = 0.0;
    for (auto& v : dw) {
      v = wiener_increments(w, 1, fine)[0];
      wt += v;
    }
    const double exact = std::exp(-1.125 + 0.5 * wt);
    std::vector<double> xf{1.0}, xc{1.0};
    for (int k = 0; k < fine_steps; ++k)
      xf = em_step(xf, std::vector<double>{-xf[0]}, std::vector<double>{0.5 * xf[0]}, fine,
                   std::vector<double>{dw[k]});
    for (int k = 0; k < fine_steps; k += 2)
      xc = em_step(xc, std::vector<double>{-xc[0]}, std::vector<double>{0.5 * xc[0]}, 2.0 * fine,
                   std::vector<double>{dw[k] + dw[k + 1]});
    err_fine += std::abs(xf[0] - exact);
    err_coarse += std::abs(xc[0] - exact);
  }
  const double ratio = err_coarse / err_fine;
  CHECK(ratio >= 1.25);
  CHECK(ratio <= 1.6);
}

TEST_CASE("config validation") {
  const auto sc = section6_scenario();
  auto cfg = fixtures::benchmark_sim();
  CHECK_NOTHROW(cfg.validate(sc));
  cfg.step = 0.0;
  CHECK_THROWS_AS(cfg.validate(sc), ConfigError);
  cfg = fixtures::benchmark_sim();
  cfg.x0 = {{0.1, 0.1}};
  CHECK_THROWS_AS(cfg.validate(sc), ConfigError);
  cfg = fixtures::benchmark_sim();
  cfg.xhat0[1] = {0.1};
  CHECK_THROWS_AS(cfg.validate(sc), ConfigError);
  cfg = fixtures::benchmark_sim();
  cfg.step = 20.0;
  CHECK_THROWS_AS(cfg.validate(sc), ConfigError);
  CHECK(fixtures::benchmark_sim().steps() == 100000);
}

TEST_CASE("first grid step matches a straight-line evaluation") {
  const auto sc = section6_scenario();
  const auto gains = fixtures::benchmark_gains();
  const auto cfg = fixtures::benchmark_sim();
  ClosedLoop loop(sc, gains, TriggerParams::uniform({}), cfg);
  loop.step();

  const double h = 1e-4;
  // both subsystems transmit y = 0.1 and v = -288*0.1 - 240*0.2 at t = 0
  const double u = -(144.0 * (2.0 * 0.1 + 20.0 * 0.2 / 12.0));
  CHECK(u == doctest::Approx(-76.8));
  const double r1 = std::hypot(0.1, 0.1), r2 = std::hypot(0.1, 0.1);
  const double f1[2] = {0.1 + 0.1 * std::sin(u * u) * r1 + 0.15 * r2, u + 0.1 * r1 + 0.15 * std::sin(r2)};
  const double f2[2] = {0.1 + 0.15 * r1, u + 0.15 * r1 + 0.1 * std::log1p(r2)};
  const double g[2] = {0.5 * 0.1 * std::sin(0.2 * 0.1), 0.25 * 0.1 * 0.1 * 0.1 * 0.1 * std::cos(0.1)};
  const double* f[2] = {f1, f2};
  for (std::size_t i = 0; i < 2; ++i) {
    WienerStream w(cfg.seed, 0, i);
    const double dw = wiener_increments(w, 1, h)[0];
    for (std::size_t k = 0; k < 2; ++k) CHECK(loop.x()[i][k] == 0.1 + (f[i][k] * h + g[k] * dw));
    CHECK(loop.xhat()[i][0] == doctest::Approx(0.2 + (0.2 - 32.0 * 0.2) * h).epsilon(1e-15));
    CHECK(loop.xhat()[i][1] == doctest::Approx(0.2 + (u - 16.0 * 0.2) * h).epsilon(1e-15));

    const auto& ts = loop.trigger_state(i);
    const double zs = (0.2 / 12.0) * (0.2 / 12.0);
    CHECK(ts[Channel::Output].xi == doctest::Approx(0.05 * 0.05 * zs * h).epsilon(1e-14));
    CHECK(ts[Channel::Output].pi == 0.5 - 15.0 * 0.25 * h);
    CHECK(ts[Channel::Input].pi == 0.5 - 15.0 * 0.25 * h);
    CHECK(ts[Channel::Output].held == 0.1);
    CHECK(ts[Channel::Input].held == doctest::Approx(-76.8));
    CHECK(ts[Channel::Output].events == std::vector<double>{0.0});
  }
}

TEST_CASE("fresh output event leaves no gap for the controller") {
  const auto sc = section6_scenario();
  const auto gains = fixtures::benchmark_gains();
  ClosedLoop loop(sc, gains, TriggerParams::uniform({}), fixtures::benchmark_sim());
  for (int k = 0; k < 3000; ++k) {
    loop.prepare();
    const auto snap = loop.snapshot();
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& ev = loop.trigger_state(i)[Channel::Output].events;
      if (!ev.empty() && ev.back() == loop.time()) CHECK(snap.y_held[i] == snap.y[i]);
    }
    loop.step();
  }
}

TEST_CASE("noiseless decoupled loop follows the matrix exponential") {
  CHECK(is_hurwitz(linear_closed_loop()));
  const double e1 = linear_error(1e-3, 1.0);
  const double e2 = linear_error(5e-4, 1.0);
  CHECK(e1 < 1e-2);
  const double ratio = e1 / e2;
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("zero horizon records only the initial state") {
  auto cfg = fixtures::benchmark_sim(ControlMode::Triggered, ClockMode::Proposed, 0.0);
  const auto rec = simulate(section6_scenario(), fixtures::benchmark_gains(), TriggerParams::uniform({}), cfg);
  REQUIRE(rec.snapshots.size() == 1);
  CHECK(rec.snapshots[0].t == 0.0);
  CHECK(rec.snapshots[0].x == std::vector<double>{0.1, 0.1, 0.1, 0.1});
  CHECK_FALSE(rec.diverged);
}

TEST_CASE("runs are reproducible and respect the grid floor") {
  const auto sc = section6_scenario();
  const auto gains = fixtures::benchmark_gains();
  auto cfg = fixtures::benchmark_sim(ControlMode::Triggered, ClockMode::Proposed, 2.0);
  const auto a = simulate(sc, gains, TriggerParams::uniform({}), cfg);
  const auto b = simulate(sc, gains, TriggerParams::uniform({}), cfg);
  CHECK(trajectory_text(a) == trajectory_text(b));
  CHECK_FALSE(a.diverged);
  for (std::size_t i = 0; i < 2; ++i)
    for (Channel c : {Channel::Output, Channel::Input}) {
      const auto& ev = a.event_times(i, c);
      CHECK(ev.front() == 0.0);
      for (double d : inter_event_times(ev)) CHECK(d >= cfg.step * (1.0 - 1e-9));
    }
  cfg.replica = 1;
  CHECK(trajectory_text(simulate(sc, gains, TriggerParams::uniform({}), cfg)) != trajectory_text(a));
}

TEST_CASE("time-regulation dwell floor holds up to divergence") {
  const auto sc = section6_scenario();
  auto cfg = fixtures::benchmark_sim(ControlMode::Triggered, ClockMode::TimeRegulation, 2.0);
  const auto rec = simulate(sc, fixtures::benchmark_gains(), TriggerParams::uniform({}), cfg);
  const double bound = 4.0 / 45.0 - 2.0 * cfg.step;
  std::size_t intervals = 0;
  for (std::size_t i = 0; i < 2; ++i)
    for (Channel c : {Channel::Output, Channel::Input})
      for (double d : inter_event_times(rec.event_times(i, c))) {
        CHECK(d >= bound);
        ++intervals;
      }
  CHECK(intervals > 0);
}

TEST_CASE("divergence is captured or thrown") {
  const auto sc = section6_scenario();
  auto cfg = fixtures::benchmark_sim(ControlMode::Triggered, ClockMode::Proposed, 1.0);
  cfg.divergence_threshold = 0.12;
  const auto rec = simulate(sc, fixtures::benchmark_gains(), TriggerParams::uniform({}), cfg);
  CHECK(rec.diverged);
  CHECK(rec.divergence_reason.find("exceeded") != std::string::npos);
  CHECK_THROWS_AS(run_trajectory(sc, fixtures::benchmark_gains(), TriggerParams::uniform({}), cfg),
                  DivergenceError);
}

TEST_CASE("auxiliary variable stays positive while the event condition is respected") {
  // Between events the gap obeys w^2 < alpha |z*|^2 + Xi / rho, so Xi' >= -(beta + gamma/rho) Xi.
  const ChannelParams p;
  const double h = 1e-4;
  WienerStream w(5, 0, 0);
  double xi = 1e-3;
  for (int k = 0; k < 100000; ++k) {
    const double zs = std::abs(wiener_increments(w, 1, 1.0)[0]);
    const double limit = p.alpha * zs + xi / p.rho;
    const double u01 = 0.5 + 0.5 * std::erf(wiener_increments(w, 1, 1.0)[0]);
    const double gap_sq = std::min(u01, 0.999) * limit;
    xi += h * xi_rate(p, xi, gap_sq, zs);
    CHECK(xi > 0.0);
  }
}

TEST_CASE("mode names") {
  CHECK(parse_control_mode("continuous") == ControlMode::Continuous);
  CHECK(to_string(ControlMode::Triggered) == "triggered");
  CHECK_THROWS_AS(parse_control_mode("nope"), ConfigError);
}

}  // TEST_SUITE

#include "etsim/sde_sim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "etsim/errors.hpp"
#include "etsim/observer_controller.hpp"

namespace etsim {

std::string_view to_string(ControlMode m) {
  return m == ControlMode::Continuous ? "continuous" : "triggered";
}

ControlMode parse_control_mode(std::string_view s) {
  if (s == "continuous") return ControlMode::Continuous;
  if (s == "triggered") return ControlMode::Triggered;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected continuous or triggered)");
}

std::size_t SimConfig::steps() const {
  return static_cast<std::size_t>(std::llround(horizon / step));
}

void SimConfig::validate(const Scenario& scenario) const {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("step must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be non-negative");
  if (horizon > 0.0 && step > horizon) throw ConfigError("step must not exceed the horizon");
  if (horizon / step > 1e12) throw ConfigError("horizon/step is too large for the grid");
  if (record_every == 0) throw ConfigError("record_every must be at least 1");
  if (!(divergence_threshold > 0.0)) throw ConfigError("divergence threshold must be positive");
  auto check = [&](const std::vector<std::vector<double>>& v, const char* what) {
    if (v.size() != scenario.size())
      throw ConfigError(std::string(what) + " must list every subsystem");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].size() != scenario.subsystems[i].order)
        throw ConfigError(std::string(what) + " for subsystem " + std::to_string(i + 1) +
                          " has the wrong dimension");
      for (double e : v[i])
        if (!std::isfinite(e)) throw ConfigError(std::string(what) + " is not finite");
    }
  };
  check(x0, "initial state");
  check(xhat0, "initial estimate");
}

WienerStream::WienerStream(std::uint64_t master, std::uint64_t replica, std::uint64_t subsystem) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32),
                    static_cast<std::uint32_t>(subsystem), static_cast<std::uint32_t>(subsystem >> 32)};
  rng_.seed(seq);
}

void WienerStream::draw(std::span<double> out, double h) {
  const double s = std::sqrt(h);
  for (double& v : out) v = s * normal_(rng_);
}

std::vector<double> wiener_increments(WienerStream& stream, std::size_t p, double h) {
  if (h < 0.0) throw InvalidInputError("step must be non-negative");
  std::vector<double> dw(p);
  stream.draw(dw, h);
  return dw;
}

std::vector<double> em_step(std::span<const double> x, std::span<const double> drift,
                            std::span<const double> diffusion_rows, double h,
                            std::span<const double> dw) {
  const std::size_t n = x.size(), p = dw.size();
  if (drift.size() != n || diffusion_rows.size() != n * p)
    throw InvalidInputError("em_step dimensions do not agree");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double noise = 0.0;
    for (std::size_t c = 0; c < p; ++c) noise += diffusion_rows[k * p + c] * dw[c];
    out[k] = x[k] + drift[k] * h + noise;
    if (!std::isfinite(out[k]))
      throw DivergenceError("non-finite state in component " + std::to_string(k + 1));
  }
  return out;
}

ClosedLoop::ClosedLoop(const Scenario& scenario, const GainSet& gains,
                       std::optional<TriggerParams> trigger, const SimConfig& config)
    : scenario_(scenario), gains_(gains), trigger_(std::move(trigger)), config_(config) {
  config_.validate(scenario_);
  const std::size_t N = scenario_.size();
  if (gains_.size() != N) throw ConfigError("gain set does not match the scenario");
  for (std::size_t i = 0; i < N; ++i)
    if (gains_[i].design.order() != scenario_.subsystems[i].order)
      throw ConfigError("gains for subsystem " + std::to_string(i + 1) + " have the wrong order");
  if (config_.mode == ControlMode::Triggered && !trigger_)
    throw ConfigError("triggered mode needs trigger parameters");

  x_ = config_.x0;
  xhat_ = config_.xhat0;
  y_.assign(N, 0.0);
  u_.assign(N, 0.0);
  gap_y_sq_.assign(N, 0.0);
  gap_u_sq_.assign(N, 0.0);
  z_star_sq_.assign(N, 0.0);
  trig_.assign(N, trigger_ ? TriggerState::initial(*trigger_) : TriggerState{});
  for (std::size_t i = 0; i < N; ++i) noise_.emplace_back(config_.seed, config_.replica, i);

  plant_.x = x_;
  drift_.resize(N);
  std::size_t max_n = 0, max_p = 0;
  for (std::size_t i = 0; i < N; ++i) {
    drift_[i].assign(scenario_.subsystems[i].order, 0.0);
    max_n = std::max(max_n, scenario_.subsystems[i].order);
    max_p = std::max(max_p, scenario_.subsystems[i].wiener_dim);
  }
  rows_.resize(max_n * max_p);
  scratch_.resize(max_p + 1);
  dw_.resize(max_p);
  obs_.resize(max_n);
}

void ClosedLoop::prepare() {
  if (prepared_) return;
  const double t = time();
  const bool triggered = config_.mode == ControlMode::Triggered;
  for (std::size_t i = 0; i < scenario_.size(); ++i) {
    const auto& spec = scenario_.subsystems[i];
    const auto& d = gains_[i].design;
    if (!sensitivity_in_band(spec, t)) ++sens_violations_;
    y_[i] = eval_output(spec, x_[i], t);
    if (!triggered) {
      u_[i] = control_continuous(d, y_[i], xhat_[i]);
      continue;
    }
    auto& ts = trig_[i];
    const double zs = z_star_norm_sq(d, xhat_[i]);
    z_star_sq_[i] = zs;

    auto& out = ts[Channel::Output];
    double gap = y_[i] - out.held;
    if (out.events.empty() ||
        check_trigger((*trigger_)[Channel::Output], out.xi, out.pi, gap * gap, zs)) {
      apply_event(ts, *trigger_, Channel::Output, t, y_[i]);
      gap = 0.0;
    }
    gap_y_sq_[i] = gap * gap;

    const double v = control_event(d, out.held, xhat_[i]);
    auto& in = ts[Channel::Input];
    gap = v - in.held;
    if (in.events.empty() ||
        check_trigger((*trigger_)[Channel::Input], in.xi, in.pi, gap * gap, zs)) {
      apply_event(ts, *trigger_, Channel::Input, t, v);
      gap = 0.0;
    }
    gap_u_sq_[i] = gap * gap;
    u_[i] = in.held;
  }
  prepared_ = true;
}

void ClosedLoop::integrate() {
  const double h = config_.step;
  const std::size_t N = scenario_.size();
  plant_.t = time();
  for (std::size_t i = 0; i < N; ++i) plant_.x[i] = x_[i];
  eval_drift_into(scenario_, plant_, u_, drift_);

  for (std::size_t i = 0; i < N; ++i) {
    const auto& spec = scenario_.subsystems[i];
    const std::size_t n = spec.order, p = spec.wiener_dim;
    std::span<double> rows(rows_.data(), n * p);
    std::span<double> dw(dw_.data(), p);
    eval_diffusion_into(spec, x_[i], rows, std::span<double>(scratch_.data(), p + 1));
    noise_[i].draw(dw, h);

    observer_drift_into(gains_[i].design, xhat_[i], u_[i], std::span<double>(obs_.data(), n));

    double norm_sq = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double noise = 0.0;
      for (std::size_t c = 0; c < p; ++c) noise += rows[k * p + c] * dw[c];
      x_[i][k] += drift_[i][k] * h + noise;
      xhat_[i][k] += obs_[k] * h;
      norm_sq += x_[i][k] * x_[i][k];
      if (!std::isfinite(x_[i][k]) || !std::isfinite(xhat_[i][k]))
        throw DivergenceError("non-finite state in subsystem " + std::to_string(i + 1) +
                              " at step " + std::to_string(k_ + 1));
    }
    if (std::sqrt(norm_sq) > config_.divergence_threshold)
      throw DivergenceError("||x_" + std::to_string(i + 1) + "|| exceeded " +
                            std::to_string(config_.divergence_threshold) + " at step " +
                            std::to_string(k_ + 1));

    if (config_.mode == ControlMode::Triggered) {
      for (Channel c : {Channel::Output, Channel::Input}) {
        auto& ch = trig_[i][c];
        const auto& cp = (*trigger_)[c];
        const double gap_sq = c == Channel::Output ? gap_y_sq_[i] : gap_u_sq_[i];
        const double dxi = xi_rate(cp, ch.xi, gap_sq, z_star_sq_[i]);
        const double dpi = pi_rate(cp, ch.pi, gap_sq, config_.clock);
        ch.xi += dxi * h;
        ch.pi += dpi * h;
      }
    }
  }
}

void ClosedLoop::step() {
  prepare();
  integrate();
  ++k_;
  prepared_ = false;
}

Snapshot ClosedLoop::snapshot() const {
  Snapshot s;
  s.t = time();
  for (std::size_t i = 0; i < scenario_.size(); ++i) {
    s.x.insert(s.x.end(), x_[i].begin(), x_[i].end());
    s.xhat.insert(s.xhat.end(), xhat_[i].begin(), xhat_[i].end());
    s.y.push_back(y_[i]);
    s.u.push_back(u_[i]);
    const auto& ts = trig_[i];
    const bool trig = config_.mode == ControlMode::Triggered;
    s.y_held.push_back(trig ? ts[Channel::Output].held : y_[i]);
    s.xi_y.push_back(ts[Channel::Output].xi);
    s.xi_u.push_back(ts[Channel::Input].xi);
    s.pi_y.push_back(ts[Channel::Output].pi);
    s.pi_u.push_back(ts[Channel::Input].pi);
  }
  return s;
}

RunRecord simulate(const Scenario& scenario, const GainSet& gains,
                   const std::optional<TriggerParams>& trigger, const SimConfig& config) {
  ClosedLoop loop(scenario, gains, trigger, config);
  RunRecord rec;
  rec.seed = config.seed;
  rec.replica = config.replica;
  rec.mode = config.mode;
  rec.clock = config.clock;
  rec.step = config.step;
  rec.horizon = config.horizon;
  for (const auto& s : scenario.subsystems) rec.orders.push_back(s.order);

  const std::size_t steps = config.steps();
  try {
    for (std::size_t k = 0; k <= steps; ++k) {
      loop.prepare();
      if (k % config.record_every == 0 || k == steps) rec.snapshots.push_back(loop.snapshot());
      if (k == steps) break;
      loop.step();
    }
  } catch (const DivergenceError& e) {
    rec.diverged = true;
    rec.divergence_time = loop.time();
    rec.divergence_reason = e.what();
  }

  rec.events.resize(scenario.size());
  for (std::size_t i = 0; i < scenario.size(); ++i)
    for (Channel c : {Channel::Output, Channel::Input})
      rec.events[i][static_cast<int>(c)] = loop.trigger_state(i)[c].events;
  rec.sensitivity_violations = loop.sensitivity_violations();
  return rec;
}

RunRecord run_trajectory(const Scenario& scenario, const GainSet& gains,
                         const std::optional<TriggerParams>& trigger, const SimConfig& config) {
  RunRecord rec = simulate(scenario, gains, trigger, config);
  if (rec.diverged)
    throw DivergenceError("replica " + std::to_string(rec.replica) + " diverged at t=" +
                          std::to_string(rec.divergence_time) + ": " + rec.divergence_reason);
  return rec;
}

std::vector<double> inter_event_times(const std::vector<double>& events) {
  std::vector<double> out;
  for (std::size_t k = 1; k < events.size(); ++k) out.push_back(events[k] - events[k - 1]);
  return out;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const RunRecord& record) {
  out << "t";
  for (std::size_t i = 0; i < record.orders.size(); ++i) {
    const auto tag = std::to_string(i + 1);
    for (std::size_t k = 0; k < record.orders[i]; ++k) out << ",x" << tag << "_" << k + 1;
    for (std::size_t k = 0; k < record.orders[i]; ++k) out << ",xhat" << tag << "_" << k + 1;
    out << ",y" << tag << ",y_held" << tag << ",u" << tag << ",xi_y" << tag << ",xi_u" << tag
        << ",pi_y" << tag << ",pi_u" << tag;
  }
  out << "\n";
  for (const auto& s : record.snapshots) {
    put(out, s.t);
    std::size_t off = 0;
    for (std::size_t i = 0; i < record.orders.size(); ++i) {
      for (std::size_t k = 0; k < record.orders[i]; ++k) out << ',', put(out, s.x[off + k]);
      for (std::size_t k = 0; k < record.orders[i]; ++k) out << ',', put(out, s.xhat[off + k]);
      off += record.orders[i];
      for (double v : {s.y[i], s.y_held[i], s.u[i], s.xi_y[i], s.xi_u[i], s.pi_y[i], s.pi_u[i]})
        out << ',', put(out, v);
    }
    out << "\n";
  }
}

void write_events_csv(std::ostream& out, const RunRecord& record, bool header) {
  if (header) out << "replica,subsystem,channel,event_index,time\n";
  for (std::size_t i = 0; i < record.events.size(); ++i)
    for (Channel c : {Channel::Output, Channel::Input}) {
      const auto& ev = record.event_times(i, c);
      for (std::size_t k = 0; k < ev.size(); ++k) {
        out << record.replica << ',' << i + 1 << ',' << to_string(c) << ',' << k << ',';
        put(out, ev[k]);
        out << "\n";
      }
    }
}

}  // namespace etsim

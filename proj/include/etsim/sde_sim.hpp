#pragma once

// Closed-loop Euler-Maruyama simulation on a uniform grid.
//
// Per grid point t_k, for every subsystem:
//   1. sensor output y = theta(t_k) x_1
//   2. output trigger (triggered mode)
//   3. control law from y (continuous) or the held output (triggered)
//   4. input trigger (triggered mode)
// then, with all inputs fixed,
//   5. plant EM step   6. observer Euler step   7. Xi / Pi Euler steps.

#include <cstddef>
#include <cstdint>
#include <array>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "etsim/gain_design.hpp"
#include "etsim/plant.hpp"
#include "etsim/triggering.hpp"

namespace etsim {

enum class ControlMode { Continuous, Triggered };
std::string_view to_string(ControlMode m);
ControlMode parse_control_mode(std::string_view s);

struct SimConfig {
  double step = 1e-4;
  double horizon = 10.0;
  ControlMode mode = ControlMode::Triggered;
  ClockMode clock = ClockMode::Proposed;
  std::uint64_t seed = 1;
  std::uint64_t replica = 0;
  std::vector<std::vector<double>> x0;     // per subsystem
  std::vector<std::vector<double>> xhat0;  // per subsystem
  std::size_t record_every = 100;          // snapshot decimation, in steps
  double divergence_threshold = 1e8;

  std::size_t steps() const;
  // Throws ConfigError on a bad step/horizon or initial-state dimensions.
  void validate(const Scenario& scenario) const;
};

// Independent N(0, h I_p) increments for one subsystem of one replica. The
// generator is seeded from (master seed, replica, subsystem).
class WienerStream {
 public:
  WienerStream(std::uint64_t master, std::uint64_t replica, std::uint64_t subsystem);
  void draw(std::span<double> out, double h);

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::vector<double> wiener_increments(WienerStream& stream, std::size_t p, double h);

// x' = x + drift h + G dw with G given row-major (n x p). Throws
// DivergenceError when the result is not finite.
std::vector<double> em_step(std::span<const double> x, std::span<const double> drift,
                            std::span<const double> diffusion_rows, double h,
                            std::span<const double> dw);

struct Snapshot {
  double t = 0.0;
  // Flattened per-subsystem blocks, subsystem-major.
  std::vector<double> x;
  std::vector<double> xhat;
  // One entry per subsystem.
  std::vector<double> y;
  std::vector<double> y_held;
  std::vector<double> u;  // input applied over [t, t+h)
  std::vector<double> xi_y, xi_u, pi_y, pi_u;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  ControlMode mode = ControlMode::Triggered;
  ClockMode clock = ClockMode::Proposed;
  double step = 0.0;
  double horizon = 0.0;
  std::vector<std::size_t> orders;
  std::vector<Snapshot> snapshots;
  // events[i][channel] holds strictly increasing event instants; the first
  // entry is the initial transmission at t = 0.
  std::vector<std::array<std::vector<double>, 2>> events;
  bool diverged = false;
  double divergence_time = 0.0;
  std::string divergence_reason;
  std::size_t sensitivity_violations = 0;

  const std::vector<double>& event_times(std::size_t i, Channel c) const {
    return events[i][static_cast<int>(c)];
  }
};

class ClosedLoop {
 public:
  // `trigger` is required in triggered mode and ignored otherwise.
  ClosedLoop(const Scenario& scenario, const GainSet& gains, std::optional<TriggerParams> trigger,
             const SimConfig& config);

  // Advances one grid step. Throws DivergenceError on a non-finite state or a
  // state norm above the configured threshold.
  void step();

  std::size_t step_index() const { return k_; }
  double time() const { return static_cast<double>(k_) * config_.step; }
  const std::vector<std::vector<double>>& x() const { return x_; }
  const std::vector<std::vector<double>>& xhat() const { return xhat_; }
  const std::vector<double>& applied_inputs() const { return u_; }
  const TriggerState& trigger_state(std::size_t i) const { return trig_[i]; }
  std::size_t sensitivity_violations() const { return sens_violations_; }

  // State at the current grid point after the trigger/control phase; the
  // integration phase has not run yet.
  Snapshot snapshot() const;

  // Runs phases 1-4 for the current grid point (idempotent per point).
  void prepare();

 private:
  void integrate();

  const Scenario& scenario_;
  const GainSet& gains_;
  std::optional<TriggerParams> trigger_;
  SimConfig config_;
  std::size_t k_ = 0;
  bool prepared_ = false;

  std::vector<std::vector<double>> x_, xhat_;
  std::vector<double> y_, u_, gap_y_sq_, gap_u_sq_, z_star_sq_;
  std::vector<TriggerState> trig_;
  std::vector<WienerStream> noise_;
  std::size_t sens_violations_ = 0;

  PlantState plant_;
  std::vector<std::vector<double>> drift_;
  std::vector<double> rows_, scratch_, dw_, obs_;
};

// Integrates to the horizon. Divergence is captured in the record (with the
// events seen so far) rather than thrown.
RunRecord simulate(const Scenario& scenario, const GainSet& gains,
                   const std::optional<TriggerParams>& trigger, const SimConfig& config);

// Same, but throws DivergenceError if the run diverged.
RunRecord run_trajectory(const Scenario& scenario, const GainSet& gains,
                         const std::optional<TriggerParams>& trigger, const SimConfig& config);

// Inter-event times per channel, excluding the initial transmission.
std::vector<double> inter_event_times(const std::vector<double>& events);

void write_trajectory_csv(std::ostream& out, const RunRecord& record);
// Columns: replica, subsystem, channel, event_index, time.
void write_events_csv(std::ostream& out, const RunRecord& record, bool header = true);

}  // namespace etsim

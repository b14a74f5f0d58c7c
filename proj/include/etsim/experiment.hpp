#pragma once

// Replica ensembles, event statistics and the empirical checks built on them.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etsim/gain_design.hpp"
#include "etsim/plant.hpp"
#include "etsim/sde_sim.hpp"
#include "etsim/triggering.hpp"

namespace etsim {

struct ExperimentSetup {
  Scenario scenario;
  GainSet gains;
  std::optional<TriggerParams> trigger;
  SimConfig sim;
};

// Runs replicas 0..count-1 on `workers` threads (0 = hardware concurrency).
// Results are ordered by replica index whatever the completion order.
std::vector<RunRecord> run_replicas(const ExperimentSetup& setup, std::size_t count,
                                    std::size_t workers = 0);

struct ChannelStats {
  std::size_t subsystem = 0;
  Channel channel = Channel::Output;
  std::size_t events = 0;        // excluding the initial transmissions
  std::size_t intervals = 0;
  double min_dwell = 0.0;        // over every replica; NaN without intervals
  double mean_dwell = 0.0;
  std::size_t early_count = 0;   // events in (0, 1]
  std::size_t late_count = 0;    // events in [T-1, T]
  std::vector<double> rate_per_second;  // mean events per replica in each 1 s bin
};

struct EnsembleResult {
  std::size_t replicas = 0;
  std::size_t diverged = 0;
  std::vector<std::size_t> diverged_replicas;
  double step = 0.0;
  double horizon = 0.0;
  ControlMode mode = ControlMode::Triggered;
  ClockMode clock = ClockMode::Proposed;

  // Time series over non-diverged replicas; [time][subsystem].
  std::vector<double> times;
  std::vector<std::vector<double>> mean_x_sq, mean_e_sq, mean_z_sq;
  std::vector<double> mean_v;           // V_e + V_z + V_Xi
  std::vector<double> mean_v_quadratic;  // V_e + V_z only
  std::vector<double> var_x_sq;          // across replicas, summed over subsystems
  std::size_t flagged_samples = 0;       // samples with Pi_y + Pi_u <= 0

  // max_i ||x_i(T)|| for every non-diverged replica, in replica order.
  std::vector<double> terminal_max_norm;
  std::vector<ChannelStats> channels;  // subsystem-major, output before input
  std::size_t sensitivity_violations = 0;
};

// Deterministic reduce of replica records (fixed order). State statistics
// use the surviving replicas only; event statistics use every replica up to
// its divergence. Throws ExperimentFailure when every replica diverged,
// unless `require_survivor` is false (the time series are then empty).
EnsembleResult aggregate(const ExperimentSetup& setup, const std::vector<RunRecord>& records,
                         bool require_survivor = true);

EnsembleResult run_ensemble(const ExperimentSetup& setup, std::size_t replicas,
                            std::size_t workers = 0);

struct DwellMetrics {
  struct Entry {
    std::size_t subsystem = 0;
    Channel channel = Channel::Output;
    bool has_events = false;
    double min_dwell = 0.0;
    double mean_dwell = 0.0;
    std::size_t early_count = 0;
    std::size_t late_count = 0;
  };
  std::vector<Entry> entries;
  double min_dwell = 0.0;  // over all channels; NaN when no channel has intervals
};
DwellMetrics dwell_metrics(const EnsembleResult& result);

struct DecayFit {
  double rate = 0.0;          // fitted c in V ~ V0 exp(-c t); NaN without fit points
  double monotonicity = 0.0;  // fraction of non-increasing moving-average steps
  std::size_t fit_points = 0;
};
// Least-squares fit of log V over [fit_start, T] restricted to the prefix
// where V > 1e-14; monotonicity over a centred moving average of
// `window` samples (ties count one half).
DecayFit decay_check(std::span<const double> times, std::span<const double> v,
                     double fit_start = 0.5, std::size_t window = 11);
DecayFit decay_check(const EnsembleResult& result, double fit_start = 0.5, std::size_t window = 11);

struct ConvergenceCheck {
  double eta = 0.05;
  double q = 0.1;
  std::size_t converged = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  bool pass = false;
};
// Fraction of all replicas (diverged ones count as failures) ending with
// max_i ||x_i(T)|| <= eta; passes when it is at least 1 - q.
ConvergenceCheck convergence_check(const EnsembleResult& result, double eta = 0.05, double q = 0.1);

struct ModeComparison {
  EnsembleResult a;
  EnsembleResult b;
};
// Both setups must match in everything except the clock mode. A mode whose
// replicas all diverge is reported, not thrown.
ModeComparison compare_modes(const ExperimentSetup& a, const ExperimentSetup& b,
                             std::size_t replicas, std::size_t workers = 0);

// Thresholds and smoothing used when a result is summarised.
struct AnalysisOptions {
  double eta = 0.05;
  double q = 0.1;
  double fit_start = 0.5;
  std::size_t window = 11;
};

void write_ensemble_csv(std::ostream& out, const EnsembleResult& result);
void write_channel_csv(std::ostream& out, const EnsembleResult& result, const std::string& label,
                       bool header = true);
std::string summary_json(const EnsembleResult& result, const AnalysisOptions& options = {},
                         int indent = 2);
std::string comparison_json(const ModeComparison& cmp, const AnalysisOptions& options = {},
                            int indent = 2);

}  // namespace etsim

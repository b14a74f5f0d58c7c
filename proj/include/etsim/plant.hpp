#pragma once

// Stochastic interconnected plant
//
//   dx_{i,k} = (x_{i,k+1} + sum_j f_{ij,k}(x, u, t)) dt + phi_{i,k}(x_{i,1..k})^T dw_i
//   dx_{i,n} = (u_i      + sum_j f_{ij,n}(x, u, t)) dt + phi_{i,n}(x_i)^T dw_i
//   y_i      = theta_i(t) x_{i,1}
//
// Coupling, diffusion and sensitivity functions are plain callables so a
// scenario can be assembled in code; built-in scenarios are looked up by name.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "etsim/matrix.hpp"

namespace etsim {

struct PlantState {
  std::vector<std::vector<double>> x;  // x[i] has n_i entries
  double t = 0.0;
};

// Coupling functions see the whole plant state and every input; the bound
// f_{ij,k} <= hbar * ||x_j|| only refers to the source subsystem j.
using CouplingFn =
    std::function<double(const PlantState& state, std::span<const double> inputs)>;

// phi_{i,k}: receives x_{i,1..k} and writes a p-vector.
using DiffusionFn = std::function<void(std::span<const double> prefix, std::span<double> out)>;

using SensitivityFn = std::function<double(double t)>;

struct CouplingTerm {
  std::size_t source = 0;  // j
  std::size_t row = 0;     // k, 0-based
  CouplingFn fn;
  double declared_bound = 0.0;  // hbar_{ij,k}
};

struct DiffusionTerm {
  DiffusionFn fn;
  double declared_bound = 0.0;  // ell_{i,k}
  // The declared bound only holds on a bounded box (e.g. polynomial growth).
  bool local_only = false;
};

struct SubsystemSpec {
  std::size_t order = 1;
  std::size_t wiener_dim = 1;
  std::vector<CouplingTerm> couplings;   // absent (j,k) pairs are identically zero
  std::vector<DiffusionTerm> diffusion;  // one per row k
  SensitivityFn sensitivity;
  double sensitivity_bound = 0.0;        // theta_bar in (0, 1)
};

struct Scenario {
  std::string name;
  std::vector<SubsystemSpec> subsystems;

  std::size_t size() const { return subsystems.size(); }
  std::size_t total_order() const;
  // Declared hbar_{ij,k}; zero for absent terms.
  double coupling_bound(std::size_t i, std::size_t j, std::size_t k) const;
  // Throws ConfigError for inconsistent orders, sources or diffusion lists.
  void validate() const;
};

// Knobs shared by the built-in scenarios; the defaults reproduce the
// published example.
struct ScenarioOptions {
  double noise_scale = 1.0;
  double coupling_scale = 1.0;
  double sensitivity_amplitude = 0.25;
};

// Two second-order subsystems with scalar noise, |sin(10t)| sensor
// sensitivity and the non-triangular couplings of the benchmark.
Scenario section6_scenario(const ScenarioOptions& options = {});

using ScenarioFactory = std::function<Scenario(const ScenarioOptions&)>;

// Registration point for custom scenarios; "section6" is pre-registered.
void register_scenario(const std::string& name, ScenarioFactory factory);
Scenario make_scenario(const std::string& name, const ScenarioOptions& options = {});
std::vector<std::string> scenario_names();

// Drift for every subsystem. Throws EvaluationError naming (i, j, k) when a
// coupling term is not finite.
std::vector<std::vector<double>> eval_drift(const Scenario& scenario, const PlantState& state,
                                            std::span<const double> inputs);
// Allocation-free variant for the integrator; `out` must already be sized.
void eval_drift_into(const Scenario& scenario, const PlantState& state,
                     std::span<const double> inputs, std::vector<std::vector<double>>& out);

// Row k is phi_{i,k}(x_{i,1..k})^T; result is n_i x p.
Matrix eval_diffusion(const SubsystemSpec& spec, std::span<const double> x_i);
void eval_diffusion_into(const SubsystemSpec& spec, std::span<const double> x_i,
                         std::span<double> rows, std::span<double> scratch);

double eval_output(const SubsystemSpec& spec, std::span<const double> x_i, double t);
bool sensitivity_in_band(const SubsystemSpec& spec, double t);

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
};

struct BoundCheckOptions {
  std::vector<Interval> state_box;  // one per plant state, in subsystem order
  Interval input_box{-10.0, 10.0};
  Interval time_box{0.0, 10.0};
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

struct CouplingBoundEntry {
  std::size_t i = 0, j = 0, k = 0;
  double empirical_sup = 0.0;  // sup |f| / ||x_j||
  double declared = 0.0;
  std::size_t used_samples = 0;
  bool pass = false;
};

struct DiffusionBoundEntry {
  std::size_t i = 0, k = 0;
  double empirical_sup = 0.0;  // sup ||phi|| / (|x_1| + ... + |x_k|)
  double declared = 0.0;
  std::size_t used_samples = 0;
  bool pass = false;
  bool local_only = false;
};

struct BoundReport {
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<Interval> state_box;
  std::vector<CouplingBoundEntry> couplings;
  std::vector<DiffusionBoundEntry> diffusion;
  bool all_pass() const;
};

// Monte Carlo sup-ratio estimates over the box. Points whose denominator is
// below 1e-12 are skipped. Deterministic in the seed.
BoundReport validate_bounds(const Scenario& scenario, const BoundCheckOptions& options);

}  // namespace etsim

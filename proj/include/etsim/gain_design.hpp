#pragma once

// Gain bookkeeping and feasibility checks.
//
// Two independent paths:
//   * margins_*  evaluate the stability margins xi, varsigma for a given set of
//     gains (the authoritative check),
//   * recipe_gains  tries to construct L1, L2 from the closed-form recipes and
//     reports what blocks it when it cannot.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "etsim/design.hpp"
#include "etsim/matrix.hpp"
#include "etsim/plant.hpp"
#include "etsim/triggering.hpp"

namespace etsim {

// ||x||^2 <= eps_x ||z||^2 + sigma_x ||e||^2
struct StateBoundConstants {
  double eps_x = 1.0;
  double sigma_x = 0.0;
};
StateBoundConstants state_bound_constants(std::size_t n, double l1, double l2);

struct StructuralNorms {
  double r_e = 0.0;      // ||(a_1..a_n)||
  double r_z = 0.0;      // ||G_z|| at the given L2
  double r_z_bar = 0.0;  // L2-free upper bound of r_z
};
StructuralNorms structural_norms(const HurwitzCoeffs& a, double l2);

struct SensitivityMargin {
  double theta_star = 0.0;  // 1 / (2 b_n ||Q||)
  double lambda = 0.0;      // 1 - 2 b_n theta_bar ||Q||
  bool ok = false;          // theta_bar < theta_star
};
SensitivityMargin sensitivity_margin(const HurwitzCoeffs& b, double q_norm, double theta_bar);
SensitivityMargin sensitivity_margin(const HurwitzCoeffs& b, const Matrix& q, double theta_bar);

enum class GainProvenance { Manual, Recipe };
std::string_view to_string(GainProvenance p);

struct SubsystemGains {
  SubsystemDesign design;
  Matrix p;  // observer-error Lyapunov matrix
  Matrix q;  // controller Lyapunov matrix
  double p_norm = 0.0;
  double q_norm = 0.0;
  StateBoundConstants bounds;
  StructuralNorms norms;
  GainProvenance provenance = GainProvenance::Manual;
};

// Solves both Lyapunov equations and fills in the derived constants. Throws
// InvalidInputError for L1 or L2 below 1 or mismatched polynomial orders.
SubsystemGains make_gains(const SubsystemDesign& design,
                          GainProvenance provenance = GainProvenance::Manual);

struct GainSet {
  std::vector<SubsystemGains> subsystems;
  std::size_t size() const { return subsystems.size(); }
  const SubsystemGains& operator[](std::size_t i) const { return subsystems[i]; }
  std::vector<SubsystemDesign> designs() const;
};

GainSet make_gain_set(const std::vector<SubsystemDesign>& designs,
                      GainProvenance provenance = GainProvenance::Manual);

// Declared growth constants of a scenario: coupling[i][j][k], diffusion[i][k],
// sensitivity[i].
struct DeclaredBounds {
  std::vector<std::vector<std::vector<double>>> coupling;
  std::vector<std::vector<double>> diffusion;
  std::vector<double> sensitivity;

  static DeclaredBounds from_scenario(const Scenario& scenario);
  // Throws ConfigError when a constant is missing for the given orders.
  void check(const std::vector<std::size_t>& orders) const;
};

// The parts of the trigger configuration that enter the margins. delta and
// pi_bar are the per-subsystem aggregates max(delta_y, delta_u) and
// pi_bar_y + pi_bar_u.
struct TriggerBudget {
  double alpha_y = 0.0;
  double alpha_u = 0.0;
  double delta = 0.0;
  double pi_bar = 0.0;
  static TriggerBudget from(const TriggerParams& params);
};

enum class DesignMode { Continuous, Triggered };
std::string_view to_string(DesignMode m);

struct SubsystemReport {
  std::size_t index = 0;
  std::vector<std::pair<std::string, double>> constants;  // in evaluation order
  std::vector<std::string> blockers;
  bool feasible = false;

  // Throws InvalidInputError for an unknown name.
  double get(std::string_view name) const;
  bool has(std::string_view name) const;
};

struct FeasibilityReport {
  DesignMode mode = DesignMode::Continuous;
  std::string source;  // "margins" or "recipe"
  std::vector<SubsystemReport> subsystems;
  bool feasible() const;
};

std::string to_json(const FeasibilityReport& report, int indent = 2);

struct MarginTerms {
  double sigma_e = 0.0;
  double rho_e = 0.0;
  double rho_z = 0.0;
  double sigma_z = 0.0;
};

// xi = sigma_e - rho_e, varsigma = rho_z - sigma_z - extra.
SubsystemReport combine_margins(std::size_t index, const MarginTerms& terms, double extra = 0.0);

FeasibilityReport margins_continuous(const GainSet& gains, const DeclaredBounds& bounds);
FeasibilityReport margins_triggered(const GainSet& gains, const DeclaredBounds& bounds,
                                    const TriggerBudget& budget);

// L1 = max{1, 2 c1 / (1 - ||Q||^2)}; nullopt when ||Q||^2 >= 1.
std::optional<double> recipe_l1(double c1, double q_norm);
// L2 = max{1, c2 / (Lambda L1) + a1 L1 + a2 + a3}.
double recipe_l2_continuous(double c2, double lambda, double l1, double a1, double a2, double a3);

struct GainInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = true;
};
// Admissible L2 for the triggered design: the open interval between the roots
// of L2^2 - k1 L2 + k1 k2, intersected with (1, inf).
GainInterval recipe_l2_interval(double k1, double k2);

struct RecipeOptions {
  double l1_cap = 1e6;
  double l2_cap = 1e6;
  int max_iterations = 100;
  double tolerance = 1e-9;
};

struct RecipeResult {
  std::optional<GainSet> gains;
  FeasibilityReport report;
};

// Only the polynomials of `designs` are used; L1, L2 are recomputed.
RecipeResult recipe_gains(DesignMode mode, const std::vector<SubsystemDesign>& designs,
                          const DeclaredBounds& bounds, const TriggerBudget& budget = {},
                          const RecipeOptions& options = {});

// Monte Carlo check of the coupling and diffusion growth bounds in the scaled
// error coordinates (F_e, K_e) against the constants above.
struct ScaledBoundOptions {
  Interval state_box{-1.0, 1.0};
  Interval estimate_box{-1.0, 1.0};
  Interval input_box{-300.0, 300.0};
  Interval time_box{0.0, 10.0};
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
};

struct ScaledBoundReport {
  std::size_t samples = 0;
  std::size_t coupling_violations = 0;
  std::size_t diffusion_violations = 0;
  double worst_coupling_ratio = 0.0;   // max ||F_e||^2 / bound
  double worst_diffusion_ratio = 0.0;  // max ||K_e||^2 / bound
  bool pass() const { return coupling_violations == 0 && diffusion_violations == 0; }
};

ScaledBoundReport check_scaled_bounds(const Scenario& scenario, const GainSet& gains,
                                      const DeclaredBounds& bounds,
                                      const ScaledBoundOptions& options = {});

}  // namespace etsim

#pragma once

// Run manifests: a flat key = value text format.
//
//   # comment
//   scenario = section6
//   x0 = 0.1, 0.1; 0.1, 0.1        (';' separates subsystems)
//   observer_coeffs = 8, 1         (one block is applied to every subsystem)
//
// Unknown or repeated keys are errors. render_manifest writes every key,
// defaults included, so a rendered manifest reproduces the run on its own.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "etsim/experiment.hpp"
#include "etsim/gain_design.hpp"
#include "etsim/plant.hpp"
#include "etsim/sde_sim.hpp"
#include "etsim/triggering.hpp"

namespace etsim {

enum class GainSource { Manual, Recipe };

struct RunManifest {
  std::string scenario;
  ScenarioOptions scenario_options;
  ControlMode mode = ControlMode::Triggered;
  ClockMode clock = ClockMode::Proposed;
  double step = 1e-4;
  double horizon = 10.0;
  std::uint64_t seed = 1;
  std::size_t replicas = 20;
  std::size_t workers = 0;
  std::size_t record_every = 100;
  double divergence_threshold = 1e8;

  std::vector<std::vector<double>> x0;
  std::vector<std::vector<double>> xhat0;

  std::vector<std::vector<double>> observer_coeffs;
  std::vector<std::vector<double>> controller_coeffs;
  GainSource gains = GainSource::Manual;
  std::vector<double> l1;
  std::vector<double> l2;
  double l1_cap = 1e6;

  ChannelParams output;
  ChannelParams input;

  std::string output_dir = "out";
  bool emit_trajectories = true;
  bool emit_events = true;
  bool emit_summary = true;
  bool emit_feasibility = true;

  double eta = 0.05;
  double q = 0.1;
  std::size_t monotonicity_window = 11;
  double fit_start = 0.5;

  std::size_t bound_samples = 100000;
  std::uint64_t bound_seed = 0;
  double bound_box = 1.0;

  // "key=value" strings applied on top of the file, in order.
  std::vector<std::string> overrides;
};

std::vector<std::string> required_keys();

// Throws ConfigError naming the key and the violated constraint.
RunManifest parse_manifest(std::string_view text, const std::vector<std::string>& overrides = {});
RunManifest parse_config(const std::string& path, const std::vector<std::string>& overrides = {});

std::string render_manifest(const RunManifest& manifest);

// <scenario>_<mode>_<seed>, mode being continuous, proposed or
// time-regulation.
std::string output_stem(const RunManifest& manifest);

// Per-subsystem designs with the manifest's gains (the recipe is not run).
std::vector<SubsystemDesign> manifest_designs(const RunManifest& manifest, std::size_t subsystems);

// Scenario, gains, trigger parameters and simulation settings. With
// gains = recipe this runs recipe_gains and throws NoSolutionError carrying
// the blockers when it is infeasible.
ExperimentSetup build_setup(const RunManifest& manifest);

}  // namespace etsim

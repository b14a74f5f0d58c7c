#pragma once

#include <optional>
#include <vector>

#include "etsim/experiment.hpp"
#include "etsim/gain_design.hpp"
#include "etsim/plant.hpp"
#include "etsim/sde_sim.hpp"
#include "etsim/triggering.hpp"

namespace fixtures {

inline etsim::SubsystemDesign benchmark_design(double l1 = 4.0, double l2 = 3.0) {
  return {etsim::HurwitzCoeffs({8.0, 1.0}), etsim::HurwitzCoeffs({20.0, 2.0}), l1, l2};
}

inline etsim::GainSet benchmark_gains() {
  return etsim::make_gain_set({benchmark_design(), benchmark_design()});
}

inline etsim::SimConfig benchmark_sim(etsim::ControlMode mode = etsim::ControlMode::Triggered,
                                      etsim::ClockMode clock = etsim::ClockMode::Proposed,
                                      double horizon = 10.0) {
  etsim::SimConfig c;
  c.mode = mode;
  c.clock = clock;
  c.horizon = horizon;
  c.x0 = {{0.1, 0.1}, {0.1, 0.1}};
  c.xhat0 = {{0.2, 0.2}, {0.2, 0.2}};
  return c;
}

inline etsim::ExperimentSetup benchmark_setup(etsim::ControlMode mode = etsim::ControlMode::Triggered,
                                              etsim::ClockMode clock = etsim::ClockMode::Proposed,
                                              double horizon = 10.0,
                                              const etsim::ScenarioOptions& opts = {}) {
  etsim::ExperimentSetup s{etsim::section6_scenario(opts), benchmark_gains(), std::nullopt,
                           benchmark_sim(mode, clock, horizon)};
  if (mode == etsim::ControlMode::Triggered) s.trigger = etsim::TriggerParams::uniform({});
  return s;
}

}  // namespace fixtures

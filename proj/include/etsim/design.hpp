#pragma once

#include <cmath>
#include <cstddef>

#include "etsim/matrix.hpp"

namespace etsim {

// Per-subsystem tuning: observer polynomial a, controller polynomial b and
// the two scaling gains.
struct SubsystemDesign {
  HurwitzCoeffs observer;
  HurwitzCoeffs controller;
  double l1 = 1.0;
  double l2 = 1.0;

  std::size_t order() const { return observer.size(); }
  double kappa() const { return std::pow(l1 * l2, static_cast<double>(order())); }
};

}  // namespace etsim

#pragma once

// High-gain observer driven only by the applied input, the scaled
// coordinates (z, e) and the two linear output-feedback laws.

#include <span>
#include <vector>

#include "etsim/design.hpp"

namespace etsim {

// k < n:  xhat_{k+1} - L1^k a_k xhat_1;   k = n:  u - L1^n a_n xhat_1
std::vector<double> observer_drift(const SubsystemDesign& d, std::span<const double> xhat, double u);
void observer_drift_into(const SubsystemDesign& d, std::span<const double> xhat, double u,
                         std::span<double> out);

struct TransformedState {
  std::vector<double> z;
  std::vector<double> e;
  std::vector<double> z_star;  // z with the first entry zeroed
};

TransformedState transform(const SubsystemDesign& d, std::span<const double> x,
                           std::span<const double> xhat);
std::vector<double> reconstruct_x(const SubsystemDesign& d, const TransformedState& t);

// ||z*||^2 computed straight from the estimate, without building z.
double z_star_norm_sq(const SubsystemDesign& d, std::span<const double> xhat);

// u = -kappa (b_n y + sum_{k>=2} b_{n+1-k} xhat_k / (L1 L2)^{k-1})
double control_continuous(const SubsystemDesign& d, double y, std::span<const double> xhat);
// Same law fed with the last transmitted output.
double control_event(const SubsystemDesign& d, double y_held, std::span<const double> xhat);

}  // namespace etsim

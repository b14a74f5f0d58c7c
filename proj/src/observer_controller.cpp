#include "etsim/observer_controller.hpp"

#include <cmath>

#include "etsim/errors.hpp"

namespace etsim {

namespace {

void check_size(const SubsystemDesign& d, std::span<const double> v, const char* what) {
  if (v.size() != d.order()) throw InvalidInputError(std::string(what) + " has the wrong dimension");
}

}  // namespace

void observer_drift_into(const SubsystemDesign& d, std::span<const double> xhat, double u,
                         std::span<double> out) {
  const std::size_t n = d.order();
  double l1_pow = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    l1_pow *= d.l1;
    const double next = k + 1 < n ? xhat[k + 1] : u;
    out[k] = next - l1_pow * d.observer[k] * xhat[0];
  }
}

std::vector<double> observer_drift(const SubsystemDesign& d, std::span<const double> xhat, double u) {
  check_size(d, xhat, "observer state");
  std::vector<double> out(d.order());
  observer_drift_into(d, xhat, u, out);
  return out;
}

TransformedState transform(const SubsystemDesign& d, std::span<const double> x,
                           std::span<const double> xhat) {
  check_size(d, x, "plant state");
  check_size(d, xhat, "observer state");
  const std::size_t n = d.order();
  TransformedState t;
  t.z.resize(n);
  t.e.resize(n);
  double zs = 1.0, es = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    t.z[k] = k == 0 ? x[0] : xhat[k] / zs;
    t.e[k] = (x[k] - xhat[k]) / es;
    zs *= d.l1 * d.l2;
    es *= d.l1;
  }
  t.z_star = t.z;
  t.z_star[0] = 0.0;
  return t;
}

std::vector<double> reconstruct_x(const SubsystemDesign& d, const TransformedState& t) {
  const std::size_t n = d.order();
  if (t.z.size() != n || t.e.size() != n)
    throw InvalidInputError("transformed state has the wrong dimension");
  std::vector<double> x(n);
  x[0] = t.z[0];
  double zs = d.l1 * d.l2, es = d.l1;
  for (std::size_t k = 1; k < n; ++k) {
    x[k] = es * t.e[k] + zs * t.z[k];
    zs *= d.l1 * d.l2;
    es *= d.l1;
  }
  return x;
}

double z_star_norm_sq(const SubsystemDesign& d, std::span<const double> xhat) {
  double s = 0.0, scale = 1.0;
  for (std::size_t k = 1; k < xhat.size(); ++k) {
    scale *= d.l1 * d.l2;
    const double zk = xhat[k] / scale;
    s += zk * zk;
  }
  return s;
}

double control_continuous(const SubsystemDesign& d, double y, std::span<const double> xhat) {
  check_size(d, xhat, "observer state");
  const std::size_t n = d.order();
  double acc = d.controller[n - 1] * y;
  double scale = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    scale *= d.l1 * d.l2;
    acc += d.controller[n - 1 - k] * xhat[k] / scale;
  }
  return -d.kappa() * acc;
}

double control_event(const SubsystemDesign& d, double y_held, std::span<const double> xhat) {
  return control_continuous(d, y_held, xhat);
}

}  // namespace etsim

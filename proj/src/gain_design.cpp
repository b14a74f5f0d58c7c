#include "etsim/gain_design.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <json.hpp>

#include "etsim/errors.hpp"
#include "etsim/observer_controller.hpp"

namespace etsim {

StateBoundConstants state_bound_constants(std::size_t n, double l1, double l2) {
  if (n == 0) throw InvalidInputError("order must be at least 1");
  if (l1 < 1.0 || l2 < 1.0) throw InvalidInputError("gains must be at least 1");
  StateBoundConstants c;
  const double zz = (l1 * l2) * (l1 * l2);
  const double ee = l1 * l1;
  double zp = 1.0, ep = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    zp *= zz;
    ep *= ee;
    c.eps_x += 2.0 * zp;
    c.sigma_x += 2.0 * ep;
  }
  return c;
}

StructuralNorms structural_norms(const HurwitzCoeffs& a, double l2) {
  if (l2 < 1.0) throw InvalidInputError("L2 must be at least 1");
  StructuralNorms s;
  double re = 0.0, rz = 0.0, rzb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) re += a[k] * a[k];
  for (std::size_t k = 1; k < a.size(); ++k) {
    const double scale = std::pow(l2, static_cast<double>(k - 1));
    rz += a[k] * a[k] / (scale * scale);
    rzb += a[k] * a[k];
  }
  s.r_e = std::sqrt(re);
  s.r_z = std::sqrt(rz);
  s.r_z_bar = std::sqrt(rzb);
  return s;
}

SensitivityMargin sensitivity_margin(const HurwitzCoeffs& b, double q_norm, double theta_bar) {
  if (!(q_norm > 0.0)) throw InvalidInputError("||Q|| must be positive");
  const double bn = b[b.size() - 1];
  SensitivityMargin m;
  m.theta_star = 1.0 / (2.0 * bn * q_norm);
  m.lambda = 1.0 - 2.0 * bn * theta_bar * q_norm;
  m.ok = theta_bar < m.theta_star;
  return m;
}

SensitivityMargin sensitivity_margin(const HurwitzCoeffs& b, const Matrix& q, double theta_bar) {
  return sensitivity_margin(b, spectral_norm(q), theta_bar);
}

std::string_view to_string(GainProvenance p) {
  return p == GainProvenance::Manual ? "manual" : "recipe";
}

std::string_view to_string(DesignMode m) {
  return m == DesignMode::Continuous ? "continuous" : "triggered";
}

SubsystemGains make_gains(const SubsystemDesign& design, GainProvenance provenance) {
  if (design.observer.size() != design.controller.size())
    throw InvalidInputError("observer and controller polynomials must have the same order");
  if (!(design.l1 >= 1.0) || !(design.l2 >= 1.0))
    throw InvalidInputError("L1 and L2 must be at least 1");
  SubsystemGains g{design, {}, {}, 0.0, 0.0, {}, {}, provenance};
  g.p = solve_lyapunov(build_observer_companion(design.observer).a_e);
  g.q = solve_lyapunov(build_controller_companion(design.controller).a_z);
  g.p_norm = spectral_norm(g.p);
  g.q_norm = spectral_norm(g.q);
  g.bounds = state_bound_constants(design.order(), design.l1, design.l2);
  g.norms = structural_norms(design.observer, design.l2);
  return g;
}

std::vector<SubsystemDesign> GainSet::designs() const {
  std::vector<SubsystemDesign> out;
  for (const auto& s : subsystems) out.push_back(s.design);
  return out;
}

GainSet make_gain_set(const std::vector<SubsystemDesign>& designs, GainProvenance provenance) {
  GainSet set;
  for (const auto& d : designs) set.subsystems.push_back(make_gains(d, provenance));
  return set;
}

DeclaredBounds DeclaredBounds::from_scenario(const Scenario& scenario) {
  const std::size_t N = scenario.size();
  DeclaredBounds b;
  b.coupling.resize(N);
  b.diffusion.resize(N);
  b.sensitivity.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto& s = scenario.subsystems[i];
    b.coupling[i].assign(N, std::vector<double>(s.order, 0.0));
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t k = 0; k < s.order; ++k) b.coupling[i][j][k] = scenario.coupling_bound(i, j, k);
    for (const auto& d : s.diffusion) b.diffusion[i].push_back(d.declared_bound);
    b.sensitivity[i] = s.sensitivity_bound;
  }
  return b;
}

void DeclaredBounds::check(const std::vector<std::size_t>& orders) const {
  const std::size_t N = orders.size();
  if (coupling.size() != N || diffusion.size() != N || sensitivity.size() != N)
    throw ConfigError("declared bounds do not cover every subsystem");
  for (std::size_t i = 0; i < N; ++i) {
    const std::string who = "subsystem " + std::to_string(i + 1);
    if (coupling[i].size() != N) throw ConfigError(who + ": missing coupling bounds");
    for (const auto& row : coupling[i])
      if (row.size() != orders[i]) throw ConfigError(who + ": missing coupling bound for some row");
    if (diffusion[i].size() != orders[i]) throw ConfigError(who + ": missing diffusion bound");
  }
}

TriggerBudget TriggerBudget::from(const TriggerParams& params) {
  return {params.output().alpha, params.input().alpha,
          std::max(params.output().delta, params.input().delta),
          params.output().pi_bar + params.input().pi_bar};
}

double SubsystemReport::get(std::string_view name) const {
  for (const auto& [k, v] : constants)
    if (k == name) return v;
  throw InvalidInputError("report has no constant '" + std::string(name) + "'");
}

bool SubsystemReport::has(std::string_view name) const {
  return std::any_of(constants.begin(), constants.end(),
                     [&](const auto& kv) { return kv.first == name; });
}

bool FeasibilityReport::feasible() const {
  return !subsystems.empty() &&
         std::all_of(subsystems.begin(), subsystems.end(), [](const auto& s) { return s.feasible; });
}

std::string to_json(const FeasibilityReport& report, int indent) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(report.mode));
  j["source"] = report.source;
  j["feasible"] = report.feasible();
  auto& subs = j["subsystems"] = nlohmann::ordered_json::array();
  for (const auto& s : report.subsystems) {
    nlohmann::ordered_json o;
    o["subsystem"] = s.index + 1;
    o["feasible"] = s.feasible;
    auto& c = o["constants"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s.constants) {
      if (std::isfinite(v))
        c[k] = v;
      else
        c[k] = v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    }
    o["blockers"] = s.blockers;
    subs.push_back(std::move(o));
  }
  return j.dump(indent);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

SubsystemReport combine_margins(std::size_t index, const MarginTerms& t, double extra) {
  SubsystemReport r;
  r.index = index;
  const double xi = t.sigma_e - t.rho_e;
  const double vs = t.rho_z - t.sigma_z - extra;
  r.constants = {{"sigma_e", t.sigma_e}, {"rho_e", t.rho_e}, {"rho_z", t.rho_z},
                 {"sigma_z", t.sigma_z}, {"xi", xi},         {"varsigma", vs}};
  if (!(xi > 0.0)) r.blockers.push_back("xi = " + fmt(xi) + " <= 0");
  if (!(vs > 0.0)) r.blockers.push_back("varsigma = " + fmt(vs) + " <= 0");
  r.feasible = r.blockers.empty();
  return r;
}

namespace {

std::vector<std::size_t> orders_of(const GainSet& gains) {
  std::vector<std::size_t> orders;
  for (const auto& g : gains.subsystems) orders.push_back(g.design.order());
  return orders;
}

// sum_i sum_k hbar_{ij,k}^2 / L1^{2(k-1)}, coupling out of subsystem j
double coupling_sum(const DeclaredBounds& b, std::size_t j, double l1) {
  double s = 0.0;
  for (const auto& recv : b.coupling) {
    double scale = 1.0;
    for (double h : recv[j]) {
      s += h * h / scale;
      scale *= l1 * l1;
    }
  }
  return s;
}

// sum_i hbar_{ij,1}^2
double coupling_first_row(const DeclaredBounds& b, std::size_t j) {
  double s = 0.0;
  for (const auto& recv : b.coupling) s += recv[j][0] * recv[j][0];
  return s;
}

// sum_k k^2 ell_{j,k}^2 / L1^{2(k-1)}
double diffusion_sum(const DeclaredBounds& b, std::size_t j, double l1) {
  double s = 0.0, scale = 1.0;
  for (std::size_t k = 0; k < b.diffusion[j].size(); ++k) {
    const double kk = static_cast<double>(k + 1);
    s += kk * kk * b.diffusion[j][k] * b.diffusion[j][k] / scale;
    scale *= l1 * l1;
  }
  return s;
}

struct Literal {
  MarginTerms terms;
  SensitivityMargin sens;
};

Literal continuous_terms(const SubsystemGains& g, const DeclaredBounds& b, std::size_t j) {
  const double l1 = g.design.l1, l2 = g.design.l2;
  const double P = g.p_norm, Q = g.q_norm;
  const double ex = g.bounds.eps_x, sx = g.bounds.sigma_x;
  const double re = g.norms.r_e, rz = g.norms.r_z;
  const double bn = g.design.controller[g.design.order() - 1];
  const double theta_bar = b.sensitivity[j];
  const double hs = coupling_sum(b, j, l1);
  const double h1 = coupling_first_row(b, j);
  const double ls = diffusion_sum(b, j, l1);
  const double l_first = b.diffusion[j][0];

  Literal out;
  out.sens = sensitivity_margin(g.design.controller, Q, theta_bar);
  auto& t = out.terms;
  t.sigma_e = 0.5 * l1 - 0.5 * P * P - 2.0 * hs * sx - ls * sx * P;
  t.sigma_z = 2.0 * l1 * re * re * P * P + 2.0 * hs * ex + ls * ex * P;
  t.rho_z = l1 * l2 - 2.0 * l1 * l1 * rz * rz / (l2 * l2) - 2.0 * l1 - l_first * l_first * Q -
            2.0 * Q * Q - 2.0 * (l1 / l2) * rz * Q - 0.5 * h1 * ex - 2.0 * l1 * l2 * bn * Q * theta_bar;
  t.rho_e = 0.5 * l1 * Q * Q + 0.5 * Q * Q + 0.5 * h1 * sx;
  return out;
}

void prepend_common(SubsystemReport& r, const SubsystemGains& g, const SensitivityMargin& sens) {
  std::vector<std::pair<std::string, double>> head = {
      {"L1", g.design.l1},       {"L2", g.design.l2},         {"norm_P", g.p_norm},
      {"norm_Q", g.q_norm},      {"eps_x", g.bounds.eps_x},   {"sigma_x", g.bounds.sigma_x},
      {"r_e", g.norms.r_e},      {"r_z", g.norms.r_z},        {"theta_star", sens.theta_star},
      {"Lambda", sens.lambda}};
  r.constants.insert(r.constants.begin(), head.begin(), head.end());
}

void sensitivity_blocker(SubsystemReport& r, const SensitivityMargin& sens, double theta_bar) {
  if (!sens.ok) {
    r.blockers.insert(r.blockers.begin(), "sensitivity margin violated: theta_bar = " + fmt(theta_bar) +
                                              " >= theta* = " + fmt(sens.theta_star));
    r.feasible = false;
  }
}

}  // namespace

FeasibilityReport margins_continuous(const GainSet& gains, const DeclaredBounds& bounds) {
  bounds.check(orders_of(gains));
  FeasibilityReport rep;
  rep.mode = DesignMode::Continuous;
  rep.source = "margins";
  for (std::size_t j = 0; j < gains.size(); ++j) {
    const auto lit = continuous_terms(gains[j], bounds, j);
    auto r = combine_margins(j, lit.terms);
    prepend_common(r, gains[j], lit.sens);
    sensitivity_blocker(r, lit.sens, bounds.sensitivity[j]);
    rep.subsystems.push_back(std::move(r));
  }
  return rep;
}

FeasibilityReport margins_triggered(const GainSet& gains, const DeclaredBounds& bounds,
                                    const TriggerBudget& budget) {
  bounds.check(orders_of(gains));
  FeasibilityReport rep;
  rep.mode = DesignMode::Triggered;
  rep.source = "margins";
  for (std::size_t j = 0; j < gains.size(); ++j) {
    const auto& g = gains[j];
    const auto lit = continuous_terms(g, bounds, j);
    const double l1 = g.design.l1, l2 = g.design.l2;
    const double P = g.p_norm, Q = g.q_norm;
    const double bn = g.design.controller[g.design.order() - 1];
    const double dp = budget.delta * budget.pi_bar;
    const double head = std::pow(l1 * l2, 2.0 * static_cast<double>(g.design.order() - 1));

    MarginTerms t = lit.terms;
    t.sigma_e -= dp * P;
    t.rho_z -= dp * Q + budget.pi_bar * Q * Q / head + budget.pi_bar * Q * Q * l1 * l1 * l2 * l2 * bn * bn;
    auto r = combine_margins(j, t, budget.alpha_y + budget.alpha_u);
    prepend_common(r, g, lit.sens);
    std::vector<std::pair<std::string, double>> tb = {{"alpha_y", budget.alpha_y},
                                                      {"alpha_u", budget.alpha_u},
                                                      {"delta", budget.delta},
                                                      {"pi_bar", budget.pi_bar}};
    r.constants.insert(r.constants.begin() + 10, tb.begin(), tb.end());
    sensitivity_blocker(r, lit.sens, bounds.sensitivity[j]);
    rep.subsystems.push_back(std::move(r));
  }
  return rep;
}

std::optional<double> recipe_l1(double c1, double q_norm) {
  const double denom = 1.0 - q_norm * q_norm;
  if (!(denom > 0.0)) return std::nullopt;
  return std::max(1.0, 2.0 * c1 / denom);
}

double recipe_l2_continuous(double c2, double lambda, double l1, double a1, double a2, double a3) {
  return std::max(1.0, c2 / (lambda * l1) + a1 * l1 + a2 + a3);
}

GainInterval recipe_l2_interval(double k1, double k2) {
  GainInterval iv;
  const double disc = k1 * k1 / 4.0 - k1 * k2;
  if (!(disc > 0.0)) return iv;
  const double h = std::sqrt(disc);
  iv.lo = std::max(1.0, k1 / 2.0 - h);
  iv.hi = k1 / 2.0 + h;
  iv.empty = !(iv.hi > iv.lo);
  return iv;
}

namespace {

// Unscaled (L1 -> 1) coupling and diffusion sums; conservative for L1 >= 1.
struct RecipeSums {
  double hs, h1, ls, l_first;
};

RecipeSums recipe_sums(const DeclaredBounds& b, std::size_t j) {
  return {coupling_sum(b, j, 1.0), coupling_first_row(b, j), diffusion_sum(b, j, 1.0),
          b.diffusion[j][0]};
}

}  // namespace

RecipeResult recipe_gains(DesignMode mode, const std::vector<SubsystemDesign>& designs,
                          const DeclaredBounds& bounds, const TriggerBudget& budget,
                          const RecipeOptions& options) {
  std::vector<std::size_t> orders;
  for (const auto& d : designs) orders.push_back(d.order());
  bounds.check(orders);

  RecipeResult result;
  result.report.mode = mode;
  result.report.source = "recipe";
  const bool trig = mode == DesignMode::Triggered;
  std::vector<SubsystemDesign> chosen;

  for (std::size_t j = 0; j < designs.size(); ++j) {
    SubsystemDesign base = designs[j];
    base.l1 = base.l2 = 1.0;
    const auto g0 = make_gains(base);
    const double P = g0.p_norm, Q = g0.q_norm;
    const std::size_t n = base.order();
    const double bn = base.controller[n - 1];
    const double theta_bar = bounds.sensitivity[j];
    const auto sums = recipe_sums(bounds, j);
    const auto sens = sensitivity_margin(base.controller, Q, theta_bar);
    const double dp = budget.delta * budget.pi_bar;

    SubsystemReport r;
    r.index = j;
    auto put = [&](std::string name, double v) { r.constants.emplace_back(std::move(name), v); };
    put("norm_P", P);
    put("norm_Q", Q);
    put("norm_Q_sq", Q * Q);
    put("theta_star", sens.theta_star);
    put("Lambda", sens.lambda);
    if (!sens.ok)
      r.blockers.push_back("sensitivity margin violated: theta_bar = " + fmt(theta_bar) +
                           " >= theta* = " + fmt(sens.theta_star));

    auto c1_at = [&](double l1) {
      const double sx = state_bound_constants(n, l1, 1.0).sigma_x;
      double c1 = 0.5 * P * P + 2.0 * sums.hs * sx + sums.ls * sx * P + 0.5 * Q * Q + 0.5 * sums.h1 * sx;
      if (trig) c1 += dp * P;
      return c1;
    };

    // L1: fixed point of L1 = recipe(c1(sigma_x(L1))).
    std::optional<double> l1;
    if (Q * Q >= 1.0) {
      r.blockers.push_back("||Q||^2 = " + fmt(Q * Q) +
                           " >= 1: L1 recipe denominator 1 - ||Q||^2 is non-positive");
      put("c1", c1_at(1.0));
    } else {
      double cur = 1.0;
      bool converged = false, stopped = false;
      for (int it = 0; it < options.max_iterations; ++it) {
        const double next = *recipe_l1(c1_at(cur), Q);
        if (next > options.l1_cap) {
          r.blockers.push_back("L1 fixed point exceeds cap " + fmt(options.l1_cap));
          stopped = true;
          break;
        }
        if (std::abs(next - cur) <= options.tolerance * std::max(1.0, cur)) {
          cur = next;
          converged = true;
          break;
        }
        cur = next;
      }
      put("c1", c1_at(cur));
      if (converged) {
        l1 = cur;
        put("L1", cur);
      } else if (!stopped) {
        r.blockers.push_back("L1 fixed-point iteration did not converge");
      }
    }

    const StructuralNorms norms = structural_norms(base.observer, 1.0);
    const double lam = sens.lambda;
    const double rzb = norms.r_z_bar;
    const double a1 = 2.0 * rzb * rzb / lam;
    const double a2 = 2.0 * (norms.r_e * norms.r_e * P * P + 1.0) / lam;
    const double a3 = 2.0 * rzb * Q / lam;
    const double a4 = budget.pi_bar * Q * Q / lam;
    const double a5 = budget.pi_bar * Q * Q * bn * bn / lam;
    put("a1", a1);
    put("a2", a2);
    put("a3", a3);
    if (trig) {
      put("a4", a4);
      put("a5", a5);
    }

    std::optional<double> l2;
    if (l1 && sens.ok) {
      auto c2_at = [&](double l2v) {
        const double ex = state_bound_constants(n, *l1, l2v).eps_x;
        double c2 = sums.l_first * sums.l_first * Q + 2.0 * Q * Q + 0.5 * sums.h1 * ex +
                    2.0 * sums.hs * ex + sums.ls * ex * P;
        if (trig) c2 += budget.alpha_y + budget.alpha_u + dp * Q;
        return c2;
      };
      double cur = 1.0;
      bool converged = false, stopped = false;
      for (int it = 0; it < options.max_iterations; ++it) {
        const double c2 = c2_at(cur);
        double next;
        if (!trig) {
          next = recipe_l2_continuous(c2, lam, *l1, a1, a2, a3);
        } else {
          if (!(a5 > 0.0)) {
            r.blockers.push_back("pi_bar ||Q||^2 b_n^2 must be positive for the triggered L2 recipe");
            stopped = true;
            break;
          }
          const double k1 = 1.0 / (a5 * *l1);
          const double k2 = c2 / (lam * *l1) + a1 * *l1 + a2 + a3 + a4;
          const auto iv = recipe_l2_interval(k1, k2);
          if (iv.empty) {
            const double disc = k1 * k1 / 4.0 - k1 * k2;
            r.blockers.push_back(disc <= 0.0 ? "kappa_hat is complex: k1^2/4 - k1 k2 = " + fmt(disc)
                                             : std::string("admissible L2 interval is empty"));
            put("kappa_tilde_1", k1);
            put("kappa_tilde_2", k2);
            stopped = true;
            break;
          }
          next = 0.5 * (iv.lo + iv.hi);
        }
        if (next > options.l2_cap) {
          r.blockers.push_back("L2 fixed point exceeds cap " + fmt(options.l2_cap));
          stopped = true;
          break;
        }
        if (std::abs(next - cur) <= options.tolerance * std::max(1.0, cur)) {
          cur = next;
          converged = true;
          break;
        }
        cur = next;
      }
      put("c2", c2_at(converged ? cur : 1.0));
      if (converged) {
        l2 = cur;
        put("L2", cur);
        if (trig) {
          const double k1 = 1.0 / (a5 * *l1);
          const double k2 = c2_at(cur) / (lam * *l1) + a1 * *l1 + a2 + a3 + a4;
          put("kappa_tilde_1", k1);
          put("kappa_tilde_2", k2);
          put("kappa_hat", std::sqrt(k1 * k1 / 4.0 - k1 * k2));
        } else {
          put("kappa_1", 1.0 / (lam * *l1));
          put("kappa_2", a1 * *l1 + a2 + a3);
        }
      } else if (!stopped) {
        r.blockers.push_back("L2 fixed-point iteration did not converge");
      }
    }

    r.feasible = r.blockers.empty() && l1 && l2;
    if (r.feasible) {
      SubsystemDesign d = base;
      d.l1 = *l1;
      d.l2 = *l2;
      chosen.push_back(d);
    }
    result.report.subsystems.push_back(std::move(r));
  }

  if (result.report.feasible()) result.gains = make_gain_set(chosen, GainProvenance::Recipe);
  return result;
}

ScaledBoundReport check_scaled_bounds(const Scenario& scenario, const GainSet& gains,
                                      const DeclaredBounds& bounds,
                                      const ScaledBoundOptions& options) {
  const std::size_t N = scenario.size();
  if (gains.size() != N) throw ConfigError("gain set does not match the scenario");
  bounds.check(orders_of(gains));

  ScaledBoundReport rep;
  rep.samples = options.samples;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const Interval& iv) { return iv.lo + (iv.hi - iv.lo) * unit(rng); };

  PlantState state;
  state.x.resize(N);
  std::vector<std::vector<double>> xhat(N);
  for (std::size_t i = 0; i < N; ++i) {
    state.x[i].resize(scenario.subsystems[i].order);
    xhat[i].resize(scenario.subsystems[i].order);
  }
  std::vector<double> inputs(N), zsq(N), esq(N);

  for (std::size_t s = 0; s < options.samples; ++s) {
    for (std::size_t i = 0; i < N; ++i) {
      for (double& v : state.x[i]) v = draw(options.state_box);
      for (double& v : xhat[i]) v = draw(options.estimate_box);
    }
    for (double& u : inputs) u = draw(options.input_box);
    state.t = draw(options.time_box);

    for (std::size_t i = 0; i < N; ++i) {
      const auto t = transform(gains[i].design, state.x[i], xhat[i]);
      zsq[i] = esq[i] = 0.0;
      for (double v : t.z) zsq[i] += v * v;
      for (double v : t.e) esq[i] += v * v;
    }

    for (std::size_t i = 0; i < N; ++i) {
      const auto& spec = scenario.subsystems[i];
      const double l1 = gains[i].design.l1;

      std::vector<double> f(spec.order, 0.0);
      for (const auto& term : spec.couplings) f[term.row] += term.fn(state, inputs);
      double fe = 0.0, fbound = 0.0, scale = 1.0;
      for (std::size_t k = 0; k < spec.order; ++k) {
        fe += f[k] * f[k] / scale;
        for (std::size_t j = 0; j < N; ++j) {
          const double h = bounds.coupling[i][j][k];
          fbound += h * h / scale *
                    (gains[j].bounds.eps_x * zsq[j] + gains[j].bounds.sigma_x * esq[j]);
        }
        scale *= l1 * l1;
      }

      const Matrix phi = eval_diffusion(spec, state.x[i]);
      double ke = 0.0, kbound = 0.0;
      scale = 1.0;
      const double mix = gains[i].bounds.eps_x * zsq[i] + gains[i].bounds.sigma_x * esq[i];
      for (std::size_t k = 0; k < spec.order; ++k) {
        double row = 0.0;
        for (std::size_t c = 0; c < phi.cols(); ++c) row += phi(k, c) * phi(k, c);
        ke += row / scale;
        const double kk = static_cast<double>(k + 1);
        kbound += kk * kk * bounds.diffusion[i][k] * bounds.diffusion[i][k] / scale * mix;
        scale *= l1 * l1;
      }

      if (fe > fbound * (1.0 + 1e-12)) ++rep.coupling_violations;
      if (ke > kbound * (1.0 + 1e-12)) ++rep.diffusion_violations;
      if (fbound > 0.0) rep.worst_coupling_ratio = std::max(rep.worst_coupling_ratio, fe / fbound);
      if (kbound > 0.0) rep.worst_diffusion_ratio = std::max(rep.worst_diffusion_ratio, ke / kbound);
    }
  }
  return rep;
}

}  // namespace etsim

#include "etsim/plant.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <string>
#include <utility>

#include "etsim/errors.hpp"

namespace etsim {

namespace {

double euclidean_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string term_name(std::size_t i, std::size_t j, std::size_t k) {
  return "f_{" + std::to_string(i + 1) + std::to_string(j + 1) + "," + std::to_string(k + 1) + "}";
}

}  // namespace

std::size_t Scenario::total_order() const {
  std::size_t n = 0;
  for (const auto& s : subsystems) n += s.order;
  return n;
}

double Scenario::coupling_bound(std::size_t i, std::size_t j, std::size_t k) const {
  double bound = 0.0;
  for (const auto& term : subsystems.at(i).couplings)
    if (term.source == j && term.row == k) bound += term.declared_bound;
  return bound;
}

void Scenario::validate() const {
  if (subsystems.empty()) throw ConfigError("scenario '" + name + "' has no subsystems");
  for (std::size_t i = 0; i < subsystems.size(); ++i) {
    const auto& s = subsystems[i];
    const std::string where = "subsystem " + std::to_string(i + 1);
    if (s.order == 0) throw ConfigError(where + ": order must be at least 1");
    if (s.wiener_dim == 0) throw ConfigError(where + ": Wiener dimension must be at least 1");
    if (s.diffusion.size() != s.order)
      throw ConfigError(where + ": expected one diffusion term per state");
    for (const auto& d : s.diffusion)
      if (!d.fn) throw ConfigError(where + ": missing diffusion function");
    if (!s.sensitivity) throw ConfigError(where + ": missing sensitivity function");
    if (!(s.sensitivity_bound > 0.0 && s.sensitivity_bound < 1.0))
      throw ConfigError(where + ": sensitivity bound must lie in (0, 1)");
    for (const auto& c : s.couplings) {
      if (c.source >= subsystems.size() || c.row >= s.order || !c.fn)
        throw ConfigError(where + ": malformed coupling term");
      if (c.declared_bound < 0.0) throw ConfigError(where + ": negative coupling bound");
    }
  }
}

Scenario section6_scenario(const ScenarioOptions& options) {
  const double cs = options.coupling_scale;
  const double ns = options.noise_scale;
  const double amp = options.sensitivity_amplitude;

  auto theta1 = [](const PlantState& s) { return std::hypot(s.x[0][0], s.x[0][1]); };
  auto theta2 = [](const PlantState& s) { return std::hypot(s.x[1][0], s.x[1][1]); };

  auto make_subsystem = [&]() {
    SubsystemSpec spec;
    spec.order = 2;
    spec.wiener_dim = 1;
    spec.diffusion = {
        DiffusionTerm{[ns](std::span<const double> x, std::span<double> out) {
                        out[0] = ns * 0.5 * x[0] * std::sin(0.2 * x[0]);
                      },
                      0.5, false},
        // Quartic growth: only a local linear bound exists.
        DiffusionTerm{[ns](std::span<const double> x, std::span<double> out) {
                        out[0] = ns * 0.25 * x[0] * x[0] * x[1] * x[1] * std::cos(x[1]);
                      },
                      0.25, true},
    };
    spec.sensitivity = [amp](double t) { return 1.0 + amp * std::abs(std::sin(10.0 * t)); };
    spec.sensitivity_bound = 0.25;
    return spec;
  };

  Scenario sc;
  sc.name = "section6";

  SubsystemSpec s1 = make_subsystem();
  s1.couplings = {
      {0, 0,
       [=](const PlantState& s, std::span<const double> u) {
         return cs * 0.1 * std::sin(u[0] * u[1]) * theta1(s);
       },
       0.1},
      {1, 0, [=](const PlantState& s, std::span<const double>) { return cs * 0.15 * theta2(s); },
       0.15},
      {0, 1, [=](const PlantState& s, std::span<const double>) { return cs * 0.1 * theta1(s); },
       0.1},
      {1, 1,
       [=](const PlantState& s, std::span<const double>) {
         return cs * 0.15 * std::sin(theta2(s));
       },
       0.15},
  };

  SubsystemSpec s2 = make_subsystem();
  s2.couplings = {
      {0, 0, [=](const PlantState& s, std::span<const double>) { return cs * 0.15 * theta1(s); },
       0.15},
      {0, 1, [=](const PlantState& s, std::span<const double>) { return cs * 0.15 * theta1(s); },
       0.15},
      {1, 1,
       [=](const PlantState& s, std::span<const double>) {
         return cs * 0.1 * std::log1p(theta2(s));
       },
       0.1},
  };

  sc.subsystems = {std::move(s1), std::move(s2)};
  return sc;
}

namespace {

struct Registry {
  std::mutex mutex;
  std::map<std::string, ScenarioFactory> factories{{"section6", section6_scenario}};
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_scenario(const std::string& name, ScenarioFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.factories[name] = std::move(factory);
}

Scenario make_scenario(const std::string& name, const ScenarioOptions& options) {
  ScenarioFactory factory;
  {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    auto it = r.factories.find(name);
    if (it == r.factories.end()) throw ConfigError("unknown scenario '" + name + "'");
    factory = it->second;
  }
  Scenario sc = factory(options);
  sc.validate();
  return sc;
}

std::vector<std::string> scenario_names() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.factories) names.push_back(name);
  return names;
}

void eval_drift_into(const Scenario& scenario, const PlantState& state,
                     std::span<const double> inputs, std::vector<std::vector<double>>& out) {
  for (std::size_t i = 0; i < scenario.size(); ++i) {
    const auto& spec = scenario.subsystems[i];
    const auto& x = state.x[i];
    auto& d = out[i];
    for (std::size_t k = 0; k + 1 < spec.order; ++k) d[k] = x[k + 1];
    d[spec.order - 1] = inputs[i];
    for (const auto& term : spec.couplings) {
      const double f = term.fn(state, inputs);
      if (!std::isfinite(f))
        throw EvaluationError(term_name(i, term.source, term.row) + " is not finite");
      d[term.row] += f;
    }
  }
}

std::vector<std::vector<double>> eval_drift(const Scenario& scenario, const PlantState& state,
                                            std::span<const double> inputs) {
  if (inputs.size() != scenario.size())
    throw InvalidInputError("expected one input per subsystem");
  for (double u : inputs)
    if (!std::isfinite(u)) throw InvalidInputError("input is not finite");
  std::vector<std::vector<double>> out(scenario.size());
  for (std::size_t i = 0; i < scenario.size(); ++i) out[i].assign(scenario.subsystems[i].order, 0.0);
  eval_drift_into(scenario, state, inputs, out);
  return out;
}

void eval_diffusion_into(const SubsystemSpec& spec, std::span<const double> x_i,
                         std::span<double> rows, std::span<double> scratch) {
  const std::size_t p = spec.wiener_dim;
  if (rows.size() != spec.order * p || scratch.size() < p + 1)
    throw ConfigError("diffusion buffer does not match n x p");
  for (std::size_t k = 0; k < spec.order; ++k) {
    // One sentinel slot past p catches a function writing too many entries.
    constexpr double sentinel = 1.2345e300;
    scratch[p] = sentinel;
    spec.diffusion[k].fn(x_i.subspan(0, k + 1), scratch.subspan(0, p + 1));
    if (scratch[p] != sentinel)
      throw ConfigError("diffusion term " + std::to_string(k + 1) + " wrote more than p entries");
    for (std::size_t c = 0; c < p; ++c) {
      if (!std::isfinite(scratch[c]))
        throw EvaluationError("phi_" + std::to_string(k + 1) + " is not finite");
      rows[k * p + c] = scratch[c];
    }
  }
}

Matrix eval_diffusion(const SubsystemSpec& spec, std::span<const double> x_i) {
  if (x_i.size() != spec.order) throw InvalidInputError("state size does not match subsystem order");
  Matrix rows(spec.order, spec.wiener_dim);
  std::vector<double> flat(spec.order * spec.wiener_dim);
  std::vector<double> scratch(spec.wiener_dim + 1);
  eval_diffusion_into(spec, x_i, flat, scratch);
  for (std::size_t k = 0; k < spec.order; ++k)
    for (std::size_t c = 0; c < spec.wiener_dim; ++c) rows(k, c) = flat[k * spec.wiener_dim + c];
  return rows;
}

double eval_output(const SubsystemSpec& spec, std::span<const double> x_i, double t) {
  return spec.sensitivity(t) * x_i[0];
}

bool sensitivity_in_band(const SubsystemSpec& spec, double t) {
  const double th = spec.sensitivity(t);
  return th >= 1.0 - spec.sensitivity_bound && th <= 1.0 + spec.sensitivity_bound;
}

bool BoundReport::all_pass() const {
  for (const auto& c : couplings)
    if (!c.pass) return false;
  for (const auto& d : diffusion)
    if (!d.pass) return false;
  return true;
}

BoundReport validate_bounds(const Scenario& scenario, const BoundCheckOptions& options) {
  if (options.samples == 0) throw InvalidInputError("validate_bounds needs at least one sample");
  const std::size_t total = scenario.total_order();
  std::vector<Interval> box = options.state_box;
  if (box.empty()) box.assign(total, Interval{});
  if (box.size() != total) throw ConfigError("sample box must give one interval per plant state");

  BoundReport report;
  report.samples = options.samples;
  report.seed = options.seed;
  report.state_box = box;
  for (std::size_t i = 0; i < scenario.size(); ++i) {
    for (const auto& term : scenario.subsystems[i].couplings)
      report.couplings.push_back({i, term.source, term.row, 0.0, term.declared_bound, 0, false});
    for (std::size_t k = 0; k < scenario.subsystems[i].order; ++k) {
      const auto& d = scenario.subsystems[i].diffusion[k];
      report.diffusion.push_back({i, k, 0.0, d.declared_bound, 0, false, d.local_only});
    }
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const Interval& iv) { return iv.lo + (iv.hi - iv.lo) * unit(rng); };

  PlantState state;
  state.x.resize(scenario.size());
  for (std::size_t i = 0; i < scenario.size(); ++i) state.x[i].resize(scenario.subsystems[i].order);
  std::vector<double> inputs(scenario.size());
  std::vector<double> phi;

  for (std::size_t s = 0; s < options.samples; ++s) {
    std::size_t idx = 0;
    for (auto& xi : state.x)
      for (double& v : xi) v = draw(box[idx++]);
    for (double& u : inputs) u = draw(options.input_box);
    state.t = draw(options.time_box);

    std::size_t entry = 0;
    for (std::size_t i = 0; i < scenario.size(); ++i) {
      for (const auto& term : scenario.subsystems[i].couplings) {
        auto& e = report.couplings[entry++];
        const double denom = euclidean_norm(state.x[term.source]);
        if (denom < 1e-12) continue;
        e.empirical_sup = std::max(e.empirical_sup, std::abs(term.fn(state, inputs)) / denom);
        ++e.used_samples;
      }
    }
    entry = 0;
    for (std::size_t i = 0; i < scenario.size(); ++i) {
      const auto& spec = scenario.subsystems[i];
      phi.assign(spec.wiener_dim + 1, 0.0);
      for (std::size_t k = 0; k < spec.order; ++k) {
        auto& e = report.diffusion[entry++];
        double denom = 0.0;
        for (std::size_t m = 0; m <= k; ++m) denom += std::abs(state.x[i][m]);
        if (denom < 1e-12) continue;
        spec.diffusion[k].fn(std::span<const double>(state.x[i]).subspan(0, k + 1), phi);
        const double num = euclidean_norm(std::span<const double>(phi).subspan(0, spec.wiener_dim));
        e.empirical_sup = std::max(e.empirical_sup, num / denom);
        ++e.used_samples;
      }
    }
  }

  // A few ulps of slack: sup-attaining terms land exactly on the bound.
  auto within = [](double sup, double declared) { return sup <= declared * (1.0 + 1e-12); };
  for (auto& c : report.couplings) c.pass = within(c.empirical_sup, c.declared);
  for (auto& d : report.diffusion) d.pass = within(d.empirical_sup, d.declared);
  return report;
}

}  // namespace etsim

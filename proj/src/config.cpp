#include "etsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "etsim/errors.hpp"

namespace etsim {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad(std::string_view key, const std::string& what) {
  throw ConfigError(std::string(key) + ": " + what);
}

double to_double(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    bad(key, "expected a number, got '" + s + "'");
  if (!std::isfinite(v)) bad(key, "must be finite");
  return v;
}

std::uint64_t to_uint(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    bad(key, "expected a non-negative integer, got '" + s + "'");
  return v;
}

bool to_bool(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad(key, "expected true or false, got '" + s + "'");
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::vector<double>> to_blocks(std::string_view key, std::string_view text) {
  std::vector<std::vector<double>> blocks;
  for (const auto& block : split(text, ';')) {
    if (block.empty()) bad(key, "empty block");
    std::vector<double> values;
    for (const auto& item : split(block, ',')) values.push_back(to_double(key, item));
    blocks.push_back(std::move(values));
  }
  return blocks;
}

std::vector<double> to_scalars(std::string_view key, std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split(text, ';')) out.push_back(to_double(key, item));
  return out;
}

std::string render_blocks(const std::vector<std::vector<double>>& blocks) {
  std::string s;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b) s += "; ";
    for (std::size_t k = 0; k < blocks[b].size(); ++k) {
      if (k) s += ", ";
      s += fmt(blocks[b][k]);
    }
  }
  return s;
}

std::string render_scalars(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += "; ";
    s += fmt(v[k]);
  }
  return s;
}

struct Key {
  std::string name;
  bool required;
  std::function<void(RunManifest&, std::string_view)> set;
  std::function<std::string(const RunManifest&)> get;
};

Key real(std::string name, bool required, double RunManifest::*field) {
  return {name, required,
          [name, field](RunManifest& m, std::string_view v) { m.*field = to_double(name, v); },
          [field](const RunManifest& m) { return fmt(m.*field); }};
}

Key count(std::string name, bool required, std::size_t RunManifest::*field) {
  return {name, required,
          [name, field](RunManifest& m, std::string_view v) {
            m.*field = static_cast<std::size_t>(to_uint(name, v));
          },
          [field](const RunManifest& m) { return std::to_string(m.*field); }};
}

Key flag(std::string name, bool RunManifest::*field) {
  return {name, false,
          [name, field](RunManifest& m, std::string_view v) { m.*field = to_bool(name, v); },
          [field](const RunManifest& m) { return std::string(m.*field ? "true" : "false"); }};
}

Key blocks(std::string name, bool required, std::vector<std::vector<double>> RunManifest::*field) {
  return {name, required,
          [name, field](RunManifest& m, std::string_view v) { m.*field = to_blocks(name, v); },
          [field](const RunManifest& m) { return render_blocks(m.*field); }};
}

Key channel(std::string name, ChannelParams RunManifest::*ch, double ChannelParams::*field) {
  return {name, true,
          [name, ch, field](RunManifest& m, std::string_view v) { (m.*ch).*field = to_double(name, v); },
          [ch, field](const RunManifest& m) { return fmt((m.*ch).*field); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"scenario", true, [](RunManifest& m, std::string_view v) { m.scenario = trim(v); },
                 [](const RunManifest& m) { return m.scenario; }});
    k.push_back({"mode", true,
                 [](RunManifest& m, std::string_view v) { m.mode = parse_control_mode(trim(v)); },
                 [](const RunManifest& m) { return std::string(to_string(m.mode)); }});
    k.push_back({"clock", true,
                 [](RunManifest& m, std::string_view v) { m.clock = parse_clock_mode(trim(v)); },
                 [](const RunManifest& m) { return std::string(to_string(m.clock)); }});
    k.push_back(real("step", true, &RunManifest::step));
    k.push_back(real("horizon", true, &RunManifest::horizon));
    k.push_back({"seed", true, [](RunManifest& m, std::string_view v) { m.seed = to_uint("seed", v); },
                 [](const RunManifest& m) { return std::to_string(m.seed); }});
    k.push_back(blocks("x0", true, &RunManifest::x0));
    k.push_back(blocks("xhat0", true, &RunManifest::xhat0));
    k.push_back(blocks("observer_coeffs", true, &RunManifest::observer_coeffs));
    k.push_back(blocks("controller_coeffs", true, &RunManifest::controller_coeffs));
    k.push_back({"gains", true,
                 [](RunManifest& m, std::string_view v) {
                   const auto s = trim(v);
                   if (s == "manual")
                     m.gains = GainSource::Manual;
                   else if (s == "recipe")
                     m.gains = GainSource::Recipe;
                   else
                     bad("gains", "expected manual or recipe, got '" + s + "'");
                 },
                 [](const RunManifest& m) {
                   return std::string(m.gains == GainSource::Manual ? "manual" : "recipe");
                 }});
    k.push_back({"l1", false, [](RunManifest& m, std::string_view v) { m.l1 = to_scalars("l1", v); },
                 [](const RunManifest& m) { return render_scalars(m.l1); }});
    k.push_back({"l2", false, [](RunManifest& m, std::string_view v) { m.l2 = to_scalars("l2", v); },
                 [](const RunManifest& m) { return render_scalars(m.l2); }});
    k.push_back(real("l1_cap", false, &RunManifest::l1_cap));

    const std::pair<const char*, double ChannelParams::*> fields[] = {
        {"rho", &ChannelParams::rho},       {"alpha", &ChannelParams::alpha},
        {"beta", &ChannelParams::beta},     {"gamma", &ChannelParams::gamma},
        {"delta", &ChannelParams::delta},   {"pi_bar", &ChannelParams::pi_bar},
        {"pi_low", &ChannelParams::pi_low}, {"xi0", &ChannelParams::xi0}};
    for (const auto& [name, field] : fields) {
      k.push_back(channel(std::string(name) + "_y", &RunManifest::output, field));
      k.push_back(channel(std::string(name) + "_u", &RunManifest::input, field));
    }

    k.push_back(count("replicas", false, &RunManifest::replicas));
    k.push_back(count("workers", false, &RunManifest::workers));
    k.push_back(count("record_every", false, &RunManifest::record_every));
    k.push_back(real("divergence_threshold", false, &RunManifest::divergence_threshold));
    k.push_back({"noise_scale", false,
                 [](RunManifest& m, std::string_view v) {
                   m.scenario_options.noise_scale = to_double("noise_scale", v);
                 },
                 [](const RunManifest& m) { return fmt(m.scenario_options.noise_scale); }});
    k.push_back({"coupling_scale", false,
                 [](RunManifest& m, std::string_view v) {
                   m.scenario_options.coupling_scale = to_double("coupling_scale", v);
                 },
                 [](const RunManifest& m) { return fmt(m.scenario_options.coupling_scale); }});
    k.push_back({"sensitivity_amplitude", false,
                 [](RunManifest& m, std::string_view v) {
                   m.scenario_options.sensitivity_amplitude = to_double("sensitivity_amplitude", v);
                 },
                 [](const RunManifest& m) { return fmt(m.scenario_options.sensitivity_amplitude); }});
    k.push_back({"output_dir", false, [](RunManifest& m, std::string_view v) { m.output_dir = trim(v); },
                 [](const RunManifest& m) { return m.output_dir; }});
    k.push_back(flag("emit_trajectories", &RunManifest::emit_trajectories));
    k.push_back(flag("emit_events", &RunManifest::emit_events));
    k.push_back(flag("emit_summary", &RunManifest::emit_summary));
    k.push_back(flag("emit_feasibility", &RunManifest::emit_feasibility));
    k.push_back(real("eta", false, &RunManifest::eta));
    k.push_back(real("q", false, &RunManifest::q));
    k.push_back(count("monotonicity_window", false, &RunManifest::monotonicity_window));
    k.push_back(real("fit_start", false, &RunManifest::fit_start));
    k.push_back(count("bound_samples", false, &RunManifest::bound_samples));
    k.push_back({"bound_seed", false,
                 [](RunManifest& m, std::string_view v) { m.bound_seed = to_uint("bound_seed", v); },
                 [](const RunManifest& m) { return std::to_string(m.bound_seed); }});
    k.push_back(real("bound_box", false, &RunManifest::bound_box));
    return k;
  }();
  return table;
}

const Key& find_key(const std::string& name) {
  for (const auto& k : keys())
    if (k.name == name) return k;
  throw ConfigError("unknown key '" + name + "'");
}

std::pair<std::string, std::string> split_assignment(std::string_view line, std::string_view where) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError(std::string(where) + ": expected 'key = value', got '" + trim(line) + "'");
  auto key = trim(line.substr(0, eq));
  if (key.empty()) throw ConfigError(std::string(where) + ": missing key");
  return {key, trim(line.substr(eq + 1))};
}

void validate(const RunManifest& m) {
  if (!(m.step > 0.0)) bad("step", "must be positive");
  if (!(m.horizon >= 0.0)) bad("horizon", "must be non-negative");
  if (m.horizon > 0.0 && m.step > m.horizon) bad("step", "must not exceed horizon");
  if (m.replicas == 0) bad("replicas", "must be at least 1");
  if (m.record_every == 0) bad("record_every", "must be at least 1");
  if (!(m.divergence_threshold > 0.0)) bad("divergence_threshold", "must be positive");
  if (!(m.eta > 0.0)) bad("eta", "must be positive");
  if (!(m.q >= 0.0 && m.q < 1.0)) bad("q", "must lie in [0, 1)");
  if (m.monotonicity_window == 0) bad("monotonicity_window", "must be at least 1");
  if (!(m.bound_box > 0.0)) bad("bound_box", "must be positive");
  if (m.bound_samples == 0) bad("bound_samples", "must be at least 1");
  if (!(m.scenario_options.noise_scale >= 0.0)) bad("noise_scale", "must be non-negative");
  if (!(m.scenario_options.coupling_scale >= 0.0)) bad("coupling_scale", "must be non-negative");
  if (!(m.scenario_options.sensitivity_amplitude >= 0.0 && m.scenario_options.sensitivity_amplitude < 1.0))
    bad("sensitivity_amplitude", "must lie in [0, 1)");
  if (m.gains == GainSource::Manual) {
    if (m.l1.empty()) bad("l1", "required when gains = manual");
    if (m.l2.empty()) bad("l2", "required when gains = manual");
    for (double v : m.l1)
      if (!(v >= 1.0)) bad("l1", "must be at least 1");
    for (double v : m.l2)
      if (!(v >= 1.0)) bad("l2", "must be at least 1");
  }
  if (!(m.l1_cap >= 1.0)) bad("l1_cap", "must be at least 1");
  auto hurwitz = [](std::string_view key, const std::vector<std::vector<double>>& blocks) {
    for (const auto& b : blocks)
      if (!is_hurwitz_polynomial(b)) bad(key, "coefficients must define a Hurwitz polynomial");
  };
  hurwitz("observer_coeffs", m.observer_coeffs);
  hurwitz("controller_coeffs", m.controller_coeffs);
  // Channel constraints, including rho > (1 - gamma) / beta.
  TriggerParams(m.output, m.input);

  // Shapes against the scenario, so a bad block fails before anything runs.
  const Scenario sc = make_scenario(m.scenario, m.scenario_options);
  const std::size_t n = sc.size();
  auto count = [n](std::string_view key, std::size_t got) {
    if (got != 1 && got != n)
      bad(key, "give one block, or one per subsystem (" + std::to_string(n) + "), got " + std::to_string(got));
  };
  for (const auto& [key, blocks] : {std::pair{"x0", &m.x0}, std::pair{"xhat0", &m.xhat0},
                                    std::pair{"observer_coeffs", &m.observer_coeffs},
                                    std::pair{"controller_coeffs", &m.controller_coeffs}}) {
    count(key, blocks->size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& b = (*blocks)[blocks->size() == 1 ? 0 : i];
      if (b.size() != sc.subsystems[i].order)
        bad(key, "subsystem " + std::to_string(i + 1) + " needs " +
                     std::to_string(sc.subsystems[i].order) + " entries, got " + std::to_string(b.size()));
    }
  }
  if (!m.l1.empty()) count("l1", m.l1.size());
  if (!m.l2.empty()) count("l2", m.l2.size());
}

}  // namespace

std::vector<std::string> required_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys())
    if (k.required) out.push_back(k.name);
  return out;
}

RunManifest parse_manifest(std::string_view text, const std::vector<std::string>& overrides) {
  RunManifest m;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto [key, value] = split_assignment(line, "line " + std::to_string(lineno));
    const auto& k = find_key(key);
    if (!seen.insert(key).second) throw ConfigError("key '" + key + "' is given twice");
    k.set(m, value);
  }
  for (const auto& ov : overrides) {
    const auto [key, value] = split_assignment(ov, "override");
    find_key(key).set(m, value);
    seen.insert(key);
    m.overrides.push_back(key + "=" + value);
  }

  std::vector<std::string> missing;
  for (const auto& k : keys())
    if (k.required && !seen.count(k.name)) missing.push_back(k.name);
  if (!missing.empty()) {
    std::string msg = "missing required keys:";
    for (const auto& k : missing) msg += " " + k;
    throw ConfigError(msg);
  }
  validate(m);
  return m;
}

RunManifest parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), overrides);
}

std::string render_manifest(const RunManifest& m) {
  std::string out = "# resolved manifest; every key is listed, defaults included\n";
  for (const auto& ov : m.overrides) out += "# override: " + ov + "\n";
  for (const auto& k : keys()) {
    if ((k.name == "l1" && m.l1.empty()) || (k.name == "l2" && m.l2.empty())) continue;
    out += k.name + " = " + k.get(m) + "\n";
  }
  return out;
}

std::string output_stem(const RunManifest& m) {
  const std::string mode = m.mode == ControlMode::Continuous ? "continuous" : std::string(to_string(m.clock));
  return m.scenario + "_" + mode + "_" + std::to_string(m.seed);
}

namespace {

template <class T>
const T& pick(const std::vector<T>& v, std::size_t i, std::string_view key, std::size_t n) {
  if (v.size() == 1) return v[0];
  if (v.size() != n) bad(key, "give one block, or one per subsystem (" + std::to_string(n) + ")");
  return v[i];
}

std::vector<std::vector<double>> per_subsystem(const std::vector<std::vector<double>>& v,
                                               std::string_view key, std::size_t n) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pick(v, i, key, n));
  return out;
}

}  // namespace

std::vector<SubsystemDesign> manifest_designs(const RunManifest& m, std::size_t n) {
  std::vector<SubsystemDesign> out;
  for (std::size_t i = 0; i < n; ++i) {
    try {
      SubsystemDesign d{HurwitzCoeffs(pick(m.observer_coeffs, i, "observer_coeffs", n)),
                        HurwitzCoeffs(pick(m.controller_coeffs, i, "controller_coeffs", n)), 1.0,
                        1.0};
      if (!m.l1.empty()) d.l1 = pick(m.l1, i, "l1", n);
      if (!m.l2.empty()) d.l2 = pick(m.l2, i, "l2", n);
      out.push_back(d);
    } catch (const InvalidInputError& e) {
      throw ConfigError(std::string("subsystem ") + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

ExperimentSetup build_setup(const RunManifest& m) {
  ExperimentSetup s{make_scenario(m.scenario, m.scenario_options), {}, {}, {}};
  const std::size_t n = s.scenario.size();
  auto designs = manifest_designs(m, n);
  for (std::size_t i = 0; i < n; ++i)
    if (designs[i].order() != s.scenario.subsystems[i].order)
      bad("observer_coeffs", "subsystem " + std::to_string(i + 1) + " needs " +
                                 std::to_string(s.scenario.subsystems[i].order) + " coefficients");

  s.trigger = TriggerParams(m.output, m.input);
  if (m.gains == GainSource::Manual) {
    s.gains = make_gain_set(designs, GainProvenance::Manual);
  } else {
    const auto mode = m.mode == ControlMode::Continuous ? DesignMode::Continuous : DesignMode::Triggered;
    RecipeOptions opts;
    opts.l1_cap = m.l1_cap;
    auto res = recipe_gains(mode, designs, DeclaredBounds::from_scenario(s.scenario),
                            TriggerBudget::from(*s.trigger), opts);
    if (!res.gains) {
      std::string msg = "gain recipe is infeasible:";
      for (const auto& sub : res.report.subsystems)
        for (const auto& b : sub.blockers) msg += "\n  subsystem " + std::to_string(sub.index + 1) + ": " + b;
      throw NoSolutionError(msg);
    }
    s.gains = std::move(*res.gains);
  }

  s.sim.step = m.step;
  s.sim.horizon = m.horizon;
  s.sim.mode = m.mode;
  s.sim.clock = m.clock;
  s.sim.seed = m.seed;
  s.sim.record_every = m.record_every;
  s.sim.divergence_threshold = m.divergence_threshold;
  s.sim.x0 = per_subsystem(m.x0, "x0", n);
  s.sim.xhat0 = per_subsystem(m.xhat0, "xhat0", n);
  s.sim.validate(s.scenario);
  return s;
}

}  // namespace etsim

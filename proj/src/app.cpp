#include "etsim/app.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "etsim/config.hpp"
#include "etsim/errors.hpp"
#include "etsim/experiment.hpp"
#include "etsim/gain_design.hpp"

namespace fs = std::filesystem;

namespace etsim {

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string output_dir;
  std::string mode;
  std::string clock;
  std::int64_t seed = -1;
  std::int64_t replicas = -1;
  std::int64_t workers = -1;
  bool check = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("config", a.config, "Manifest file (key = value)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", a.sets, "Override a manifest key, e.g. --set horizon=5 (repeatable)");
  cmd->add_option("-o,--output-dir", a.output_dir, "Override output_dir");
  cmd->add_option("--seed", a.seed, "Override the master seed");
  cmd->add_flag("--check", a.check, "Exit with status 3 when an acceptance assertion fails");
  cmd->add_flag("-q,--quiet", a.quiet, "Only print errors");
}

RunManifest load(const CommonArgs& a) {
  std::vector<std::string> ov = a.sets;
  if (!a.output_dir.empty()) ov.push_back("output_dir=" + a.output_dir);
  if (!a.mode.empty()) ov.push_back("mode=" + a.mode);
  if (!a.clock.empty()) ov.push_back("clock=" + a.clock);
  if (a.seed >= 0) ov.push_back("seed=" + std::to_string(a.seed));
  if (a.replicas >= 0) ov.push_back("replicas=" + std::to_string(a.replicas));
  if (a.workers >= 0) ov.push_back("workers=" + std::to_string(a.workers));
  return parse_config(a.config, ov);
}

fs::path prepare_dir(const RunManifest& m, const std::string& stem) {
  const fs::path dir = fs::path(m.output_dir) / stem;
  fs::create_directories(dir);
  std::ofstream(dir / "manifest.cfg") << render_manifest(m);
  return dir;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  fn(out);
}

AnalysisOptions analysis(const RunManifest& m) {
  return {m.eta, m.q, m.fit_start, m.monotonicity_window};
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_channels(std::ostream& out, const std::string& label, const EnsembleResult& r) {
  for (const auto& c : r.channels)
    out << "  " << label << " subsystem " << c.subsystem + 1 << " " << to_string(c.channel)
        << ": events=" << c.events << " min_dwell=" << num(c.min_dwell)
        << " mean_dwell=" << num(c.mean_dwell) << " early=" << c.early_count
        << " late=" << c.late_count << "\n";
}

// ---- run ------------------------------------------------------------------

int cmd_run(const CommonArgs& a) {
  const RunManifest m = load(a);
  const ExperimentSetup setup = build_setup(m);
  const fs::path dir = prepare_dir(m, output_stem(m));

  SimConfig cfg = setup.sim;
  cfg.replica = 0;
  const RunRecord rec = simulate(setup.scenario, setup.gains, setup.trigger, cfg);
  if (m.emit_trajectories)
    write_file(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, rec); });
  if (m.emit_events && m.mode == ControlMode::Triggered)
    write_file(dir / "events.csv", [&](std::ostream& o) { write_events_csv(o, rec); });
  const auto res = aggregate(setup, {rec}, false);
  if (m.emit_summary)
    write_file(dir / "summary.json", [&](std::ostream& o) { o << summary_json(res, analysis(m)) << "\n"; });

  if (!a.quiet) {
    std::cout << "run " << output_stem(m) << " -> " << dir.string() << "\n";
    print_channels(std::cout, to_string(m.clock).data(), res);
  }
  if (rec.diverged) {
    std::cerr << "error: trajectory diverged at t=" << rec.divergence_time << ": "
              << rec.divergence_reason << "\n";
    return kExitDivergence;
  }
  return kExitOk;
}

// ---- ensemble ---------------------------------------------------------------

int cmd_ensemble(const CommonArgs& a) {
  const RunManifest m = load(a);
  const ExperimentSetup setup = build_setup(m);
  const fs::path dir = prepare_dir(m, output_stem(m));

  const auto records = run_replicas(setup, m.replicas, m.workers);
  const auto res = aggregate(setup, records, false);

  if (m.emit_trajectories)
    write_file(dir / "ensemble.csv", [&](std::ostream& o) { write_ensemble_csv(o, res); });
  if (m.emit_events && m.mode == ControlMode::Triggered) {
    write_file(dir / "events.csv", [&](std::ostream& o) {
      bool header = true;
      for (const auto& r : records) {
        write_events_csv(o, r, header);
        header = false;
      }
    });
    write_file(dir / "channels.csv",
               [&](std::ostream& o) { write_channel_csv(o, res, std::string(to_string(m.clock))); });
  }
  if (m.emit_summary)
    write_file(dir / "summary.json", [&](std::ostream& o) { o << summary_json(res, analysis(m)) << "\n"; });

  const auto conv = convergence_check(res, m.eta, m.q);
  const auto fit = decay_check(res, m.fit_start, m.monotonicity_window);
  if (!a.quiet) {
    std::cout << "ensemble " << output_stem(m) << " (" << m.replicas << " replicas) -> " << dir.string()
              << "\n  diverged=" << res.diverged << " converged=" << conv.converged << "/" << conv.total
              << " monotonicity=" << num(fit.monotonicity) << " decay_rate=" << num(fit.rate) << "\n";
    print_channels(std::cout, to_string(m.clock).data(), res);
  }
  if (res.diverged == res.replicas) {
    std::cerr << "error: all replicas diverged\n";
    return kExitDivergence;
  }
  if (a.check) {
    bool ok = conv.pass && fit.monotonicity >= 0.9;
    for (const auto& c : res.channels)
      if (c.intervals && c.min_dwell < m.step * (1.0 - 1e-9)) ok = false;
    if (!ok) {
      std::cerr << "check failed: convergence " << (conv.pass ? "ok" : "FAILED") << ", monotonicity "
                << num(fit.monotonicity) << " (need >= 0.9)\n";
      return kExitAssertion;
    }
  }
  return kExitOk;
}

// ---- compare ----------------------------------------------------------------

int cmd_compare(const CommonArgs& a) {
  RunManifest m = load(a);
  if (m.mode != ControlMode::Triggered) throw ConfigError("mode: compare needs mode = triggered");
  RunManifest mp = m, mb = m;
  mp.clock = ClockMode::Proposed;
  mb.clock = ClockMode::TimeRegulation;
  const auto sp = build_setup(mp);
  const auto sb = build_setup(mb);
  const fs::path dir = prepare_dir(m, m.scenario + "_compare_" + std::to_string(m.seed));

  const auto cmp = compare_modes(sp, sb, m.replicas, m.workers);
  write_file(dir / "comparison.csv", [&](std::ostream& o) {
    write_channel_csv(o, cmp.a, "proposed");
    write_channel_csv(o, cmp.b, "time-regulation", false);
  });
  if (m.emit_summary)
    write_file(dir / "comparison.json",
               [&](std::ostream& o) { o << comparison_json(cmp, analysis(m)) << "\n"; });
  if (m.emit_trajectories) {
    write_file(dir / "ensemble_proposed.csv", [&](std::ostream& o) { write_ensemble_csv(o, cmp.a); });
    write_file(dir / "ensemble_time-regulation.csv", [&](std::ostream& o) { write_ensemble_csv(o, cmp.b); });
  }

  const double bound = time_regulation_dwell(mb.output) - 2.0 * m.step;
  if (!a.quiet) {
    std::cout << "compare " << m.scenario << " (" << m.replicas << " replicas each) -> " << dir.string()
              << "\n  proposed: diverged=" << cmp.a.diverged << "/" << cmp.a.replicas
              << "\n  time-regulation: diverged=" << cmp.b.diverged << "/" << cmp.b.replicas
              << " (dwell bound " << num(bound + 2.0 * m.step) << ")\n";
    print_channels(std::cout, "proposed", cmp.a);
    print_channels(std::cout, "time-regulation", cmp.b);
  }
  if (a.check) {
    bool ok = true;
    for (const auto& c : cmp.a.channels)
      if (c.intervals && c.min_dwell < m.step * (1.0 - 1e-9)) ok = false;
    for (const auto& c : cmp.b.channels)
      if (c.intervals && c.min_dwell < bound) ok = false;
    if (!ok) {
      std::cerr << "check failed: a dwell-time bound was violated\n";
      return kExitAssertion;
    }
  }
  return kExitOk;
}

// ---- check-gains ------------------------------------------------------------

int cmd_check_gains(const CommonArgs& a) {
  const RunManifest m = load(a);
  const Scenario sc = make_scenario(m.scenario, m.scenario_options);
  const auto designs = manifest_designs(m, sc.size());
  const auto bounds = DeclaredBounds::from_scenario(sc);
  const auto budget = TriggerBudget::from(TriggerParams(m.output, m.input));
  RecipeOptions opts;
  opts.l1_cap = m.l1_cap;

  nlohmann::ordered_json j;
  j["scenario"] = m.scenario;
  bool margins_ok = false;
  if (!m.l1.empty() && !m.l2.empty()) {
    const auto gains = make_gain_set(designs);
    const auto mc = margins_continuous(gains, bounds);
    const auto mt = margins_triggered(gains, bounds, budget);
    j["margins_continuous"] = nlohmann::ordered_json::parse(to_json(mc));
    j["margins_triggered"] = nlohmann::ordered_json::parse(to_json(mt));
    margins_ok = (m.mode == ControlMode::Continuous ? mc : mt).feasible();
  }
  j["recipe_continuous"] =
      nlohmann::ordered_json::parse(to_json(recipe_gains(DesignMode::Continuous, designs, bounds, {}, opts).report));
  j["recipe_triggered"] =
      nlohmann::ordered_json::parse(to_json(recipe_gains(DesignMode::Triggered, designs, bounds, budget, opts).report));

  const std::string text = j.dump(2);
  if (m.emit_feasibility) {
    const fs::path dir = prepare_dir(m, m.scenario + "_gains");
    write_file(dir / "feasibility.json", [&](std::ostream& o) { o << text << "\n"; });
  }
  if (!a.quiet) std::cout << text << "\n";
  if (a.check && !margins_ok) {
    std::cerr << "check failed: the configured gains do not satisfy the stability margins\n";
    return kExitAssertion;
  }
  return kExitOk;
}

// ---- validate-bounds --------------------------------------------------------

int cmd_validate_bounds(const CommonArgs& a) {
  const RunManifest m = load(a);
  const Scenario sc = make_scenario(m.scenario, m.scenario_options);
  BoundCheckOptions opts;
  opts.state_box.assign(sc.total_order(), Interval{-m.bound_box, m.bound_box});
  opts.samples = m.bound_samples;
  opts.seed = m.bound_seed;
  const auto rep = validate_bounds(sc, opts);

  nlohmann::ordered_json j;
  j["scenario"] = m.scenario;
  j["samples"] = rep.samples;
  j["seed"] = rep.seed;
  j["box_half_width"] = m.bound_box;
  auto& cj = j["couplings"] = nlohmann::ordered_json::array();
  for (const auto& c : rep.couplings)
    cj.push_back({{"i", c.i + 1}, {"j", c.j + 1}, {"k", c.k + 1}, {"empirical_sup", c.empirical_sup},
                  {"declared", c.declared}, {"samples", c.used_samples}, {"pass", c.pass}});
  auto& dj = j["diffusion"] = nlohmann::ordered_json::array();
  for (const auto& d : rep.diffusion)
    dj.push_back({{"i", d.i + 1}, {"k", d.k + 1}, {"empirical_sup", d.empirical_sup},
                  {"declared", d.declared}, {"samples", d.used_samples}, {"pass", d.pass},
                  {"scope", d.local_only ? "local" : "global"}});

  bool ok = rep.all_pass();
  if (!m.l1.empty() && !m.l2.empty()) {
    ScaledBoundOptions so;
    so.state_box = so.estimate_box = Interval{-m.bound_box, m.bound_box};
    so.samples = std::min<std::size_t>(m.bound_samples, 10000);
    so.seed = m.bound_seed;
    const auto sr = check_scaled_bounds(sc, make_gain_set(manifest_designs(m, sc.size())),
                                        DeclaredBounds::from_scenario(sc), so);
    j["scaled_error_bounds"] = {{"samples", sr.samples},
                                {"coupling_violations", sr.coupling_violations},
                                {"diffusion_violations", sr.diffusion_violations},
                                {"worst_coupling_ratio", sr.worst_coupling_ratio},
                                {"worst_diffusion_ratio", sr.worst_diffusion_ratio}};
    ok = ok && sr.pass();
  }
  j["pass"] = ok;

  const std::string text = j.dump(2);
  const fs::path dir = prepare_dir(m, m.scenario + "_bounds");
  write_file(dir / "bounds.json", [&](std::ostream& o) { o << text << "\n"; });
  if (!a.quiet) std::cout << text << "\n";
  if (a.check && !ok) {
    std::cerr << "check failed: a declared bound was exceeded on the sample box\n";
    return kExitAssertion;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Event-triggered output-feedback control of stochastic interconnected systems"};
  app.footer(
      "Outputs go to <output_dir>/<scenario>_<mode>_<seed>/ where <mode> is continuous, proposed\n"
      "or time-regulation. compare writes <scenario>_compare_<seed>/, check-gains\n"
      "<scenario>_gains/ and validate-bounds <scenario>_bounds/. Every directory holds the\n"
      "resolved manifest.cfg, which reproduces the run on its own.\n\n"
      "Exit status: 0 success, 1 validation error, 2 divergence, 3 failed --check assertion.");
  app.require_subcommand(1);

  CommonArgs a;
  auto* run = app.add_subcommand("run", "Simulate one trajectory (replica 0)");
  add_common(run, a);
  run->add_option("--mode", a.mode, "continuous or triggered");
  run->add_option("--clock", a.clock, "proposed or time-regulation");

  auto* ens = app.add_subcommand("ensemble", "Run a replica ensemble and summarise it");
  add_common(ens, a);
  ens->add_option("--mode", a.mode, "continuous or triggered");
  ens->add_option("--clock", a.clock, "proposed or time-regulation");
  ens->add_option("--replicas", a.replicas, "Number of replicas");
  ens->add_option("--workers", a.workers, "Worker threads (0 = all cores); results do not depend on it");

  auto* cmp = app.add_subcommand("compare", "Proposed clock versus time-regulation clock");
  add_common(cmp, a);
  cmp->add_option("--replicas", a.replicas, "Number of replicas per mode");
  cmp->add_option("--workers", a.workers, "Worker threads (0 = all cores)");

  auto* gains = app.add_subcommand("check-gains", "Stability margins and gain recipes as JSON");
  add_common(gains, a);
  gains->add_option("--mode", a.mode, "Which margins --check uses: continuous or triggered");

  auto* bounds = app.add_subcommand("validate-bounds", "Monte Carlo check of the declared growth bounds");
  add_common(bounds, a);

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) return cmd_run(a);
    if (*ens) return cmd_ensemble(a);
    if (*cmp) return cmd_compare(a);
    if (*gains) return cmd_check_gains(a);
    if (*bounds) return cmd_validate_bounds(a);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ExperimentFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace etsim

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "etsim/app.hpp"

namespace fs = std::filesystem;
using etsim::run_cli;

namespace {

const std::string kBenchmark = std::string(ETSIM_CONFIG_DIR) + "/section6.cfg";

std::string out_dir(const std::string& name) {
  const fs::path p = fs::path(ETSIM_SCRATCH_DIR) / name;
  fs::remove_all(p);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "etsim");
  return run_cli(args);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
  CHECK(cli({"--help"}) == etsim::kExitOk);
  CHECK(cli({}) == etsim::kExitValidation);
  CHECK(cli({"run"}) == etsim::kExitValidation);
  CHECK(cli({"run", "/nonexistent.cfg"}) == etsim::kExitValidation);
  CHECK(cli({"frobnicate"}) == etsim::kExitValidation);
}

TEST_CASE("run writes trajectory, events and the resolved manifest") {
  const auto dir = out_dir("run");
  CHECK(cli({"run", kBenchmark, "-q", "-o", dir, "--set", "horizon=0.5", "--seed", "3"}) == etsim::kExitOk);
  const fs::path run = fs::path(dir) / "section6_proposed_3";
  CHECK(fs::exists(run / "trajectory.csv"));
  CHECK(fs::exists(run / "events.csv"));
  CHECK(fs::exists(run / "summary.json"));
  const auto manifest = slurp(run / "manifest.cfg");
  CHECK(manifest.find("# override: horizon=0.5") != std::string::npos);
  CHECK(manifest.find("seed = 3") != std::string::npos);

  // the manifest alone reproduces the run
  const auto again = out_dir("run_again");
  CHECK(cli({"run", (run / "manifest.cfg").string(), "-q", "-o", again}) == etsim::kExitOk);
  const fs::path run2 = fs::path(again) / "section6_proposed_3";
  CHECK(slurp(run / "trajectory.csv") == slurp(run2 / "trajectory.csv"));
  CHECK(slurp(run / "events.csv") == slurp(run2 / "events.csv"));
}

TEST_CASE("validation and divergence exit codes") {
  const auto dir = out_dir("codes");
  CHECK(cli({"run", kBenchmark, "-q", "-o", dir, "--set", "rho_y=0.9"}) == etsim::kExitValidation);
  CHECK(cli({"run", kBenchmark, "-q", "-o", dir, "--mode", "sometimes"}) == etsim::kExitValidation);
  CHECK(cli({"run", kBenchmark, "-q", "-o", dir, "--set", "gains=recipe"}) == etsim::kExitValidation);
  CHECK(cli({"run", kBenchmark, "-q", "-o", dir, "--clock", "time-regulation", "--set", "horizon=1"}) ==
        etsim::kExitDivergence);
  CHECK(fs::exists(fs::path(dir) / "section6_time-regulation_1" / "manifest.cfg"));
}

TEST_CASE("check-gains reports the recipe blocker") {
  const auto dir = out_dir("gains");
  CHECK(cli({"check-gains", kBenchmark, "-q", "-o", dir}) == etsim::kExitOk);
  const auto j = nlohmann::json::parse(slurp(fs::path(dir) / "section6_gains" / "feasibility.json"));
  const auto& sub = j["recipe_continuous"]["subsystems"][0];
  bool found = false;
  for (const auto& b : sub["blockers"])
    if (b.get<std::string>().find("||Q||^2") != std::string::npos) found = true;
  CHECK(found);
  CHECK(j.contains("margins_triggered"));
  CHECK(cli({"check-gains", kBenchmark, "-q", "-o", dir, "--check"}) == etsim::kExitAssertion);
}

TEST_CASE("validate-bounds flags the local diffusion bound on a wide box") {
  const auto dir = out_dir("bounds");
  CHECK(cli({"validate-bounds", kBenchmark, "-q", "-o", dir, "--set", "bound_samples=5000", "--check"}) ==
        etsim::kExitOk);
  const auto j = nlohmann::json::parse(slurp(fs::path(dir) / "section6_bounds" / "bounds.json"));
  CHECK(j["pass"] == true);
  CHECK(j["diffusion"][1]["scope"] == "local");
  CHECK(cli({"validate-bounds", kBenchmark, "-q", "-o", dir, "--set", "bound_samples=5000", "--set",
             "bound_box=6", "--check"}) == etsim::kExitAssertion);
}

TEST_CASE("ensemble and compare outputs") {
  const auto dir = out_dir("ensemble");
  CHECK(cli({"ensemble", kBenchmark, "-q", "-o", dir, "--replicas", "3", "--set", "horizon=1"}) ==
        etsim::kExitOk);
  const fs::path e = fs::path(dir) / "section6_proposed_1";
  for (const char* f : {"ensemble.csv", "events.csv", "channels.csv", "summary.json", "manifest.cfg"})
    CHECK(fs::exists(e / f));

  CHECK(cli({"compare", kBenchmark, "-q", "-o", dir, "--replicas", "2", "--set", "horizon=1"}) ==
        etsim::kExitOk);
  const fs::path c = fs::path(dir) / "section6_compare_1";
  CHECK(fs::exists(c / "comparison.csv"));
  const auto j = nlohmann::json::parse(slurp(c / "comparison.json"));
  CHECK(j.contains("proposed"));
  CHECK(j.contains("time-regulation"));
  CHECK(cli({"compare", kBenchmark, "-q", "-o", dir, "--set", "mode=continuous"}) == etsim::kExitValidation);
}

}  // TEST_SUITE

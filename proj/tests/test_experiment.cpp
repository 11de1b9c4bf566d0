#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "higgsflow/experiment.hpp"

using namespace higgsflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("higgsflow_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  c.merge_text(is);
  return c;
}

}  // namespace

TEST_CASE("config text") {
  const auto c = config(
      "# nilpotent decay\n"
      "scenario = nilpotent-r2\n"
      "N = 16   # grid\n"
      "flow.kind = ymh\n"
      "flow.dt = 2e-3\n"
      "flow.samples = 0.5, 1.5\n"
      "flow.T = 2\n"
      "seed = 42\n");
  CHECK(c.scenario == "nilpotent-r2");
  CHECK(c.N == 16);
  CHECK(c.flow_kind == "ymh");
  CHECK(c.dt == 2e-3);
  CHECK(c.samples == std::vector<double>{0.5, 1.5});
  CHECK(c.seed == std::uint64_t{42});
  CHECK_NOTHROW(c.validate());
  CHECK(c.to_json()["flow.T"] == 2.0);

  CHECK_THROWS_AS(config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(config("flow.dt = fast\n"), ConfigError);
  CHECK_THROWS_AS(config("no equals sign\n"), ConfigError);
  try {
    config("scenario = random-valid\n").validate();
    FAIL("random scenario accepted without a seed");
  } catch (const ConfigError& e) {
    CHECK(e.key == "seed");
  }
  CHECK_THROWS_AS(config("scenario = nilpotent-r2\nN = 9\n").validate(), ConfigError);
  CHECK_THROWS_AS(config("scenario = nilpotent-r2\nstate = x.hstate\n").validate(), ConfigError);
  CHECK_THROWS_AS(config("state = /nonexistent/x.hstate\n").validate(), ConfigError);
  CHECK_THROWS_AS(config("scenario = t4-commuting\nn = 1\n").validate(), ConfigError);
  CHECK_THROWS_AS(config("scenario = nilpotent-r2\nflow.samples = 3\nflow.T = 1\n").validate(), ConfigError);
}

TEST_CASE("failures are structured") {
  const auto bad = run_command("run", config("scenario = nope\n"));
  CHECK(bad.exit_code == kExitConfigError);
  CHECK(bad.report["status"] == "error");
  CHECK(bad.report["reason"] == "config");
  CHECK(run_command("frobnicate", {}).exit_code == kExitConfigError);
  auto c = config("scenario = flat-trivial-r1\n");
  c.out_dir = scratch("nofiltration").string();
  const auto nf = run_command("verify-filtration", c);
  CHECK(nf.exit_code == kExitConfigError);
  CHECK(nf.report["message"].get<std::string>().find("filtration") != std::string::npos);
}

TEST_CASE("run") {
  SUBCASE("flat passes immediately") {
    auto c = config("scenario = flat-trivial-r2\nflow.T = 0.1\nflow.dt = 0.01\nN = 8\n");
    c.out_dir = scratch("flat").string();
    const auto r = run_command("run", c);
    CHECK(r.exit_code == kExitOk);
    CHECK(r.report["trace"]["final"]["ymh_energy"] == 0.0);
    for (const char* f : {"trace.csv", "summary.json", "certificate.json", "initial.hstate", "final.hstate"})
      CHECK(fs::exists(fs::path(c.out_dir) / f));
  }
  SUBCASE("nilpotent decay to T = 100") {
    auto c = config("scenario = nilpotent-r2\nN = 8\nflow.dt = 0.01\nflow.T = 100\n");
    c.out_dir = scratch("nil").string();
    const auto r = run_command("run", c);
    CHECK(r.exit_code == kExitOk);
    CHECK(r.report["certificate"]["achieved_epsilon"].get<double>() < 0.05);
    CHECK(r.report["e_sup_monotone_after_t1"] == true);

    // the saved state can be fed back in
    auto v = ExperimentConfig{};
    v.state_file = (fs::path(c.out_dir) / "final.hstate").string();
    v.out_dir = scratch("nil_validate").string();
    const auto vr = run_command("validate", v);
    CHECK(vr.exit_code == kExitOk);
    CHECK(vr.report["validity"]["valid"] == true);
  }
  SUBCASE("target failure") {
    auto c = config("scenario = nilpotent-r2\nN = 8\nflow.dt = 0.01\nflow.T = 1\n");
    c.out_dir = scratch("nil_short").string();
    const auto r = run_command("run", c);
    CHECK(r.exit_code == kExitTargetFailed);
    CHECK(r.report["status"] == "target_failed");
  }
}

TEST_CASE("identical configs give identical bytes") {
  std::string first;
  for (const char* tag : {"det_a", "det_b"}) {
    auto c = config("scenario = random-valid\nseed = 3\nN = 8\nflow.kind = ymh\nflow.dt = 0.005\nflow.T = 0.2\n");
    c.out_dir = scratch(tag).string();
    run_command("run", c);
    const std::string csv = slurp(fs::path(c.out_dir) / "trace.csv");
    CHECK(!csv.empty());
    if (first.empty())
      first = csv + slurp(fs::path(c.out_dir) / "certificate.json");
    else
      CHECK(first == csv + slurp(fs::path(c.out_dir) / "certificate.json"));
  }
}

TEST_CASE("extension verbs") {
  auto sw = config("scenario = extension-sweep\nN = 8\n");
  sw.out_dir = scratch("sweep").string();
  const auto s = run_command("sweep-rho", sw);
  CHECK(s.exit_code == kExitOk);
  CHECK(s.report["sweep"]["slope"].get<double>() == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(s.report["targets"].size() == 4);
  CHECK(fs::exists(fs::path(sw.out_dir) / "rho_sweep_plot.csv"));

  auto vf = config("scenario = chain-r3\nN = 8\nflow.kind = none\ntarget.epsilon = 1e-6\n");
  vf.out_dir = scratch("filtration").string();
  const auto f = run_command("verify-filtration", vf);
  CHECK(f.exit_code == kExitOk);
  CHECK(f.report["filtration"]["quotients"].size() == 3);
  CHECK(f.report["assembled"]["pass"] == true);

  auto eq = config("scenario = conformal-r1\nN = 32\nflow.dt = 1e-3\nflow.T = 0.1\n");
  eq.out_dir = scratch("equivalence").string();
  const auto e = run_command("flow-equivalence", eq);
  CHECK(e.exit_code == kExitOk);
  CHECK(e.report["equivalence"]["max_norm_residual"].get<double>() < 1e-3);
}

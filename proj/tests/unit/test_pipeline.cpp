#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "khess/pipeline.hpp"

using namespace khess;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("khess-unit-" + std::to_string(::getpid()) + "-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small critical-regime run: coarse grid, two eps, two r.
ExperimentConfig quick() {
  ExperimentConfig c = preset("ball-n2-k1");
  c.name = "quick";
  c.schedule.h = {0.025};
  return c;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(KHESS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("algebra check") {
    const AlgebraCheck a = algebra_check(1, 300);
    CHECK(a.samples == 300);
    CHECK(a.sk_error <= 1e-10);
    CHECK(a.jacobian_error <= 1e-6);
  }

  TEST_CASE("run writes the artifact tree and check re-verifies it") {
    const fs::path out = scratch("run");
    std::ostringstream log;
    REQUIRE(run_experiment(quick(), out, log) == kExitPass);

    for (const char* f : {"barriers.json", "estimates.json", "levels.csv", "monotonicity.csv", "inequality.json",
                          "summary.json", "config.json"})
      CHECK(fs::exists(out / f));
    int grids = 0;
    for (const auto& e : fs::directory_iterator(out))
      if (e.path().extension() == ".grid") ++grids;
    CHECK(grids == 4);
    CHECK(fs::exists(out / "solution-0.005-0.1.grid"));

    const nlohmann::json summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary["schema_version"] == kSchemaVersion);
    CHECK(summary["verdict"] == "pass");
    std::set<int> criteria;
    for (const auto& item : summary["items"]) {
      criteria.insert(item["criterion"].get<int>());
      CHECK(item.contains("value"));
      CHECK(item.contains("tolerance"));
      const std::string v = item["verdict"];
      CHECK((v == "pass" || v == "fail" || v == "not-applicable"));
      if (v == "not-applicable") CHECK_FALSE(item["reason"].get<std::string>().empty());
    }
    CHECK(criteria.size() == 11);
    CHECK(slurp(out / "levels.csv").rfind("# khess levels schema_version=1", 0) == 0);

    std::ostringstream check_log;
    CHECK(check_artifacts(out, check_log) == kExitPass);

    // Same config, fresh tree: identical summary bytes.
    const fs::path again = scratch("again");
    std::ostringstream log2;
    REQUIRE(run_experiment(quick(), again, log2) == kExitPass);
    CHECK(slurp(out / "summary.json") == slurp(again / "summary.json"));
    CHECK(slurp(out / "estimates.json") == slurp(again / "estimates.json"));

    // A tampered report fails the check.
    {
      std::ofstream f(again / "inequality.json", std::ios::app);
      f << " ";
    }
    std::ostringstream bad_log;
    CHECK(check_artifacts(again, bad_log) == kExitCheck);
    CHECK(bad_log.str().find("inequality.json") != std::string::npos);

    fs::remove_all(out);
    fs::remove_all(again);
  }

  TEST_CASE("validation and solve failures map to exit codes") {
    const fs::path out = scratch("fail");
    std::ostringstream log;
    ExperimentConfig c = quick();
    c.schedule.epsilon = {100.0};  // above eps1
    CHECK(run_experiment(c, out, log) == kExitValidation);
    CHECK(log.str().find("validate") != std::string::npos);

    c = quick();
    c.domain.r0 = 0.1;  // puncture r = 0.2 no longer below r0 / 2
    std::ostringstream log2;
    CHECK(run_experiment(c, out, log2) == kExitValidation);

    c = quick();
    c.solver.max_iters = 1;
    c.solver.newton_tol = 1e-14;
    std::ostringstream log3;
    CHECK(run_experiment(c, out, log3) == kExitSolve);
    CHECK(log3.str().find("solve") != std::string::npos);

    std::ostringstream log4;
    CHECK(check_artifacts(out / "missing", log4) == kExitValidation);
    fs::remove_all(out);
  }

  TEST_CASE("radial report") {
    const std::string csv = radial_report(3, 2, 1e-2, 0.2, 1.0, 0.1, 1.0, 41);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# khess radial schema_version=1", 0) == 0);
    std::getline(in, line);
    CHECK(line == "rho,phi,dphi,d2phi,residual");
    int rows = 0;
    while (std::getline(in, line)) {
      double v[5];
      char comma;
      std::istringstream ls(line);
      ls >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3] >> comma >> v[4];
      CHECK(std::abs(v[4]) <= 1e-10);
      ++rows;
    }
    CHECK(rows == 41);

    // eps = 0: phi'' of A rho^{1/2} + B.
    const double A = 0.9 / (1.0 - std::sqrt(0.2));
    std::istringstream zero(radial_report(3, 2, 0.0, 0.2, 1.0, 0.1, 1.0, 5));
    std::getline(zero, line);
    std::getline(zero, line);
    while (std::getline(zero, line)) {
      double v[5];
      char comma;
      std::istringstream ls(line);
      ls >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3] >> comma >> v[4];
      CHECK(v[3] == doctest::Approx(-0.25 * A * std::pow(v[0], -1.5)).epsilon(1e-10));
    }
  }

  TEST_CASE("command line") {
    const fs::path dir = scratch("cli");
    CHECK(cli("presets") == kExitPass);
    CHECK(cli("presets --show ball-n3-k2") == kExitPass);
    CHECK(cli("presets --show nope") == kExitValidation);
    CHECK(cli("frobnicate") == kExitValidation);

    nlohmann::json j = config_to_json(preset("ball-n3-k2"));
    j["problem"]["k"] = 1.5;
    std::ofstream(dir / "odd.json") << j.dump();
    CHECK(cli("run --config " + (dir / "odd.json").string() + " --out " + (dir / "odd").string()) == kExitValidation);

    j = config_to_json(quick());
    j["domian"] = {};
    std::ofstream(dir / "typo.json") << j.dump();
    CHECK(cli("run --config " + (dir / "typo.json").string()) == kExitValidation);

    std::ofstream(dir / "quick.json") << serialize_config(quick());
    const std::string run = "run --config " + (dir / "quick.json").string() + " --threads 2 --out ";
    REQUIRE(cli(run + (dir / "a").string()) == kExitPass);
    REQUIRE(cli(run + (dir / "b").string() + " --seed 1") == kExitPass);
    CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
    CHECK(cli("check --out " + (dir / "a").string()) == kExitPass);

    CHECK(cli("radial --n 3 --k 2 --epsilon 0.01 --out " + (dir / "radial.csv").string()) == kExitPass);
    CHECK(fs::file_size(dir / "radial.csv") > 0);
    fs::remove_all(dir);
  }
}

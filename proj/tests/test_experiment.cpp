// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qmibeam/experiment.hpp"

using namespace qmibeam;

namespace {

Scenario small_scenario() {
  Scenario sc;
  sc.geometry = {4, 0.5};
  sc.signal.density = {AngularDensity::Kind::Gaussian, 30.0, 4.0, std::nullopt};
  sc.signal.power_db = 0.0;
  sc.presumed_signal = {AngularDensity::Kind::Gaussian, 34.0, 6.0, std::nullopt};
  sc.interferers.push_back({{AngularDensity::Kind::Uniform, 10.0, 10.0, std::nullopt}, 20.0});
  sc.noise_power_db = 0.0;
  sc.grid_points = 400;
  return sc;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.id = "unit";
  cfg.mode = ExperimentConfig::Mode::SnrSweep;
  cfg.snr_grid_db = {0.0, 10.0};
  cfg.trials = 2;
  cfg.t_snapshots = 16;
  cfg.base_seed = 99;
  return cfg;
}

struct CliResult {
  int exit_code;
  std::string out;
};

CliResult run_cli(const std::string& args, const std::string& tag) {
  const std::string out_path = std::string("/tmp/qmibeam_cli_") + tag + ".out";
  const std::string cmd =
      std::string(QMIBEAM_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream f(out_path);
  std::stringstream ss;
  ss << f.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

std::string repo(const std::string& rel) { return std::string(QMIBEAM_REPO_DIR) + "/" + rel; }

}  // namespace

TEST_CASE("scale rules parse") {
  const ScaleRule a = ScaleRule::parse("0.1*norm(rhat)", "t");
  REQUIRE(a.evaluate(50.0, 7.0) == Catch::Approx(5.0));
  const ScaleRule b = ScaleRule::parse("0.3*norm(rshat)", "t");
  REQUIRE(b.evaluate(50.0, 7.0) == Catch::Approx(2.1));
  const ScaleRule c = ScaleRule::parse("2.5", "t");
  REQUIRE(c.evaluate(50.0, 7.0) == Catch::Approx(2.5));
  REQUIRE_THROWS_AS(ScaleRule::parse("0.1*norm(bogus)", "t"), ScenarioError);
  REQUIRE_THROWS_AS(ScaleRule::parse("x*norm(rhat)", "t"), ScenarioError);
}

TEST_CASE("experiment config parses") {
  std::stringstream in(
      "id = exp\nmode = snr_sweep\nscenario = world.cfg\nsnr_grid_db = -10, 0, 10\n"
      "trials = 5\nT = 25\ngamma_rule = 0.2*norm(rhat)\neps_rule = 1.5\n"
      "base_seed = 7\nmethods = algorithm1,optimal\n");
  const ExperimentConfig cfg = ExperimentConfig::parse(in, "cfg");
  REQUIRE(cfg.id == "exp");
  REQUIRE(cfg.snr_grid_db == std::vector<double>{-10.0, 0.0, 10.0});
  REQUIRE(cfg.trials == 5);
  REQUIRE(cfg.t_snapshots == 25);
  REQUIRE(cfg.use_algorithm1);
  REQUIRE_FALSE(cfg.use_plugin);
  REQUIRE(cfg.use_optimal);
  REQUIRE(cfg.gamma_rule.coef == Catch::Approx(0.2));
  REQUIRE(cfg.eps_rule.ref == ScaleRule::Ref::Const);

  std::stringstream bad("mode = warp\nscenario = s\nsnr_grid_db = 1\n");
  REQUIRE_THROWS_AS(ExperimentConfig::parse(bad, "cfg"), ScenarioError);
}

TEST_CASE("experiment records are deterministic and method-independent") {
  const Scenario sc = small_scenario();
  ExperimentConfig cfg = small_config();

  std::stringstream a, b;
  write_csv(run_experiment_records(cfg, sc), a);
  write_csv(run_experiment_records(cfg, sc), b);
  REQUIRE(a.str() == b.str());

  // plugin rows must not depend on which other methods run
  ExperimentConfig only_plugin = cfg;
  only_plugin.use_algorithm1 = only_plugin.use_optimal = false;
  const auto full = run_experiment_records(cfg, sc);
  const auto solo = run_experiment_records(only_plugin, sc);
  size_t k = 0;
  for (const ResultRecord& rec : full) {
    if (rec.method != "plugin") continue;
    REQUIRE(k < solo.size());
    REQUIRE(rec.csv(false) == solo[k].csv(false));
    ++k;
  }
  REQUIRE(k == solo.size());
}

TEST_CASE("summary means recompute from the rows") {
  const Scenario sc = small_scenario();
  const auto records = run_experiment_records(small_config(), sc);
  std::stringstream out;
  write_csv(records, out);

  // recompute the algorithm1 mean at the first grid point in row order
  double sum = 0.0;
  int count = 0;
  for (const ResultRecord& rec : records) {
    if (rec.method == "algorithm1" && rec.grid_value == 0.0) {
      sum += rec.output_sinr_db;
      ++count;
    }
  }
  const std::string needle = "# unit,snr_db,0,algorithm1," + detail::fmt_num(sum / count);
  REQUIRE(out.str().find(needle) != std::string::npos);
}

TEST_CASE("timing column only appears on request") {
  const Scenario sc = small_scenario();
  const auto records = run_experiment_records(small_config(), sc);
  std::stringstream plain, timed;
  write_csv(records, plain, false);
  write_csv(records, timed, true);
  REQUIRE(plain.str().find("wall_time_ms") == std::string::npos);
  REQUIRE(timed.str().find("wall_time_ms") != std::string::npos);
}

TEST_CASE("cli solve on the scalar fixture") {
  const auto res = run_cli("solve --rhat " + repo("tests/data/rhat_scalar.txt") +
                               " --rshat " + repo("tests/data/rshat_scalar.txt") +
                               " --gamma 0.5 --eps 1",
                           "scalar");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("achieved value:   2") != std::string::npos);
  REQUIRE(res.out.find("rank of W: 1") != std::string::npos);
}

TEST_CASE("cli solve with a vanishing ball matches the pencil optimum") {
  const auto res = run_cli("solve --rhat " + repo("tests/data/rhat_scalar.txt") +
                               " --rshat " + repo("tests/data/rshat_scalar.txt") +
                               " --gamma 0.5 --eps 1e-8",
                           "pencil");
  REQUIRE(res.exit_code == 0);
  // lambda_max((rhat+gamma)^{-1} rshat) = 3 / 1
  REQUIRE(res.out.find("achieved value:   3") != std::string::npos);
}

TEST_CASE("cli rejects malformed matrix files") {
  const auto res = run_cli("solve --rhat " + repo("tests/data/malformed.txt") + " --rshat " +
                               repo("tests/data/rshat_scalar.txt") + " --gamma 0.5 --eps 1",
                           "malformed");
  REQUIRE(res.exit_code == 2);
  REQUIRE(res.out.find("error") != std::string::npos);
}

TEST_CASE("cli solve then certify round trip") {
  const auto solve_res = run_cli("solve --rhat " + repo("tests/data/rhat_scalar.txt") +
                                     " --rshat " + repo("tests/data/rshat_scalar.txt") +
                                     " --gamma 0.5 --eps 1 --out /tmp/qmibeam_sol.json",
                                 "solveout");
  REQUIRE(solve_res.exit_code == 0);
  const auto cert_res = run_cli("certify --solution /tmp/qmibeam_sol.json", "certify");
  REQUIRE(cert_res.exit_code == 0);
  REQUIRE(cert_res.out.find("CERTIFY PASS") != std::string::npos);
}

#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "splap/experiments.hpp"

using namespace splap;
namespace fs = std::filesystem;

TEST_CASE("config parses flat key=value text") {
  const auto cfg = ExperimentConfig::parse(
      "# comment\n"
      "experiment = stationary\n"
      "dim = 2\n"
      "n = 41   # trailing\n"
      "p = 3\n"
      "delta = 1.5\n"
      "reaction.kind = saturating\n"
      "reaction.params = 2\n"
      "grids = 51, 101\n");
  CHECK(cfg.kind == ExperimentKind::stationary);
  CHECK(cfg.dim == 2);
  CHECK(cfg.n == 41);
  CHECK(cfg.p == 3.0);
  CHECK(cfg.delta == 1.5);
  CHECK(cfg.reaction_kind == "saturating");
  CHECK(cfg.grids == std::vector<std::size_t>{51, 101});
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.params().reaction.value(0.0) == doctest::Approx(2.0));

  const auto back = ExperimentConfig::parse("experiment = stationary\n");
  CHECK(back.to_json()["experiment"] == "stationary");
}

TEST_CASE("config rejects bad input") {
  CHECK_THROWS_AS(ExperimentConfig::parse("bogus = 1\n"), InvalidArgument);
  CHECK_THROWS_AS(ExperimentConfig::parse("n\n"), InvalidArgument);
  CHECK_THROWS_AS(ExperimentConfig::parse("experiment = nope\n"), InvalidArgument);
  auto cfg = ExperimentConfig::parse("p = 1\n");
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = ExperimentConfig::parse("dim = 3\n");
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("fit_slope recovers a line") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> y{1.0, -1.0, -3.0, -5.0};
  CHECK(fit_slope(x, y) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(fit_slope({1.0}, {1.0}), InvalidArgument);
}

TEST_CASE("eigen run writes report and series") {
  auto cfg = ExperimentConfig::parse("experiment = eigen\nn = 201\np = 2\n");
  cfg.out = (fs::temp_directory_path() / "splap_test_eigen").string();
  fs::remove_all(cfg.out);
  const RunReport r = run_experiment(cfg);
  CHECK(r.pass());
  CHECK(fs::exists(fs::path(cfg.out) / "phi1.csv"));
  std::ifstream is(fs::path(cfg.out) / "report.json");
  const auto j = nlohmann::json::parse(is);
  CHECK(j["metrics"]["rel_error"].get<double>() < 1e-3);
  CHECK(j["config"]["experiment"] == "eigen");
}

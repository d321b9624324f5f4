#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hsb/errors.hpp"
#include "hsb/expert_oracle.hpp"
#include "hsb/experiment.hpp"
#include "hsb/hsb_learner.hpp"

using namespace hsb;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hsb_unit_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string config_error(const nlohmann::json& doc) {
  try {
    config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

nlohmann::json base_config() {
  return nlohmann::json::parse(R"({
    "environment": {"model": "switched", "switch_fraction": 0.5},
    "horizon": 40,
    "seeds": [3, 4],
    "presentations": 2,
    "algorithms": [
      {"name": "hsb-bt", "depth": 3, "eta": "auto", "regions": 3},
      {"name": "sexp3", "depth": 3},
      {"name": "exp3", "label": "plain"}
    ],
    "curve_stride": 7
  })");
}

}  // namespace

TEST_CASE("config round-trips through JSON") {
  const auto c = config_from_json(base_config());
  CHECK(c.model == "switched");
  CHECK(c.switch_fraction == 0.5);
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
  REQUIRE(c.algorithms.size() == 3);
  CHECK(c.algorithms[0].eta_auto);
  CHECK(c.algorithms[0].display_label() == "hsb-bt-d3");
  CHECK(c.algorithms[2].display_label() == "plain");
  const auto again = config_from_json(config_to_json(c));
  CHECK(config_to_json(again) == config_to_json(c));
}

TEST_CASE("config errors name the field") {
  auto doc = base_config();
  doc["algorithms"][1]["eta"] = "auto";
  CHECK(config_error(doc).find("algorithms[1].eta") != std::string::npos);

  doc = base_config();
  doc["horizon"] = "long";
  CHECK(config_error(doc).find("horizon") != std::string::npos);

  doc = base_config();
  doc["colour"] = 1;
  CHECK(config_error(doc).find("colour") != std::string::npos);

  doc = base_config();
  doc["algorithms"][0]["name"] = "ucb";
  CHECK(config_error(doc).find("algorithms[0]") != std::string::npos);

  doc = base_config();
  doc["algorithms"][2]["label"] = "sexp3-d3";
  CHECK_THROWS_AS(config_from_json(doc), ConfigError);  // duplicate label

  doc = base_config();
  doc["environment"]["model"] = "drifting";
  CHECK(config_error(doc).find("environment.model") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/hsb.json"), IoError);
}

TEST_CASE("factory: flat mixture over all mappings") {
  AlgorithmSpec spec;
  spec.name = "exp4-flat";
  spec.cells = 4;
  PolicyFactory f(spec, 1, 2, 100);
  auto bundle = f.make();
  auto* flat = dynamic_cast<FlatMixture*>(bundle.policy.get());
  REQUIRE(flat != nullptr);
  CHECK(flat->experts().experts.size() == 16);
  CHECK(bundle.eta == doctest::Approx(std::sqrt(2 * 4 * std::log(2.0) / (2 * 100))));
  spec.cells = 64;
  CHECK_THROWS_AS(PolicyFactory(spec, 1, 2, 100), ConfigError);
}

TEST_CASE("factory: structures and rates") {
  AlgorithmSpec bt;
  bt.name = "hsb-bt";
  bt.depth = 5;
  PolicyFactory f(bt, 1, 3, 1000);
  REQUIRE(f.is_hsb());
  CHECK(f.structure()->grid().total_cells() == 32);
  CHECK(f.a_r() == f.structure()->params().a_r(32, 3));
  CHECK(f.eta() == structure_eta(*f.structure(), 3, 1000, 2));

  AlgorithmSpec kary;
  kary.name = "hsb-kary";
  kary.k = 3;
  kary.depth = 2;
  PolicyFactory g(kary, 1, 2, 10);
  CHECK(g.structure()->grid().total_cells() == 9);
  CHECK_THROWS_AS(PolicyFactory(kary, 2, 2, 10), ConfigError);
}

TEST_CASE("synthetic run writes records, curves and summaries") {
  auto c = config_from_json(base_config());
  c.horizon = 10;
  c.seeds = {5};
  c.presentations = 1;
  c.write_rounds = true;
  c.curve_stride = 4;
  c.output_dir = scratch("synthetic").string();
  const auto result = run_synthetic(c);
  REQUIRE(result.algorithms.size() == 3);
  CHECK(result.algorithms[0].bound.has_value());
  CHECK_FALSE(result.algorithms[2].bound.has_value());

  const fs::path out = c.output_dir;
  const auto rounds = slurp(out / "rounds" / "hsb-bt-d3_s5_p0.csv");
  std::istringstream in(rounds);
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  CHECK(line == "t,cell,arm,loss,p_1,p_2,p_3");
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 10);

  // Rows at t = 4, 8 and the final round.
  const auto curves = slurp(out / "curves.csv");
  CHECK(curves.rfind("t,hsb-bt-d3,sexp3-d3,plain\n", 0) == 0);
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 4);
  CHECK(fs::exists(out / "regret.csv"));
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["command"] == "run-synthetic");
}

TEST_CASE("synthetic output is byte-identical across runs and thread counts") {
  auto c = config_from_json(base_config());
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  c.output_dir = a.string();
  run_synthetic(c);
  c.output_dir = b.string();
  c.threads = 3;
  run_synthetic(c);
  for (const char* f : {"curves.csv", "regret.csv"}) {
    CAPTURE(f);
    const auto bytes = slurp(a / f);
    CHECK(!bytes.empty());
    CHECK(bytes == slurp(b / f));
  }
}

TEST_CASE("replay and ECOC inputs") {
  auto c = config_from_json(base_config());
  c.arms = 3;
  c.output_dir = scratch("replay").string();
  CHECK_THROWS_AS(run_replay(c, "/nonexistent/log.csv"), IoError);
  CHECK_THROWS_AS(run_ecoc(c, "/nonexistent/data.csv"), IoError);

  const auto log_path = fs::path(c.output_dir) / "log.csv";
  fs::create_directories(c.output_dir);
  std::ofstream(log_path) << "s_1,displayed_arm,clicked\n0.5,0,1\n0.25,5,0\n";
  CHECK_THROWS_AS(run_replay(c, log_path), ParseError);

  std::ofstream(log_path) << "s_1,displayed_arm,clicked\n0.5,0,1\n0.25,2,0\n";
  const auto rows = run_replay(c, log_path);
  CHECK(rows.size() == c.algorithms.size() * c.seeds.size());
  for (const auto& r : rows) CHECK(r.matched <= 2);
}

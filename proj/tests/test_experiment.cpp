#include <doctest.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kanol/experiment.hpp"

using namespace kanol;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(KANOL_SOURCE_DIR) / "configs";
const fs::path kFixture = fs::path(KANOL_TEST_DATA) / "digits_fixture.csv";

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("kanol_exp_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// CSV fields; double quotes group a field and are dropped.
std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (const char c : s) {
    if (c == '"') quoted = !quoted;
    else if (c == ',' && !quoted) out.emplace_back();
    else out.back() += c;
  }
  return out;
}

ExperimentConfig load(const std::string& name, const fs::path& dir,
                      std::vector<std::string> sets = {}) {
  Json doc = read_config_file(kConfigs / (name + ".json"));
  set_path(doc, "output.dir", dir.string());
  for (const auto& s : sets) apply_override(doc, s);
  return parse_config(doc);
}

}  // namespace

TEST_CASE("a run writes its step log and snapshot") {
  const auto dir = scratch("run");
  const auto cfg = load("table1_regression_kan", dir);
  const auto art = run_experiment(cfg);
  CHECK(art.files.size() == 2);
  const auto rows = lines(dir / "table1_regression_kan.csv");
  REQUIRE(rows.size() == 1501);
  CHECK(rows[0] == kStepCsvHeader);
  CHECK(split(rows[1]).size() == 6);
  CHECK(split(rows[1])[0] == "0");
  CHECK(split(rows[1500])[0] == "1499");
  CHECK(art.log.meta.run_id == "table1_regression_kan");
  CHECK(art.log.meta.config_hash == config_hash(cfg));
  CHECK(fs::exists(dir / "table1_regression_kan.config.json"));
}

TEST_CASE("re-running the snapshot reproduces the step log byte for byte") {
  const auto dir = scratch("snap_a");
  const auto cfg = load("table1_qubit_mlp_p", dir, {"trainer.steps=1500"});
  run_experiment(cfg);
  Json snap = read_config_file(dir / "table1_qubit_mlp_p.config.json");
  const auto dir2 = scratch("snap_b");
  set_path(snap, "output.dir", dir2.string());
  run_experiment(parse_config(snap));
  CHECK(slurp(dir / "table1_qubit_mlp_p.csv") == slurp(dir2 / "table1_qubit_mlp_p.csv"));
}

TEST_CASE("write_files false stays off the disk") {
  const auto dir = scratch("dry");
  const auto art = run_experiment(load("table1_regression_mlp_p", dir), false);
  CHECK(art.files.empty());
  CHECK_FALSE(fs::exists(dir));
  CHECK(art.log.steps.size() == 1500);
}

TEST_CASE("boundary grids") {
  const auto dir = scratch("grid");
  const auto cfg = load("table1_qubit_kan", dir,
                        {"trainer.steps=300", "output.boundary={\"resolution\": 11, \"at\": [100]}"});
  CHECK(cfg.output.boundary->lo == -4.0);
  run_experiment(cfg);
  for (const char* t : {"100", "300"}) {
    const auto rows = lines(dir / ("table1_qubit_kan.boundary_t" + std::string(t) + ".csv"));
    REQUIRE(rows.size() == 1 + 11 * 11);
    CHECK(rows[0] == kBoundaryCsvHeader);
    const auto first = split(rows[1]);
    const auto second = split(rows[2]);
    const auto last = split(rows[121]);
    CHECK(first[0] == "-4");
    CHECK(first[1] == "-4");
    CHECK(second[0] == "-3.2");  // x0 varies fastest
    CHECK(second[1] == "-4");
    CHECK(last[0] == "4");
    CHECK(last[1] == "4");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto f = split(rows[i]);
      REQUIRE(f.size() == 4);
      REQUIRE((f[3] == "1" || f[3] == "-1"));
      REQUIRE(classify_binary(std::stod(f[2])) == std::stoi(f[3]));
    }
  }
  // the two snapshots come from different parameters
  CHECK(slurp(dir / "table1_qubit_kan.boundary_t100.csv") !=
        slurp(dir / "table1_qubit_kan.boundary_t300.csv"));

  auto one_input = load("table1_regression_kan", dir, {"output.boundary={}"});
  CHECK_THROWS_AS(run_experiment(one_input), ConfigError);
}

TEST_CASE("summary rows") {
  const auto dir = scratch("summary");
  auto row_of = [&](const ExperimentConfig& cfg) {
    const auto art = run_experiment(cfg, false);
    std::ostringstream out;
    write_summary_row(out, cfg, art.log);
    std::string s = out.str();
    CHECK(s.back() == '\n');
    s.pop_back();
    return split(s);
  };
  CHECK(split(kSummaryCsvHeader).size() == 13);

  const auto kan = row_of(load("table1_regression_kan", dir));
  REQUIRE(kan.size() == 13);
  CHECK(kan[0] == "table1_regression_kan");
  CHECK(kan[1] == "kan[1,1]");
  CHECK(kan[2] == "13");
  CHECK(kan[3] == "10");
  CHECK(kan[4] == "3");
  CHECK(kan[5] == "6");
  CHECK(kan[6] == "2");
  CHECK(kan[7] == "0.5");
  CHECK(kan[10].empty());  // no accuracy for regression
  CHECK(kan[11] == "4500");
  CHECK(kan[12] == "4500");

  const auto mlp = row_of(load("table1_qubit_mlp_p", dir, {"trainer.steps=200"}));
  REQUIRE(mlp.size() == 13);
  CHECK(mlp[3].empty());
  CHECK(mlp[4].empty());
  CHECK(mlp[5] == "10");
  CHECK(mlp[6] == "3");
  CHECK_FALSE(mlp[10].empty());
  CHECK(mlp[12] == std::to_string(200 * (2 * 20 + 20 * 8 + 8 * 5 + 5)));

  const auto flt = row_of(load("table1_regression_kan", dir, {"model.format=\"float\""}));
  CHECK(flt[5].empty());
  CHECK(flt[6].empty());
}

TEST_CASE("sweeps write one summary per output directory") {
  const auto dir = scratch("sweep");
  Json doc = read_config_file(kConfigs / "sweep_bitwidth_kan.json");
  set_path(doc, "output.dir", dir.string());
  set_path(doc, "sweep.axes", Json{{"model.format", {"6,2", "12,2"}}, {"seed", {1, 2, 3}}});
  const auto cells = expand_sweep(doc);
  const auto logs = run_sweep(cells, 2);
  REQUIRE(logs.size() == 6);
  const auto rows = lines(dir / "summary.csv");
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == kSummaryCsvHeader);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto f = split(rows[i + 1]);
    CHECK(f[0] == cells[i].name);
    CHECK(std::stod(f[9]) == doctest::Approx(logs[i].final_regret()).epsilon(1e-9));
  }
  // step_csv is off in this config
  CHECK_FALSE(fs::exists(dir / (cells[0].name + ".csv")));
}

TEST_CASE("digits runs from a file and freezes after the stationary epochs") {
  const auto dir = scratch("digits");
  const auto cfg = load("digits_frozen", dir, {"stream.path=" + kFixture.string()});
  const auto art = run_experiment(cfg, false);
  REQUIRE(art.log.steps.size() == 500);
  CHECK(art.log.ops.update_mults == 100u * 64 * 10 * 3);
  CHECK(art.log.final_accuracy().has_value());

  const auto online = run_experiment(load("digits_online", dir, {"stream.path=" + kFixture.string()}), false);
  CHECK(online.log.ops.update_mults == 500u * 64 * 10 * 3);

  const auto missing = load("digits_online", dir, {"stream.path=/nonexistent/optdigits.csv"});
  CHECK_THROWS_AS(run_experiment(missing, false), ConfigError);
}

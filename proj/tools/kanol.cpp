// kanol: run experiments and sweeps from JSON configs, verify the engine's
// properties, and fetch the digits dataset.
//
// Exit codes: 0 success, 1 runtime failure, 2 bad command line or config.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kanol/config.hpp"
#include "kanol/experiment.hpp"
#include "kanol/verify.hpp"

namespace fs = std::filesystem;
using namespace kanol;

namespace {

constexpr int kRuntimeError = 1;
constexpr int kConfigError = 2;

Json load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  Json doc = read_config_file(path);
  for (const auto& s : sets) apply_override(doc, s);
  return doc;
}

void print_result(const RunLog& log) {
  std::printf("%s  %s  N=%zu  steps=%zu  final_regret=%.6g", log.meta.run_id.c_str(),
              log.meta.model.c_str(), log.meta.param_count, log.steps.size(), log.final_regret());
  if (const auto acc = log.final_accuracy()) std::printf("  final_acc=%.4f", *acc);
  std::printf("\n");
}

int cmd_run(const std::string& path, const std::vector<std::string>& sets, bool boundary) {
  Json doc = load_with_overrides(path, sets);
  if (boundary && !(doc.contains("output") && doc["output"].contains("boundary"))) {
    set_path(doc, "output.boundary", Json::object());
  }
  ExperimentConfig cfg = parse_config(doc);
  if (cfg.sweep) throw ConfigError("config has a sweep block; use `kanol sweep`");
  const RunArtifacts art = run_experiment(cfg);

  // Several runs may share an output dir: replace this run's row, keep the rest.
  const fs::path summary_path = fs::path(cfg.output.dir) / "summary.csv";
  std::vector<std::string> rows;
  if (std::ifstream in(summary_path); in) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.rfind(cfg.name + ",", 0) != 0) rows.push_back(line);
    }
  }
  std::ofstream summary(summary_path, std::ios::binary);
  summary << kSummaryCsvHeader << '\n';
  for (const auto& r : rows) summary << r << '\n';
  write_summary_row(summary, cfg, art.log);
  print_result(art.log);
  std::printf("wrote %s\n", cfg.output.dir.c_str());
  return 0;
}

int cmd_sweep(const std::string& path, const std::vector<std::string>& sets, int jobs) {
  const auto cells = expand_sweep(load_with_overrides(path, sets));
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::printf("%zu runs on %d worker(s)\n", cells.size(), jobs);
  const auto logs = run_sweep(cells, jobs);
  for (const auto& log : logs) print_result(log);
  std::printf("wrote %s/summary.csv\n", cells.front().output.dir.c_str());
  return 0;
}

int cmd_verify(std::uint64_t seed) {
  VerifyOptions opt;
  opt.seed = seed;
  const auto results = run_verify_suite(opt);
  print_check_table(std::cout, results);
  for (const auto& r : results) {
    if (!r.pass) return kRuntimeError;
  }
  return 0;
}

// Counts rows and checks every row has 65 integer fields.
bool validate_digits(const fs::path& path, std::string& why) {
  try {
    const auto data = DigitsDataset::load(path);
    if (data.size() != 5620) {
      why = "expected 5620 rows, found " + std::to_string(data.size());
      return false;
    }
    return true;
  } catch (const std::exception& e) {
    why = e.what();
    return false;
  }
}

int cmd_fetch_digits(const std::string& dest, const std::string& base_url) {
  const fs::path out = dest.empty() ? resolve_digits_path("") : fs::path(dest);
  std::string why;
  if (fs::exists(out) && validate_digits(out, why)) {
    std::printf("%s already present and valid (5620 x 65)\n", out.string().c_str());
    return 0;
  }
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  const fs::path tmp = out.string() + ".part";
  std::remove(tmp.string().c_str());
  bool fetched = true;
  for (const char* part : {"optdigits.tra", "optdigits.tes"}) {
    const std::string cmd = "curl -fsSL --max-time 60 '" + base_url + "/" + part + "' >> '" +
                            tmp.string() + "'";
    if (std::system(cmd.c_str()) != 0) {
      fetched = false;
      break;
    }
  }
  if (!fetched) {
    std::remove(tmp.string().c_str());
    std::fprintf(stderr,
                 "download failed. Fetch optdigits.tra and optdigits.tes from\n"
                 "  %s/\n"
                 "and concatenate them:\n"
                 "  cat optdigits.tra optdigits.tes > %s\n"
                 "(or point KANOL_DATA_DIR at a directory holding optdigits.csv)\n",
                 base_url.c_str(), out.string().c_str());
    return kRuntimeError;
  }
  if (!validate_digits(tmp, why)) {
    std::fprintf(stderr, "downloaded file is invalid: %s\n", why.c_str());
    std::remove(tmp.string().c_str());
    return kRuntimeError;
  }
  fs::rename(tmp, out);
  std::printf("wrote %s (5620 x 65)\n", out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-point online training engine for KANs and MLPs"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> sets;
  bool boundary = false;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  run->add_option("--set", sets, "Override a key, e.g. --set model.grid_size=20")->take_all();
  run->add_flag("--boundary", boundary, "Also dump decision-boundary grid predictions");

  int jobs = 0;
  auto* sweep = app.add_subcommand("sweep", "Expand the sweep block and run every cell");
  sweep->add_option("config", config, "Sweep config (JSON)")->required();
  sweep->add_option("--set", sets, "Override a key before expansion")->take_all();
  sweep->add_option("-j,--jobs", jobs, "Parallel runs (default: hardware threads)");

  std::uint64_t seed = VerifyOptions{}.seed;
  auto* verify = app.add_subcommand("verify", "Run the property suite");
  verify->add_option("--seed", seed, "Seed for the randomized checks");

  std::string dest;
  std::string url = "https://archive.ics.uci.edu/ml/machine-learning-databases/optdigits";
  auto* fetch = app.add_subcommand("fetch-digits", "Download and validate the UCI digits file");
  fetch->add_option("--dest", dest, "Output path (default: $KANOL_DATA_DIR/optdigits.csv or data/optdigits.csv)");
  fetch->add_option("--url", url, "Base URL holding optdigits.tra and optdigits.tes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, sets, boundary);
    if (*sweep) return cmd_sweep(config, sets, jobs);
    if (*verify) return cmd_verify(seed);
    if (*fetch) return cmd_fetch_digits(dest, url);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kConfigError;
}

#pragma once

// Fully-online (prequential) training loop, metrics and the update-cost model.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kanol/model.hpp"
#include "kanol/ops.hpp"
#include "kanol/streams.hpp"

namespace kanol {

struct StepRecord {
  std::size_t t = 0;
  double loss = 0.0;
  double cum_regret = 0.0;
  double prediction = 0.0;
  std::optional<bool> correct;
  std::optional<double> running_accuracy;
};

struct RunMetadata {
  std::string run_id;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string model;
  std::size_t param_count = 0;
};

struct RunLog {
  RunMetadata meta;
  std::vector<StepRecord> steps;
  OpCounter ops;

  double final_regret() const noexcept { return steps.empty() ? 0.0 : steps.back().cum_regret; }
  std::optional<double> final_accuracy() const noexcept {
    return steps.empty() ? std::nullopt : steps.back().running_accuracy;
  }
};

struct RunOptions {
  std::size_t steps = 0;
  double lr = 0.0;
  LossKind loss = LossKind::squared_error;
  // Running-accuracy window; 0 means the cumulative mean.
  std::size_t window = 0;
  // Parameters stop changing from this step on (frozen baseline).
  std::optional<std::size_t> freeze_after;
  // Called before step t is processed.
  std::function<void(std::size_t t, Model& model)> before_step;
};

inline constexpr const char* kStepCsvHeader = "t,loss,cum_regret,pred,correct,run_acc";

// One predict/reveal/update cycle per sample, no replay. The prediction is
// recorded before the target is used. Rows are streamed to `csv` if given.
// Throws std::invalid_argument on dimension mismatch or a stream shorter than
// opts.steps, std::runtime_error if the stream runs dry mid-run.
RunLog run_online(Model& model, Stream& stream, const RunOptions& opts,
                  std::ostream* csv = nullptr);

void write_step_row(std::ostream& out, const StepRecord& r);

// window == 0: cumulative mean; otherwise mean over the last `window` flags
// (fewer during warm-up).
std::vector<double> running_accuracy(std::span<const bool> correct, std::size_t window);

struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

// update_mults(KAN) / update_mults(MLP) over the probe inputs, reduced. Both
// models are copied and left untouched. Throws std::invalid_argument unless the
// first is a KAN, the second an MLP, and their param counts match.
Ratio update_cost_ratio(const Model& kan, const Model& mlp,
                        std::span<const std::vector<double>> probes);

// Runs independent jobs on up to `parallelism` threads; results keep job order.
std::vector<RunLog> run_parallel(const std::vector<std::function<RunLog()>>& jobs,
                                 int parallelism);

}  // namespace kanol

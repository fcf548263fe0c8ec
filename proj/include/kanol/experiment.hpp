#pragma once

// Turns validated configs into runs and on-disk outputs.
//
// Layout under output.dir:
//   <run_id>.csv                 per-step log (t,loss,cum_regret,pred,correct,run_acc)
//   <run_id>.config.json         resolved config snapshot
//   <run_id>.boundary_t<T>.csv   grid predictions (x0,x1,y_hat,label), if requested
//   summary.csv                  one row per run

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "kanol/config.hpp"
#include "kanol/model.hpp"
#include "kanol/streams.hpp"
#include "kanol/trainer.hpp"

namespace kanol {

inline constexpr const char* kSummaryCsvHeader =
    "run_id,model,N,G,s,W,I,lr,seed,final_regret,final_acc,fwd_ops,upd_ops";
inline constexpr const char* kBoundaryCsvHeader = "x0,x1,y_hat,label";

std::unique_ptr<Stream> make_stream(const ExperimentConfig& cfg);
Model make_model(const ExperimentConfig& cfg);

// Number of steps a config will run (trainer.steps or the stream length).
std::size_t resolved_steps(const ExperimentConfig& cfg, const Stream& stream);

struct RunArtifacts {
  RunLog log;
  std::vector<std::filesystem::path> files;
};

// Runs one experiment. When `write_files` is false nothing touches the disk.
// Throws ConfigError for problems only detectable at run time (a missing
// digits file, too few samples), std::runtime_error for I/O failures.
RunArtifacts run_experiment(const ExperimentConfig& cfg, bool write_files = true);

// Predictions of a 2-input model on a resolution x resolution grid over
// [lo, hi]^2, row-major in x1 then x0. The model is copied.
void write_boundary_grid(const Model& model, const BoundaryBlock& grid, std::ostream& out);

void write_summary_row(std::ostream& out, const ExperimentConfig& cfg, const RunLog& log);

// Runs every cell on up to `jobs` threads and writes summary.csv into each
// distinct output dir (cells keep their order). Returns the logs.
std::vector<RunLog> run_sweep(const std::vector<ExperimentConfig>& cells, int jobs,
                              bool write_files = true);

}  // namespace kanol

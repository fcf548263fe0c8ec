#include "kanol/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>

namespace kanol {

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Each digits file is parsed once per process.
std::shared_ptr<const DigitsDataset> load_digits(const std::filesystem::path& path) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const DigitsDataset>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[std::filesystem::absolute(path).string()];
  if (!slot) {
    if (!std::filesystem::exists(path)) {
      throw ConfigError("digits file '" + path.string() +
                        "' not found; run `kanol fetch-digits` or set KANOL_DATA_DIR");
    }
    slot = std::make_shared<const DigitsDataset>(DigitsDataset::load(path));
  }
  return slot;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace

std::unique_ptr<Stream> make_stream(const ExperimentConfig& cfg) {
  const std::uint64_t seed = cfg.stream_seed();
  switch (cfg.stream.kind) {
    case StreamKind::regression:
      return std::make_unique<RegressionStream>(seed);
    case StreamKind::rotating_xor: {
      XorStreamConfig x = cfg.stream.xor_params;
      x.seed = seed;
      return std::make_unique<RotatingXorStream>(x);
    }
    case StreamKind::digits: {
      DigitsStreamConfig d = cfg.stream.digits;
      d.seed = seed;
      return std::make_unique<DigitsStream>(load_digits(resolve_digits_path(d.path)), d);
    }
  }
  throw std::logic_error("unhandled stream kind");
}

Model make_model(const ExperimentConfig& cfg) {
  const auto& m = cfg.model;
  return m.type == ModelKind::kan ? Model::kan(m.kan, m.numerics(), cfg.init_seed())
                                  : Model::mlp(m.mlp, m.numerics(), cfg.init_seed());
}

std::size_t resolved_steps(const ExperimentConfig& cfg, const Stream& stream) {
  if (cfg.trainer.steps) return *cfg.trainer.steps;
  if (const auto len = stream.length()) return *len;
  throw ConfigError("trainer.steps: required for an unbounded stream");
}

void write_boundary_grid(const Model& model, const BoundaryBlock& grid, std::ostream& out) {
  if (model.dims().front() != 2) throw std::invalid_argument("boundary grids need a 2-input model");
  Model probe = model;
  out << kBoundaryCsvHeader << '\n';
  const int n = grid.resolution;
  for (int r = 0; r < n; ++r) {
    const double x1 = grid.lo + (grid.hi - grid.lo) * r / (n - 1);
    for (int c = 0; c < n; ++c) {
      const double x0 = grid.lo + (grid.hi - grid.lo) * c / (n - 1);
      const double in[2] = {probe.numerics().quantize(x0, Role::input),
                            probe.numerics().quantize(x1, Role::input)};
      const auto y = probe.predict(in);
      const int label = y.size() == 1 ? classify_binary(y[0]) : classify_multiclass(y);
      out << fmt_g(x0) << ',' << fmt_g(x1) << ',' << fmt_g(y[0]) << ',' << label << '\n';
    }
  }
}

void write_summary_row(std::ostream& out, const ExperimentConfig& cfg, const RunLog& log) {
  const auto& m = cfg.model;
  // the descriptor contains commas ("kan[2,7,1]"), so it is quoted
  out << log.meta.run_id << ",\"" << log.meta.model << "\"," << log.meta.param_count << ',';
  if (m.type == ModelKind::kan) out << m.kan.grid_size << ',' << m.kan.spline_order + 1;
  else out << ',';
  out << ',';
  if (m.weight_format != "float") {
    const auto f = FixedFormat::parse(m.weight_format);
    out << f.total_bits() << ',' << f.integer_bits();
  } else {
    out << ',';
  }
  out << ',' << fmt_g(cfg.trainer.lr) << ',' << cfg.seed << ',' << fmt_g(log.final_regret()) << ',';
  if (const auto acc = log.final_accuracy()) out << fmt_g(*acc);
  out << ',' << log.ops.forward_mults << ',' << log.ops.update_mults << '\n';
}

RunArtifacts run_experiment(const ExperimentConfig& cfg, bool write_files) {
  auto stream = make_stream(cfg);
  Model model = make_model(cfg);
  const std::size_t steps = resolved_steps(cfg, *stream);
  if (const auto len = stream->length(); len && *len < steps) {
    throw ConfigError("trainer.steps: stream '" + std::string(to_string(cfg.stream.kind)) +
                      "' has only " + std::to_string(*len) + " samples");
  }
  if (cfg.output.boundary && model.dims().front() != 2) {
    throw ConfigError("output.boundary: needs a 2-input model");
  }

  RunArtifacts art;
  const std::filesystem::path dir = cfg.output.dir;
  if (write_files) std::filesystem::create_directories(dir);

  RunOptions opts;
  opts.steps = steps;
  opts.lr = cfg.trainer.lr;
  opts.loss = cfg.trainer.loss;
  opts.window = cfg.trainer.window;
  opts.freeze_after = cfg.trainer.freeze_after;
  if (cfg.trainer.freeze_after_stationary) {
    opts.freeze_after = static_cast<const DigitsStream&>(*stream).stationary_steps();
  }

  auto dump_grid = [&](std::size_t t, const Model& m) {
    const auto p = dir / (cfg.name + ".boundary_t" + std::to_string(t) + ".csv");
    auto out = open_out(p);
    write_boundary_grid(m, *cfg.output.boundary, out);
    art.files.push_back(p);
  };
  if (write_files && cfg.output.boundary && !cfg.output.boundary->at.empty()) {
    const std::set<std::size_t> at(cfg.output.boundary->at.begin(), cfg.output.boundary->at.end());
    opts.before_step = [&, at](std::size_t t, Model& m) {
      if (at.count(t)) dump_grid(t, m);
    };
  }

  std::ofstream csv;
  if (write_files) {
    const auto snap = dir / (cfg.name + ".config.json");
    open_out(snap) << to_json(cfg).dump(2) << '\n';
    art.files.push_back(snap);
    if (cfg.output.step_csv) {
      const auto p = dir / (cfg.name + ".csv");
      csv = open_out(p);
      art.files.push_back(p);
    }
  }

  art.log = run_online(model, *stream, opts, csv.is_open() ? &csv : nullptr);
  art.log.meta.run_id = cfg.name;
  art.log.meta.config_hash = config_hash(cfg);
  art.log.meta.seed = cfg.seed;

  if (write_files && cfg.output.boundary) dump_grid(steps, model);
  return art;
}

std::vector<RunLog> run_sweep(const std::vector<ExperimentConfig>& cells, int jobs,
                              bool write_files) {
  std::vector<std::function<RunLog()>> work;
  work.reserve(cells.size());
  for (const auto& cell : cells) {
    work.emplace_back([&cell, write_files] { return run_experiment(cell, write_files).log; });
  }
  auto logs = run_parallel(work, jobs);

  if (write_files) {
    std::map<std::string, std::vector<std::size_t>> by_dir;
    for (std::size_t i = 0; i < cells.size(); ++i) by_dir[cells[i].output.dir].push_back(i);
    for (const auto& [dir, idx] : by_dir) {
      auto out = open_out(std::filesystem::path(dir) / "summary.csv");
      out << kSummaryCsvHeader << '\n';
      for (const std::size_t i : idx) write_summary_row(out, cells[i], logs[i]);
    }
  }
  return logs;
}

}  // namespace kanol

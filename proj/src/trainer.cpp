#include "kanol/trainer.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace kanol {

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

void write_step_row(std::ostream& out, const StepRecord& r) {
  out << r.t << ',' << format_number(r.loss) << ',' << format_number(r.cum_regret) << ','
      << format_number(r.prediction) << ',';
  if (r.correct) out << (*r.correct ? 1 : 0);
  out << ',';
  if (r.running_accuracy) out << format_number(*r.running_accuracy);
  out << '\n';
}

RunLog run_online(Model& model, Stream& stream, const RunOptions& opts, std::ostream* csv) {
  if (model.dims().front() != stream.input_dim()) {
    throw std::invalid_argument("model takes " + std::to_string(model.dims().front()) +
                                " inputs but the stream yields " +
                                std::to_string(stream.input_dim()));
  }
  const Task task = stream.task();
  if (task != Task::multiclass && model.dims().back() != 1) {
    throw std::invalid_argument("this stream needs a single-output model");
  }
  if (const auto len = stream.length(); len && *len < opts.steps) {
    throw std::invalid_argument("stream has " + std::to_string(*len) + " samples, run needs " +
                                std::to_string(opts.steps));
  }

  RunLog log;
  log.meta.model = model.descriptor();
  log.meta.param_count = model.param_count();
  log.steps.reserve(opts.steps);
  const OpCounter ops_before = model.ops();
  if (csv) *csv << kStepCsvHeader << '\n';

  // lr is a weight_t constant for the whole run.
  const double lr = model.numerics().quantize(opts.lr, Role::weight);
  std::vector<bool> hits;
  std::size_t hit_count = 0;
  double regret = 0.0;

  for (std::size_t step = 0; step < opts.steps; ++step) {
    auto sample = stream.next();
    if (!sample) throw std::runtime_error("stream exhausted at step " + std::to_string(step));
    if (opts.before_step) opts.before_step(sample->t, model);

    const bool frozen = opts.freeze_after && step >= *opts.freeze_after;
    const StepResult r = train_step(model, sample->x, sample->target, sample->label, opts.loss,
                                    task, frozen ? 0.0 : lr);
    regret += r.loss;

    StepRecord rec;
    rec.t = sample->t;
    rec.loss = r.loss;
    rec.cum_regret = regret;
    rec.prediction = r.prediction;
    rec.correct = r.correct;
    if (r.correct) {
      hits.push_back(*r.correct);
      hit_count += *r.correct ? 1 : 0;
      std::size_t n = hits.size();
      if (opts.window > 0 && n > opts.window) {
        hit_count -= hits[n - 1 - opts.window] ? 1 : 0;
        n = opts.window;
      }
      rec.running_accuracy = static_cast<double>(hit_count) / static_cast<double>(n);
    }
    if (csv) write_step_row(*csv, rec);
    log.steps.push_back(rec);
  }

  const OpCounter after = model.ops();
  log.ops.forward_mults = after.forward_mults - ops_before.forward_mults;
  log.ops.update_mults = after.update_mults - ops_before.update_mults;
  log.ops.backward_mults = after.backward_mults - ops_before.backward_mults;
  return log;
}

std::vector<double> running_accuracy(std::span<const bool> correct, std::size_t window) {
  std::vector<double> out(correct.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    hits += correct[i] ? 1 : 0;
    std::size_t n = i + 1;
    if (window > 0 && n > window) {
      hits -= correct[i - window] ? 1 : 0;
      n = window;
    }
    out[i] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return out;
}

Ratio update_cost_ratio(const Model& kan, const Model& mlp,
                        std::span<const std::vector<double>> probes) {
  if (kan.kind() != ModelKind::kan || mlp.kind() != ModelKind::mlp) {
    throw std::invalid_argument("update_cost_ratio expects a KAN and an MLP");
  }
  if (kan.param_count() != mlp.param_count()) {
    throw std::invalid_argument("models are not budget-matched: " +
                                std::to_string(kan.param_count()) + " vs " +
                                std::to_string(mlp.param_count()) + " parameters");
  }
  if (probes.empty()) throw std::invalid_argument("update_cost_ratio needs probe samples");

  auto measure = [&](Model m) {
    const std::uint64_t before = m.ops().update_mults;
    for (const auto& x : probes) {
      const auto y = m.predict(x);
      const std::vector<double> g(y.size(), 1.0);
      m.backward_update(g, 0.0);
    }
    return m.ops().update_mults - before;
  };
  const std::uint64_t k = measure(kan);
  const std::uint64_t d = measure(mlp);
  if (d == 0) throw std::invalid_argument("MLP performed no update multiplies");
  const std::uint64_t g = std::gcd(k, d);
  return {k / g, d / g};
}

std::vector<RunLog> run_parallel(const std::vector<std::function<RunLog()>>& jobs,
                                 int parallelism) {
  std::vector<RunLog> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = jobs[i]();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallelism, static_cast<int>(jobs.size())));
  std::vector<std::jthread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace kanol

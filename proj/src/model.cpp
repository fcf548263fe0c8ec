#include "kanol/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace kanol {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("model needs at least two dims");
  for (const int d : dims) {
    if (d < 1) throw std::invalid_argument("model dims must be >= 1");
  }
}

template <class Layer>
std::vector<double> chain_forward(std::vector<Layer>& layers, const Numerics& num,
                                  std::span<const double> x) {
  std::vector<double> h(x.begin(), x.end());
  for (auto& v : h) v = num.quantize(v, Role::input);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l > 0) {
      for (auto& v : h) v = num.quantize(v, Role::input);
    }
    h = layers[l].forward(h);
  }
  return h;
}

template <class Layer>
std::vector<double> chain_backward(std::vector<Layer>& layers, const Numerics& num,
                                   std::span<const double> g_out, double lr) {
  std::vector<double> g(g_out.begin(), g_out.end());
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    for (auto& v : g) v = num.quantize(v, Role::output);
    g = it->backward_update(g, lr);
  }
  return g;
}

}  // namespace

Model Model::kan(const KanSpec& spec, Numerics numerics, std::uint64_t init_seed) {
  check_dims(spec.dims);
  const std::size_t n_layers = spec.dims.size() - 1;
  if (spec.grid_ranges.empty() ||
      (spec.grid_ranges.size() != 1 && spec.grid_ranges.size() != n_layers)) {
    throw std::invalid_argument("grid_range needs one entry or one per layer");
  }
  Model m(numerics, spec.dims);
  std::vector<KanLayer> layers;
  layers.reserve(n_layers);
  Rng rng(init_seed);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& [lo, hi] = spec.grid_ranges.size() == 1 ? spec.grid_ranges[0] : spec.grid_ranges[l];
    GridSpec grid(lo, hi, spec.grid_size, spec.spline_order, spec.lut_bits);
    layers.emplace_back(spec.dims[l], spec.dims[l + 1], grid, numerics, spec.sampling);
    layers.back().init_uniform(spec.init_scale, rng);
  }
  m.layers_ = std::move(layers);
  return m;
}

Model Model::mlp(const MlpSpec& spec, Numerics numerics, std::uint64_t init_seed) {
  check_dims(spec.dims);
  const std::size_t n_layers = spec.dims.size() - 1;
  Model m(numerics, spec.dims);
  std::vector<MlpLayer> layers;
  layers.reserve(n_layers);
  Rng rng(init_seed);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Activation act = l + 1 == n_layers ? Activation::linear : spec.hidden;
    layers.emplace_back(spec.dims[l], spec.dims[l + 1], act, numerics, spec.bias);
    layers.back().init_uniform(rng);
  }
  m.layers_ = std::move(layers);
  return m;
}

ModelKind Model::kind() const noexcept {
  return std::holds_alternative<std::vector<KanLayer>>(layers_) ? ModelKind::kan : ModelKind::mlp;
}

std::string Model::descriptor() const {
  std::string s = kind() == ModelKind::kan ? "kan[" : "mlp[";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims_[i]);
  }
  return s + "]";
}

std::size_t Model::param_count() const {
  return std::visit(
      [](const auto& layers) {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.param_count();
        return n;
      },
      layers_);
}

OpCounter Model::ops() const {
  return std::visit(
      [](const auto& layers) {
        OpCounter total;
        for (const auto& l : layers) total += l.ops();
        return total;
      },
      layers_);
}

std::vector<double> Model::predict(std::span<const double> x) {
  return std::visit([&](auto& layers) { return chain_forward(layers, numerics_, x); }, layers_);
}

std::vector<double> Model::backward_update(std::span<const double> g_out, double lr) {
  return std::visit([&](auto& layers) { return chain_backward(layers, numerics_, g_out, lr); },
                    layers_);
}

std::vector<KanLayer>& Model::kan_layers() { return std::get<std::vector<KanLayer>>(layers_); }
std::vector<MlpLayer>& Model::mlp_layers() { return std::get<std::vector<MlpLayer>>(layers_); }
const std::vector<KanLayer>& Model::kan_layers() const {
  return std::get<std::vector<KanLayer>>(layers_);
}
const std::vector<MlpLayer>& Model::mlp_layers() const {
  return std::get<std::vector<MlpLayer>>(layers_);
}

LossKind parse_loss(std::string_view name) {
  if (name == "squared_error") return LossKind::squared_error;
  if (name == "softmax_cross_entropy") return LossKind::softmax_cross_entropy;
  if (name == "hinge") return LossKind::hinge;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::squared_error: return "squared_error";
    case LossKind::softmax_cross_entropy: return "softmax_cross_entropy";
    case LossKind::hinge: return "hinge";
  }
  return "?";
}

LossResult loss_and_grad(LossKind kind, std::span<const double> y_hat,
                         std::span<const double> target, int label) {
  LossResult r;
  r.grad.resize(y_hat.size());
  switch (kind) {
    case LossKind::squared_error:
      if (target.size() != y_hat.size()) {
        throw std::invalid_argument("squared error target size mismatch");
      }
      for (std::size_t j = 0; j < y_hat.size(); ++j) {
        const double e = y_hat[j] - target[j];
        r.loss += e * e;
        r.grad[j] = 2.0 * e;
      }
      break;
    case LossKind::softmax_cross_entropy: {
      if (label < 0 || static_cast<std::size_t>(label) >= y_hat.size()) {
        throw std::invalid_argument("class label out of range");
      }
      const double mx = *std::max_element(y_hat.begin(), y_hat.end());
      double z = 0.0;
      for (const double v : y_hat) z += std::exp(v - mx);
      for (std::size_t j = 0; j < y_hat.size(); ++j) r.grad[j] = std::exp(y_hat[j] - mx) / z;
      r.loss = -(y_hat[static_cast<std::size_t>(label)] - mx - std::log(z));
      r.grad[static_cast<std::size_t>(label)] -= 1.0;
      break;
    }
    case LossKind::hinge: {
      if (y_hat.size() != 1 || target.size() != 1) {
        throw std::invalid_argument("hinge loss needs a single output");
      }
      const double margin = target[0] * y_hat[0];
      r.loss = std::max(0.0, 1.0 - margin);
      r.grad[0] = margin < 1.0 ? -target[0] : 0.0;
      break;
    }
  }
  return r;
}

int classify_binary(double y_hat) noexcept { return y_hat >= 0.0 ? 1 : -1; }

int classify_multiclass(std::span<const double> logits) noexcept {
  int best = 0;
  for (std::size_t j = 1; j < logits.size(); ++j) {
    if (logits[j] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  }
  return best;
}

StepResult train_step(Model& model, std::span<const double> x, std::span<const double> target,
                      int label, LossKind loss, Task task, double lr) {
  StepResult step;
  step.output = model.predict(x);
  switch (task) {
    case Task::regression:
      step.prediction = step.output.at(0);
      break;
    case Task::binary:
      step.prediction = classify_binary(step.output.at(0));
      step.correct = static_cast<int>(step.prediction) == label;
      break;
    case Task::multiclass:
      step.prediction = classify_multiclass(step.output);
      step.correct = static_cast<int>(step.prediction) == label;
      break;
  }
  LossResult lr_result = loss_and_grad(loss, step.output, target, label);
  step.loss = lr_result.loss;
  if (lr != 0.0) model.backward_update(lr_result.grad, lr);
  return step;
}

}  // namespace kanol

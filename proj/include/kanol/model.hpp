#pragma once

// Homogeneous layer stacks (all-KAN or all-MLP), losses and prediction rules.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kanol/kan.hpp"
#include "kanol/mlp.hpp"
#include "kanol/numerics.hpp"
#include "kanol/ops.hpp"
#include "kanol/spline.hpp"

namespace kanol {

struct KanSpec {
  std::vector<int> dims;
  int grid_size = 10;
  int spline_order = 2;
  int lut_bits = 8;
  // One [x_min, x_max] per layer; a single entry is reused for every layer.
  std::vector<std::pair<double, double>> grid_ranges{{-1.0, 1.0}};
  double init_scale = 0.1;
  BasisSampling sampling = BasisSampling::lut;
};

struct MlpSpec {
  std::vector<int> dims;
  Activation hidden = Activation::relu;  // the last layer is always linear
  bool bias = true;
};

enum class ModelKind { kan, mlp };

class Model {
 public:
  static Model kan(const KanSpec& spec, Numerics numerics, std::uint64_t init_seed);
  static Model mlp(const MlpSpec& spec, Numerics numerics, std::uint64_t init_seed);

  ModelKind kind() const noexcept;
  const Numerics& numerics() const noexcept { return numerics_; }
  const std::vector<int>& dims() const noexcept { return dims_; }
  std::string descriptor() const;  // e.g. "kan[2,7,1]"
  std::size_t param_count() const;
  OpCounter ops() const;

  // Chained forward passes; every layer caches its context.
  std::vector<double> predict(std::span<const double> x);
  // Reverse-order backward chain with in-place updates. Returns dL/dx.
  std::vector<double> backward_update(std::span<const double> g_out, double lr);

  std::vector<KanLayer>& kan_layers();
  std::vector<MlpLayer>& mlp_layers();
  const std::vector<KanLayer>& kan_layers() const;
  const std::vector<MlpLayer>& mlp_layers() const;

 private:
  Model(Numerics numerics, std::vector<int> dims) : numerics_(numerics), dims_(std::move(dims)) {}

  Numerics numerics_;
  std::vector<int> dims_;
  std::variant<std::vector<KanLayer>, std::vector<MlpLayer>> layers_;
};

enum class LossKind { squared_error, softmax_cross_entropy, hinge };

LossKind parse_loss(std::string_view name);
std::string_view to_string(LossKind kind) noexcept;

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

// squared_error: sum (y - t)^2 with gradient 2 (y - t).
// softmax_cross_entropy: -log softmax(y)[label], gradient p - onehot(label).
// hinge: max(0, 1 - t y) on a single output, gradient -t inside the margin.
LossResult loss_and_grad(LossKind kind, std::span<const double> y_hat,
                         std::span<const double> target, int label);

// Sign with ties to +1.
int classify_binary(double y_hat) noexcept;
// Argmax with ties to the lowest index.
int classify_multiclass(std::span<const double> logits) noexcept;

enum class Task { regression, binary, multiclass };

struct StepResult {
  double loss = 0.0;
  std::vector<double> output;
  double prediction = 0.0;  // y_hat[0], the sign, or the argmax
  std::optional<bool> correct;
};

// forward -> loss -> backward chain. The loss is evaluated in real arithmetic;
// the gradient handed to the top layer is quantized to output_t. lr = 0 skips
// the backward pass entirely.
StepResult train_step(Model& model, std::span<const double> x, std::span<const double> target,
                      int label, LossKind loss, Task task, double lr);

}  // namespace kanol

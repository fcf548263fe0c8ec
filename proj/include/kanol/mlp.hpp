#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "kanol/numerics.hpp"
#include "kanol/ops.hpp"
#include "kanol/rng.hpp"

namespace kanol {

enum class Activation { relu, hard_tanh, hard_silu, linear };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a) noexcept;

// relu: max(0,z); hard_tanh: clip(z,-1,1); hard_silu: z * relu6(z+3) / 6.
double activation_fn(Activation kind, double z) noexcept;
// Derivatives with relu'(0) = 0 and hard_tanh'(+-1) = 0.
double activation_deriv(Activation kind, double z) noexcept;

// Dense layer y = act(W x + b) with the same online SGD contract as KanLayer.
class MlpLayer {
 public:
  MlpLayer(int d_in, int d_out, Activation activation, Numerics numerics, bool bias = true);

  int d_in() const noexcept { return d_in_; }
  int d_out() const noexcept { return d_out_; }
  Activation activation() const noexcept { return activation_; }
  bool has_bias() const noexcept { return bias_; }

  // W and b drawn from U(-1/sqrt(d_in), 1/sqrt(d_in)), quantized to weight_t.
  void init_uniform(Rng& rng);

  std::vector<double> forward(std::span<const double> x);

  // dz = g * act'(z); b -= lr*dz; W -= lr*dz*x; returns sum_o dz_o W_old[o][i].
  std::vector<double> backward_update(std::span<const double> g_out, double lr);

  double weight(int o, int i) const { return w_[index(o, i)]; }
  double bias(int o) const { return b_.at(static_cast<std::size_t>(o)); }
  void set_weight(int o, int i, double value);
  void set_bias(int o, double value);

  std::size_t param_count() const noexcept { return w_.size() + (bias_ ? b_.size() : 0); }
  const OpCounter& ops() const noexcept { return ops_; }
  bool has_context() const noexcept { return ctx_valid_; }

 private:
  std::size_t index(int o, int i) const noexcept {
    return static_cast<std::size_t>(o) * static_cast<std::size_t>(d_in_) +
           static_cast<std::size_t>(i);
  }

  int d_in_;
  int d_out_;
  Activation activation_;
  Numerics numerics_;
  bool bias_;
  std::vector<double> w_;
  std::vector<double> b_;
  std::vector<double> ctx_x_;
  std::vector<double> ctx_z_;
  bool ctx_valid_ = false;
  OpCounter ops_;
};

}  // namespace kanol

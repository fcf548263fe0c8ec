#include "kanol/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kanol {

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "hard_tanh") return Activation::hard_tanh;
  if (name == "hard_silu") return Activation::hard_silu;
  if (name == "linear") return Activation::linear;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::hard_tanh: return "hard_tanh";
    case Activation::hard_silu: return "hard_silu";
    case Activation::linear: return "linear";
  }
  return "?";
}

double activation_fn(Activation kind, double z) noexcept {
  switch (kind) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::hard_tanh: return std::clamp(z, -1.0, 1.0);
    case Activation::hard_silu: return z * std::clamp(z / 6.0 + 0.5, 0.0, 1.0);
    case Activation::linear: return z;
  }
  return z;
}

double activation_deriv(Activation kind, double z) noexcept {
  switch (kind) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::hard_tanh: return (z > -1.0 && z < 1.0) ? 1.0 : 0.0;
    case Activation::hard_silu:
      if (z <= -3.0) return 0.0;
      if (z >= 3.0) return 1.0;
      return z / 3.0 + 0.5;
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

MlpLayer::MlpLayer(int d_in, int d_out, Activation activation, Numerics numerics, bool bias)
    : d_in_(d_in), d_out_(d_out), activation_(activation), numerics_(numerics), bias_(bias) {
  if (d_in < 1 || d_out < 1) throw std::invalid_argument("MLP layer dimensions must be >= 1");
  w_.assign(static_cast<std::size_t>(d_in) * static_cast<std::size_t>(d_out), 0.0);
  b_.assign(static_cast<std::size_t>(d_out), 0.0);
  ctx_x_.resize(static_cast<std::size_t>(d_in));
  ctx_z_.resize(static_cast<std::size_t>(d_out));
}

void MlpLayer::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in_));
  for (auto& w : w_) w = numerics_.quantize(rng.uniform(-bound, bound), Role::weight);
  if (bias_) {
    for (auto& b : b_) b = numerics_.quantize(rng.uniform(-bound, bound), Role::weight);
  }
}

void MlpLayer::set_weight(int o, int i, double value) {
  w_.at(index(o, i)) = numerics_.quantize(value, Role::weight);
}

void MlpLayer::set_bias(int o, double value) {
  if (!bias_) throw std::logic_error("layer was built without biases");
  b_.at(static_cast<std::size_t>(o)) = numerics_.quantize(value, Role::weight);
}

std::vector<double> MlpLayer::forward(std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(d_in_)) {
    throw std::invalid_argument("MLP forward expects " + std::to_string(d_in_) +
                                " inputs, got " + std::to_string(x.size()));
  }
  std::copy(x.begin(), x.end(), ctx_x_.begin());
  std::vector<double> y(static_cast<std::size_t>(d_out_));
  for (int o = 0; o < d_out_; ++o) {
    double acc = b_[o];
    const double* w = &w_[index(o, 0)];
    for (int i = 0; i < d_in_; ++i) {
      acc = numerics_.mul_add(Role::weight, wt_v(acc), wt_v(w[i]), in_v(x[i]));
    }
    ctx_z_[o] = acc;
    y[o] = numerics_.quantize(activation_fn(activation_, acc), Role::output);
  }
  ctx_valid_ = true;
  ops_.forward_mults += static_cast<std::uint64_t>(d_in_) * d_out_;
  return y;
}

std::vector<double> MlpLayer::backward_update(std::span<const double> g_out, double lr) {
  if (!ctx_valid_) throw std::logic_error("MLP backward called without a matching forward");
  if (g_out.size() != static_cast<std::size_t>(d_out_)) {
    throw std::invalid_argument("MLP backward expects " + std::to_string(d_out_) +
                                " gradients, got " + std::to_string(g_out.size()));
  }
  const double lr_q = numerics_.quantize(lr, Role::weight);

  std::vector<double> dz(static_cast<std::size_t>(d_out_));
  for (int o = 0; o < d_out_; ++o) {
    const double g = numerics_.quantize(g_out[o], Role::output);
    const double d = numerics_.quantize(activation_deriv(activation_, ctx_z_[o]), Role::weight);
    dz[o] = numerics_.mul(Role::output, out_v(g), wt_v(d));
  }

  // Input gradient from W before the update.
  std::vector<double> grad_x(static_cast<std::size_t>(d_in_));
  for (int i = 0; i < d_in_; ++i) {
    double acc = 0.0;
    for (int o = 0; o < d_out_; ++o) {
      acc = numerics_.mul_add(Role::weight, wt_v(acc), out_v(dz[o]), wt_v(w_[index(o, i)]));
    }
    grad_x[i] = numerics_.quantize(acc, Role::input);
  }

  for (int o = 0; o < d_out_; ++o) {
    if (bias_) b_[o] = numerics_.mul_sub(Role::weight, wt_v(b_[o]), wt_v(lr_q), out_v(dz[o]));
    double* w = &w_[index(o, 0)];
    for (int i = 0; i < d_in_; ++i) {
      w[i] = numerics_.mul_sub(Role::weight, wt_v(w[i]), wt_v(lr_q), out_v(dz[o]),
                               in_v(ctx_x_[i]));
    }
  }

  const auto n = static_cast<std::uint64_t>(d_in_) * d_out_;
  ops_.update_mults += n;
  ops_.backward_mults += n;
  ctx_valid_ = false;
  return grad_x;
}

}  // namespace kanol

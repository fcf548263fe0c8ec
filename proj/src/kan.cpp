#include "kanol/kan.hpp"

#include <stdexcept>
#include <string>

namespace kanol {

KanLayer::KanLayer(int d_in, int d_out, GridSpec grid, Numerics numerics, BasisSampling sampling)
    : d_in_(d_in),
      d_out_(d_out),
      grid_(grid),
      lut_(std::make_shared<const BasisLut>(BasisLut::build(grid.order(), grid.lut_bits()))),
      numerics_(numerics),
      sampling_(sampling) {
  if (d_in < 1 || d_out < 1) throw std::invalid_argument("KAN layer dimensions must be >= 1");
  ws_.assign(static_cast<std::size_t>(d_in) * static_cast<std::size_t>(d_out) *
                 static_cast<std::size_t>(grid.coeff_count()),
             0.0);
  ctx_.resize(static_cast<std::size_t>(d_in));
}

void KanLayer::init_uniform(double scale, Rng& rng) {
  for (auto& w : ws_) w = numerics_.quantize(rng.uniform(-scale, scale), Role::weight);
}

void KanLayer::set_coefficient(int o, int i, int c, double value) {
  ws_.at(offset(o, i) + static_cast<std::size_t>(c)) = numerics_.quantize(value, Role::weight);
}

std::size_t KanLayer::param_count() const noexcept {
  return static_cast<std::size_t>(d_in_) * static_cast<std::size_t>(d_out_) *
         static_cast<std::size_t>(grid_.cells() + grid_.support());
}

BasisRow KanLayer::read_basis(const CellIndex& idx) const {
  BasisRow row = eval_basis(*lut_, idx, sampling_);
  for (int r = 0; r < row.size; ++r) row.v[r] = numerics_.quantize(row.v[r], Role::weight);
  return row;
}

BasisRow KanLayer::read_slope(const CellIndex& idx) const {
  BasisRow row = eval_deriv(*lut_, idx, grid_, sampling_);
  for (int r = 0; r < row.size; ++r) row.v[r] = numerics_.quantize(row.v[r], Role::weight);
  return row;
}

std::vector<double> KanLayer::forward(std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(d_in_)) {
    throw std::invalid_argument("KAN forward expects " + std::to_string(d_in_) +
                                " inputs, got " + std::to_string(x.size()));
  }
  std::vector<BasisRow> basis(static_cast<std::size_t>(d_in_));
  for (int i = 0; i < d_in_; ++i) {
    ctx_[i] = locate(x[i], grid_);
    basis[i] = read_basis(ctx_[i]);
  }
  std::vector<double> y(static_cast<std::size_t>(d_out_));
  const int s = grid_.support();
  for (int o = 0; o < d_out_; ++o) {
    double acc = 0.0;
    for (int i = 0; i < d_in_; ++i) {
      const double* w = &ws_[offset(o, i) + static_cast<std::size_t>(ctx_[i].cell)];
      for (int r = 0; r < s; ++r) {
        acc = numerics_.mul_add(Role::weight, wt_v(acc), wt_v(w[r]), wt_v(basis[i][r]));
      }
    }
    y[o] = numerics_.quantize(acc, Role::output);
  }
  ctx_valid_ = true;
  ops_.forward_mults += static_cast<std::uint64_t>(d_in_) * d_out_ * s;
  return y;
}

std::vector<double> KanLayer::backward_update(std::span<const double> g_out, double lr) {
  if (!ctx_valid_) throw std::logic_error("KAN backward called without a matching forward");
  if (g_out.size() != static_cast<std::size_t>(d_out_)) {
    throw std::invalid_argument("KAN backward expects " + std::to_string(d_out_) +
                                " gradients, got " + std::to_string(g_out.size()));
  }
  const int s = grid_.support();
  const double lr_q = numerics_.quantize(lr, Role::weight);
  std::vector<double> g(g_out.begin(), g_out.end());
  for (auto& v : g) v = numerics_.quantize(v, Role::output);

  // Input gradient first, from the coefficients as they were in the forward pass.
  std::vector<double> grad_x(static_cast<std::size_t>(d_in_));
  std::vector<BasisRow> basis(static_cast<std::size_t>(d_in_));
  for (int i = 0; i < d_in_; ++i) {
    const CellIndex& idx = ctx_[i];
    const BasisRow slope = read_slope(idx);
    basis[i] = read_basis(idx);
    double acc = 0.0;
    for (int o = 0; o < d_out_; ++o) {
      const double* w = &ws_[offset(o, i) + static_cast<std::size_t>(idx.cell)];
      for (int r = 0; r < s; ++r) {
        acc = numerics_.mul_add(Role::weight, wt_v(acc), out_v(g[o]), wt_v(w[r]), wt_v(slope[r]));
      }
    }
    grad_x[i] = numerics_.quantize(acc, Role::input);
  }

  for (int o = 0; o < d_out_; ++o) {
    for (int i = 0; i < d_in_; ++i) {
      double* w = &ws_[offset(o, i) + static_cast<std::size_t>(ctx_[i].cell)];
      for (int r = 0; r < s; ++r) {
        w[r] = numerics_.mul_sub(Role::weight, wt_v(w[r]), wt_v(lr_q), out_v(g[o]),
                                 wt_v(basis[i][r]));
      }
    }
  }

  const auto edges = static_cast<std::uint64_t>(d_in_) * d_out_;
  ops_.update_mults += edges * s;
  ops_.backward_mults += edges * s;
  ctx_valid_ = false;
  return grad_x;
}

double KanLayer::edge_value(int o, int i, double x) const {
  const CellIndex idx = locate(x, grid_);
  const BasisRow b = read_basis(idx);
  const double* w = &ws_[offset(o, i) + static_cast<std::size_t>(idx.cell)];
  double acc = 0.0;
  for (int r = 0; r < b.size; ++r) {
    acc = numerics_.mul_add(Role::weight, wt_v(acc), wt_v(w[r]), wt_v(b[r]));
  }
  return acc;
}

}  // namespace kanol

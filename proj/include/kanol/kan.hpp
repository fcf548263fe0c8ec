#pragma once

// KAN layer with index-driven forward, backward and in-place SGD update.
//
// Every edge (o, i) carries a spline phi_{o,i}(x) = sum_c Ws[o][i][c] B_c(x).
// The forward pass caches one CellIndex per input coordinate; the matching
// backward pass reads it back to touch only the s active coefficients.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "kanol/numerics.hpp"
#include "kanol/ops.hpp"
#include "kanol/rng.hpp"
#include "kanol/spline.hpp"

namespace kanol {

class KanLayer {
 public:
  KanLayer(int d_in, int d_out, GridSpec grid, Numerics numerics,
           BasisSampling sampling = BasisSampling::lut);

  int d_in() const noexcept { return d_in_; }
  int d_out() const noexcept { return d_out_; }
  const GridSpec& grid() const noexcept { return grid_; }
  const BasisLut& lut() const noexcept { return *lut_; }
  const Numerics& numerics() const noexcept { return numerics_; }

  // U(-scale, scale) per coefficient, quantized to weight_t.
  void init_uniform(double scale, Rng& rng);

  // y_o = sum_i sum_r Ws[o][i][k_i + r] * B_r(u_i). Throws std::invalid_argument
  // on a dimension mismatch.
  std::vector<double> forward(std::span<const double> x);

  // Applies Ws[o][i][k_i+r] -= lr * g_o * B_r(u_i) to the active window of every
  // edge and returns dL/dx computed from the coefficients before the update.
  // Throws std::logic_error without a preceding forward.
  std::vector<double> backward_update(std::span<const double> g_out, double lr);

  // phi_{o,i}(x) without touching the cached context.
  double edge_value(int o, int i, double x) const;

  double coefficient(int o, int i, int c) const { return ws_[offset(o, i) + c]; }
  void set_coefficient(int o, int i, int c, double value);
  std::span<const double> coefficients() const noexcept { return ws_; }

  // d_in * d_out * (G + s), the budget figure used for model comparisons.
  std::size_t param_count() const noexcept;
  // d_in * d_out * (G + p) actually stored.
  std::size_t stored_coefficients() const noexcept { return ws_.size(); }

  const OpCounter& ops() const noexcept { return ops_; }
  bool has_context() const noexcept { return ctx_valid_; }

 private:
  std::size_t offset(int o, int i) const noexcept {
    return (static_cast<std::size_t>(o) * static_cast<std::size_t>(d_in_) +
            static_cast<std::size_t>(i)) *
           static_cast<std::size_t>(grid_.coeff_count());
  }
  BasisRow read_basis(const CellIndex& idx) const;
  BasisRow read_slope(const CellIndex& idx) const;

  int d_in_;
  int d_out_;
  GridSpec grid_;
  std::shared_ptr<const BasisLut> lut_;
  Numerics numerics_;
  BasisSampling sampling_;
  std::vector<double> ws_;
  std::vector<CellIndex> ctx_;
  bool ctx_valid_ = false;
  OpCounter ops_;
};

}  // namespace kanol

#pragma once

// Uniform-grid B-spline machinery: grid indexing and precomputed basis tables.
//
// A grid covers [x_min, x_max] with G cells of width H. Inside cell k only the
// s = p + 1 local basis functions r = 0..p are nonzero; local function r
// multiplies coefficient k + r, so each edge stores G + p coefficients.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace kanol {

inline constexpr int kMaxSplineOrder = 3;
inline constexpr int kMaxSupport = kMaxSplineOrder + 1;

class GridSpec {
 public:
  // Throws std::invalid_argument on x_min >= x_max, cells < 1, order < 0 or
  // lut_bits outside [1, 16].
  GridSpec(double x_min, double x_max, int cells, int order, int lut_bits = 8);

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  int cells() const noexcept { return cells_; }
  int order() const noexcept { return order_; }
  int lut_bits() const noexcept { return lut_bits_; }
  int bins() const noexcept { return 1 << lut_bits_; }
  int support() const noexcept { return order_ + 1; }
  int coeff_count() const noexcept { return cells_ + order_; }
  double cell_width() const noexcept { return (x_max_ - x_min_) / cells_; }
  double inv_cell_width() const noexcept { return cells_ / (x_max_ - x_min_); }

 private:
  double x_min_;
  double x_max_;
  int cells_;
  int order_;
  int lut_bits_;
};

struct CellIndex {
  int cell = 0;       // k in [0, G-1]
  int bin = 0;        // u in [0, 2^F - 1]
  double frac = 0.0;  // unbinned position inside the cell, in [0, 1)
};

// Which abscissa the basis is read at: the LUT bin (hardware behaviour) or the
// unbinned cell fraction (a smooth reference used by gradient checks).
enum class BasisSampling { lut, exact };

// The s active values (or slopes) for one input.
struct BasisRow {
  std::array<double, kMaxSupport> v{};
  int size = 0;

  double operator[](int r) const noexcept { return v[static_cast<std::size_t>(r)]; }
  std::span<const double> view() const noexcept {
    return {v.data(), static_cast<std::size_t>(size)};
  }
};

class BasisLut {
 public:
  // Samples the cardinal B-spline segments of `order` at xi_u = u / 2^lut_bits.
  // Throws std::invalid_argument for order outside [0, 3].
  static BasisLut build(int order, int lut_bits);

  int order() const noexcept { return order_; }
  int bins() const noexcept { return bins_; }
  int support() const noexcept { return order_ + 1; }

  // B_r at bin u, and dB_r/dxi (slope per unit cell).
  double value(int r, int u) const noexcept { return values_[index(r, u)]; }
  double slope(int r, int u) const noexcept { return slopes_[index(r, u)]; }

  // Same segment polynomials evaluated at an arbitrary xi in [0, 1].
  double value_at(int r, double xi) const noexcept;
  double slope_at(int r, double xi) const noexcept;

 private:
  BasisLut(int order, int bins);
  std::size_t index(int r, int u) const noexcept {
    return static_cast<std::size_t>(u) * static_cast<std::size_t>(order_ + 1) +
           static_cast<std::size_t>(r);
  }

  int order_;
  int bins_;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

// Maps x to (cell, bin). t = (x - x_min) / H is clamped to [0, G); the bin is
// the top lut_bits bits of the fractional part of t.
CellIndex locate(double x, const GridSpec& grid) noexcept;

BasisRow eval_basis(const BasisLut& lut, const CellIndex& idx,
                    BasisSampling sampling = BasisSampling::lut) noexcept;

// Slopes chain-ruled to d/dx, i.e. the unit-cell slope divided by H.
BasisRow eval_deriv(const BasisLut& lut, const CellIndex& idx, const GridSpec& grid,
                    BasisSampling sampling = BasisSampling::lut) noexcept;

}  // namespace kanol

#include "kanol/spline.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kanol {

namespace {

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Cardinal B-spline of degree p supported on [0, p+1], via truncated powers.
double cardinal(int p, double x) {
  if (p < 0 || x < 0.0 || x >= p + 1) return 0.0;
  double sum = 0.0;
  for (int j = 0; j <= p + 1; ++j) {
    const double y = x - j;
    if (y < 0.0) break;
    const double term = binomial(p + 1, j) * (p == 0 ? 1.0 : std::pow(y, p));
    sum += (j % 2 == 0) ? term : -term;
  }
  return sum / factorial(p);
}

double cardinal_slope(int p, double x) {
  if (p == 0) return 0.0;
  return cardinal(p - 1, x) - cardinal(p - 1, x - 1.0);
}

}  // namespace

GridSpec::GridSpec(double x_min, double x_max, int cells, int order, int lut_bits)
    : x_min_(x_min), x_max_(x_max), cells_(cells), order_(order), lut_bits_(lut_bits) {
  if (!(x_min < x_max)) throw std::invalid_argument("grid needs x_min < x_max");
  if (cells < 1) throw std::invalid_argument("grid needs at least one cell");
  if (order < 0) throw std::invalid_argument("spline order must be >= 0");
  if (lut_bits < 1 || lut_bits > 16) {
    throw std::invalid_argument("lut_bits must be in [1, 16], got " + std::to_string(lut_bits));
  }
}

BasisLut::BasisLut(int order, int bins)
    : order_(order),
      bins_(bins),
      values_(static_cast<std::size_t>(bins) * static_cast<std::size_t>(order + 1)),
      slopes_(values_.size()) {}

BasisLut BasisLut::build(int order, int lut_bits) {
  if (order < 0 || order > kMaxSplineOrder) {
    throw std::invalid_argument("unsupported spline order " + std::to_string(order) +
                                " (supported: 0..3)");
  }
  if (lut_bits < 1 || lut_bits > 16) {
    throw std::invalid_argument("lut_bits must be in [1, 16]");
  }
  BasisLut lut(order, 1 << lut_bits);
  for (int u = 0; u < lut.bins_; ++u) {
    const double xi = std::ldexp(static_cast<double>(u), -lut_bits);
    for (int r = 0; r <= order; ++r) {
      lut.values_[lut.index(r, u)] = lut.value_at(r, xi);
      lut.slopes_[lut.index(r, u)] = lut.slope_at(r, xi);
    }
  }
  return lut;
}

double BasisLut::value_at(int r, double xi) const noexcept {
  return cardinal(order_, xi + order_ - r);
}

double BasisLut::slope_at(int r, double xi) const noexcept {
  return cardinal_slope(order_, xi + order_ - r);
}

CellIndex locate(double x, const GridSpec& grid) noexcept {
  const double t = (x - grid.x_min()) * grid.cells() / (grid.x_max() - grid.x_min());
  const int bins = grid.bins();
  CellIndex idx;
  if (!(t > 0.0)) return idx;
  if (t >= grid.cells()) {
    idx.cell = grid.cells() - 1;
    idx.bin = bins - 1;
    idx.frac = static_cast<double>(bins - 1) / bins;
    return idx;
  }
  const double k = std::floor(t);
  idx.cell = static_cast<int>(k);
  idx.frac = t - k;
  idx.bin = std::min(static_cast<int>(std::floor(std::ldexp(idx.frac, grid.lut_bits()))), bins - 1);
  return idx;
}

BasisRow eval_basis(const BasisLut& lut, const CellIndex& idx, BasisSampling sampling) noexcept {
  BasisRow row;
  row.size = lut.support();
  for (int r = 0; r < row.size; ++r) {
    row.v[static_cast<std::size_t>(r)] =
        sampling == BasisSampling::lut ? lut.value(r, idx.bin) : lut.value_at(r, idx.frac);
  }
  return row;
}

BasisRow eval_deriv(const BasisLut& lut, const CellIndex& idx, const GridSpec& grid,
                    BasisSampling sampling) noexcept {
  BasisRow row;
  row.size = lut.support();
  const double inv_h = grid.inv_cell_width();
  for (int r = 0; r < row.size; ++r) {
    const double unit =
        sampling == BasisSampling::lut ? lut.slope(r, idx.bin) : lut.slope_at(r, idx.frac);
    row.v[static_cast<std::size_t>(r)] = unit * inv_h;
  }
  return row;
}

}  // namespace kanol

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kanol/kan.hpp"
#include "kanol/rng.hpp"

using namespace kanol;

namespace {

double cardinal(int p, double t) {
  if (p == 0) return (t >= 0.0 && t < 1.0) ? 1.0 : 0.0;
  return (t * cardinal(p - 1, t) + (p + 1 - t) * cardinal(p - 1, t - 1.0)) / p;
}

// Dense reference: every coefficient of the edge times its global basis
// function, read at the cell position implied by `xi`.
double dense_edge(const KanLayer& L, int o, int i, int cell, double xi) {
  const int p = L.grid().order();
  double y = 0.0;
  for (int c = 0; c < L.grid().coeff_count(); ++c) {
    y += L.coefficient(o, i, c) * cardinal(p, cell + xi - c + p);
  }
  return y;
}

KanLayer single_edge(Numerics n = Numerics::floating()) {
  return KanLayer(1, 1, GridSpec(-1, 1, 10, 2, 8), n);
}

}  // namespace

TEST_CASE("zero coefficients give zero output") {
  KanLayer L(3, 2, GridSpec(-1, 1, 10, 2), Numerics::floating());
  const std::vector<double> x{0.1, -0.7, 0.95};
  for (const double y : L.forward(x)) CHECK(y == 0.0);
}

TEST_CASE("equal coefficients give d_in * c") {
  KanLayer L(3, 2, GridSpec(-1, 1, 10, 3), Numerics::floating());
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < L.grid().coeff_count(); ++c) L.set_coefficient(o, i, c, 0.4);
  Rng rng(5);
  for (int n = 0; n < 50; ++n) {
    const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (const double y : L.forward(x)) CHECK(y == doctest::Approx(1.2).epsilon(1e-12));
  }
}

TEST_CASE("single edge forward and update example") {
  auto L = single_edge();
  L.set_coefficient(0, 0, 6, 1.0);
  L.set_coefficient(0, 0, 7, 2.0);
  L.set_coefficient(0, 0, 8, 3.0);
  const double x = 0.35;
  const auto y = L.forward(std::span(&x, 1));
  CHECK(y[0] == doctest::Approx(2.25));
  CHECK(dense_edge(L, 0, 0, 6, 0.75) == doctest::Approx(2.25));

  // dL/dx from the pre-update coefficients: slope of the quadratic at 0.75 is
  // (-(1-xi), 1-2xi, xi) . (1,2,3) / H.
  const double expect_dx = (-0.25 * 1 + (1 - 1.5) * 2 + 0.75 * 3) / 0.2;
  const double g = 1.0;
  const auto dx = L.backward_update(std::span(&g, 1), 0.5);
  CHECK(dx[0] == doctest::Approx(expect_dx));
  CHECK(L.coefficient(0, 0, 6) == doctest::Approx(0.984375));
  CHECK(L.coefficient(0, 0, 7) == doctest::Approx(1.65625));
  CHECK(L.coefficient(0, 0, 8) == doctest::Approx(2.859375));
  for (int c : {0, 1, 2, 3, 4, 5, 9, 10, 11}) CHECK(L.coefficient(0, 0, c) == 0.0);
}

TEST_CASE("zero upstream gradient changes nothing") {
  KanLayer L(2, 3, GridSpec(-1, 1, 6, 2), Numerics::floating());
  Rng rng(9);
  L.init_uniform(0.5, rng);
  const std::vector<double> before(L.coefficients().begin(), L.coefficients().end());
  const std::vector<double> x{0.2, -0.4};
  L.forward(x);
  const std::vector<double> g(3, 0.0);
  for (const double d : L.backward_update(g, 0.3)) CHECK(d == 0.0);
  CHECK(std::equal(before.begin(), before.end(), L.coefficients().begin()));
}

TEST_CASE("backward needs a matching forward") {
  auto L = single_edge();
  const double g = 1.0;
  CHECK_THROWS_AS(L.backward_update(std::span(&g, 1), 0.1), std::logic_error);
  const double x = 0.0;
  L.forward(std::span(&x, 1));
  L.backward_update(std::span(&g, 1), 0.1);
  CHECK_THROWS_AS(L.backward_update(std::span(&g, 1), 0.1), std::logic_error);
  const std::vector<double> two{0.0, 0.0};
  CHECK_THROWS_AS(L.forward(two), std::invalid_argument);
}

TEST_CASE("parameter counts") {
  CHECK(KanLayer(1, 1, GridSpec(-1, 1, 10, 2), Numerics::floating()).param_count() == 13);
  CHECK(KanLayer(2, 7, GridSpec(-1, 1, 10, 2), Numerics::floating()).param_count() +
            KanLayer(7, 1, GridSpec(-1, 1, 10, 2), Numerics::floating()).param_count() ==
        273);
  CHECK(KanLayer(6, 4, GridSpec(-1, 1, 5, 0), Numerics::floating()).param_count() == 144);
  CHECK(KanLayer(1, 1, GridSpec(-1, 1, 10, 2), Numerics::floating()).stored_coefficients() == 12);
}

TEST_CASE("updates are sparse and bounded by the upstream gradient") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int p = static_cast<int>(rng.below(4));
    KanLayer L(3, 4, GridSpec(-2, 2, 8, p), Numerics::floating());
    L.init_uniform(1.0, rng);
    const std::vector<double> before(L.coefficients().begin(), L.coefficients().end());
    std::vector<double> x(3), g(4);
    for (auto& v : x) v = rng.uniform(-6, 6);  // outside the grid too
    for (auto& v : g) v = rng.uniform(-3, 3);
    L.forward(x);
    L.backward_update(g, 1.0);
    std::size_t changed = 0;
    for (int o = 0; o < 4; ++o)
      for (int i = 0; i < 3; ++i)
        for (int c = 0; c < L.grid().coeff_count(); ++c) {
          const std::size_t k = static_cast<std::size_t>((o * 3 + i) * L.grid().coeff_count() + c);
          const double step = before[k] - L.coefficients()[k];
          if (step != 0.0) ++changed;
          REQUIRE(std::abs(step) <= std::abs(g[static_cast<std::size_t>(o)]) * (1 + 1e-12));
        }
    REQUIRE(changed <= static_cast<std::size_t>(3 * 4 * (p + 1)));
  }
}

TEST_CASE("op counters follow the cost model") {
  KanLayer L(2, 7, GridSpec(-1, 1, 10, 2), Numerics::floating());
  const std::vector<double> x{0.3, -0.2};
  const std::vector<double> g(7, 0.1);
  for (int n = 0; n < 5; ++n) {
    L.forward(x);
    L.backward_update(g, 0.01);
  }
  CHECK(L.ops().forward_mults == 5u * 2 * 7 * 3);
  CHECK(L.ops().update_mults == 5u * 2 * 7 * 3);
}

TEST_CASE("fixed-point forward tracks the real-valued forward") {
  Rng rng(33);
  for (const char* fmt : {"10,3", "16,4", "12,2"}) {
    CAPTURE(fmt);
    const auto fixed = Numerics::parse(fmt);
    const double step = fixed.step(Role::output);
    for (int trial = 0; trial < 200; ++trial) {
      KanLayer Lq(4, 3, GridSpec(-1, 1, 10, 2), fixed);
      KanLayer Lf(4, 3, GridSpec(-1, 1, 10, 2), Numerics::floating());
      Lq.init_uniform(0.45, rng);  // |sum| < 2 keeps <12,2> out of saturation
      for (int o = 0; o < 3; ++o)
        for (int i = 0; i < 4; ++i)
          for (int c = 0; c < 12; ++c) Lf.set_coefficient(o, i, c, Lq.coefficient(o, i, c));
      std::vector<double> x(4);
      for (auto& v : x) v = fixed.quantize(rng.uniform(-1, 1), Role::input);
      const auto yq = Lq.forward(x);
      const auto yf = Lf.forward(x);
      for (int o = 0; o < 3; ++o) {
        REQUIRE(std::abs(yq[static_cast<std::size_t>(o)] - yf[static_cast<std::size_t>(o)]) <=
                (4 * 3 + 2) * step);
      }
    }
  }
}

TEST_CASE("init draws are in range and on the weight grid") {
  Rng rng(1);
  KanLayer L(5, 5, GridSpec(-1, 1, 10, 2), Numerics::parse("8,2"));
  L.init_uniform(0.1, rng);
  bool any_nonzero = false;
  for (const double w : L.coefficients()) {
    REQUIRE(std::abs(w) <= 0.1 + 1.0 / 64);
    REQUIRE(std::ldexp(w, 6) == std::round(std::ldexp(w, 6)));
    any_nonzero |= w != 0.0;
  }
  CHECK(any_nonzero);
}

TEST_CASE("edge_value does not disturb the forward context") {
  auto L = single_edge();
  Rng rng(4);
  L.init_uniform(1.0, rng);
  const double x = 0.5;
  const auto y = L.forward(std::span(&x, 1));
  CHECK(L.edge_value(0, 0, 0.5) == doctest::Approx(y[0]));
  L.edge_value(0, 0, -0.9);
  CHECK(L.has_context());
}

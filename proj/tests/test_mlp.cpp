#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "kanol/mlp.hpp"
#include "kanol/rng.hpp"

using namespace kanol;

TEST_CASE("activation functions") {
  CHECK(activation_fn(Activation::relu, -0.5) == 0.0);
  CHECK(activation_fn(Activation::relu, 0.5) == 0.5);
  CHECK(activation_fn(Activation::hard_tanh, 2.0) == 1.0);
  CHECK(activation_fn(Activation::hard_tanh, 0.3) == 0.3);
  CHECK(activation_fn(Activation::hard_silu, 0.0) == 0.0);
  CHECK(activation_deriv(Activation::hard_silu, 0.0) == 0.5);
  CHECK(activation_fn(Activation::hard_silu, 4.0) == 4.0);
  CHECK(activation_fn(Activation::hard_silu, -4.0) == 0.0);
  CHECK(activation_fn(Activation::hard_silu, 1.5) == doctest::Approx(1.5 * 4.5 / 6));
  CHECK(activation_deriv(Activation::relu, 0.0) == 0.0);
  CHECK(activation_deriv(Activation::hard_tanh, 1.0) == 0.0);
  CHECK(activation_deriv(Activation::hard_tanh, -1.0) == 0.0);
  CHECK(parse_activation("hard_tanh") == Activation::hard_tanh);
  CHECK_THROWS_AS(parse_activation("tanh"), std::invalid_argument);
}

TEST_CASE("activation derivatives match central differences off the kinks") {
  Rng rng(2);
  for (const auto a : {Activation::relu, Activation::hard_tanh, Activation::hard_silu}) {
    for (int n = 0; n < 500; ++n) {
      const double z = rng.uniform(-5, 5);
      if (std::abs(z) < 1e-3 || std::abs(std::abs(z) - 1) < 1e-3 || std::abs(std::abs(z) - 3) < 1e-3)
        continue;
      const double h = 1e-6;
      const double fd = (activation_fn(a, z + h) - activation_fn(a, z - h)) / (2 * h);
      REQUIRE(fd == doctest::Approx(activation_deriv(a, z)).epsilon(1e-6));
    }
  }
}

TEST_CASE("zero parameters give zero output") {
  MlpLayer L(3, 4, Activation::relu, Numerics::floating());
  const std::vector<double> x{1, -2, 3};
  for (const double y : L.forward(x)) CHECK(y == 0.0);
}

TEST_CASE("1x1 linear layer example") {
  MlpLayer L(1, 1, Activation::linear, Numerics::floating());
  L.set_weight(0, 0, 0.5);
  L.set_bias(0, 0.25);
  const double x = 1.0;
  CHECK(L.forward(std::span(&x, 1))[0] == 0.75);

  MlpLayer U(1, 1, Activation::linear, Numerics::floating());
  U.set_weight(0, 0, 0.5);
  U.forward(std::span(&x, 1));
  const double g = 1.0;
  const auto dx = U.backward_update(std::span(&g, 1), 0.1);
  CHECK(U.weight(0, 0) == doctest::Approx(0.4));
  CHECK(U.bias(0) == doctest::Approx(-0.1));
  CHECK(dx[0] == 0.5);
}

TEST_CASE("zero gradient changes nothing") {
  Rng rng(6);
  MlpLayer L(3, 2, Activation::relu, Numerics::floating());
  L.init_uniform(rng);
  const double w = L.weight(1, 2), b = L.bias(0);
  const std::vector<double> x{0.3, 0.2, 0.1};
  L.forward(x);
  const std::vector<double> g{0.0, 0.0};
  for (const double d : L.backward_update(g, 0.5)) CHECK(d == 0.0);
  CHECK(L.weight(1, 2) == w);
  CHECK(L.bias(0) == b);
}

TEST_CASE("dead relu unit keeps its weights") {
  MlpLayer L(2, 2, Activation::relu, Numerics::floating());
  L.set_weight(0, 0, -1.0);
  L.set_weight(0, 1, -1.0);
  L.set_weight(1, 0, 1.0);
  L.set_weight(1, 1, 1.0);
  const std::vector<double> x{0.5, 0.5};
  L.forward(x);
  const std::vector<double> g{1.0, 1.0};
  L.backward_update(g, 0.1);
  CHECK(L.weight(0, 0) == -1.0);
  CHECK(L.weight(0, 1) == -1.0);
  CHECK(L.bias(0) == 0.0);
  CHECK(L.weight(1, 0) == doctest::Approx(0.95));
}

TEST_CASE("dense update touches every weight with nonzero input and delta") {
  Rng rng(8);
  MlpLayer L(4, 3, Activation::linear, Numerics::floating());
  L.init_uniform(rng);
  std::vector<double> before;
  for (int o = 0; o < 3; ++o)
    for (int i = 0; i < 4; ++i) before.push_back(L.weight(o, i));
  const std::vector<double> x{0.1, -0.2, 0.3, 0.4};
  L.forward(x);
  const std::vector<double> g{0.5, -0.5, 0.25};
  L.backward_update(g, 0.1);
  for (int o = 0; o < 3; ++o)
    for (int i = 0; i < 4; ++i) CHECK(L.weight(o, i) != before[static_cast<std::size_t>(o * 4 + i)]);
  CHECK(L.ops().update_mults == 12u);
  CHECK(L.ops().forward_mults == 12u);
}

TEST_CASE("gradients agree with finite differences") {
  // L = v . layer(x); check dL/dx and dL/dW against central differences.
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    MlpLayer L(3, 4, Activation::hard_silu, Numerics::floating());
    L.init_uniform(rng);
    std::vector<double> x(3), v(4);
    for (auto& e : x) e = rng.uniform(-2, 2);
    for (auto& e : v) e = rng.uniform(-1, 1);
    auto loss = [&](MlpLayer& M, std::span<const double> in) {
      const auto y = M.forward(in);
      double s = 0;
      for (std::size_t o = 0; o < y.size(); ++o) s += v[o] * y[o];
      return s;
    };
    const double h = 1e-6;
    MlpLayer stepped = L;
    stepped.forward(x);
    const auto dx = stepped.backward_update(v, 1.0);
    for (int i = 0; i < 3; ++i) {
      auto xp = x, xm = x;
      xp[static_cast<std::size_t>(i)] += h;
      xm[static_cast<std::size_t>(i)] -= h;
      MlpLayer a = L, b = L;
      const double fd = (loss(a, xp) - loss(b, xm)) / (2 * h);
      CHECK(dx[static_cast<std::size_t>(i)] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    }
    for (int o = 0; o < 4; ++o)
      for (int i = 0; i < 3; ++i) {
        MlpLayer a = L, b = L;
        a.set_weight(o, i, L.weight(o, i) + h);
        b.set_weight(o, i, L.weight(o, i) - h);
        const double fd = (loss(a, x) - loss(b, x)) / (2 * h);
        const double grad = L.weight(o, i) - stepped.weight(o, i);  // lr = 1
        CHECK(grad == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
      }
  }
}

TEST_CASE("first-layer weight gradient scales with the input") {
  Rng rng(14);
  MlpLayer L(3, 2, Activation::linear, Numerics::floating());
  L.init_uniform(rng);
  const std::vector<double> x{0.3, -0.8, 0.5};
  const std::vector<double> g{0.7, -0.2};
  auto grad_norm = [&](double c) {
    MlpLayer M = L;
    std::vector<double> xs = x;
    for (auto& e : xs) e *= c;
    M.forward(xs);
    M.backward_update(g, 1.0);
    double s = 0;
    for (int o = 0; o < 2; ++o)
      for (int i = 0; i < 3; ++i) s += std::pow(L.weight(o, i) - M.weight(o, i), 2);
    return std::sqrt(s);
  };
  const double base = grad_norm(1.0);
  for (const double c : {0.5, 2.0, 7.0, 100.0}) {
    CHECK(std::abs(grad_norm(c) / base - c) <= 1e-10 * c);
  }
}

TEST_CASE("init draws respect the fan-in bound") {
  Rng rng(3);
  MlpLayer L(16, 8, Activation::relu, Numerics::floating());
  L.init_uniform(rng);
  double mx = 0;
  for (int o = 0; o < 8; ++o) {
    for (int i = 0; i < 16; ++i) mx = std::max(mx, std::abs(L.weight(o, i)));
    CHECK(std::abs(L.bias(o)) <= 0.25);
  }
  CHECK(mx <= 0.25);
  CHECK(mx > 0.2);  // 128 draws reach near the bound
  MlpLayer nb(2, 2, Activation::relu, Numerics::floating(), false);
  CHECK(nb.param_count() == 4);
  CHECK_THROWS_AS(nb.set_bias(0, 1.0), std::logic_error);
}

TEST_CASE("backward needs a matching forward") {
  MlpLayer L(1, 1, Activation::linear, Numerics::floating());
  const double g = 1.0;
  CHECK_THROWS_AS(L.backward_update(std::span(&g, 1), 0.1), std::logic_error);
  const std::vector<double> x{1.0, 2.0};
  CHECK_THROWS_AS(L.forward(x), std::invalid_argument);
}

#include <doctest.h>

#include <sstream>
#include <stdexcept>

#include "kanol/trainer.hpp"

using namespace kanol;

namespace {

// Regression stream whose target is always zero.
class ZeroStream final : public Stream {
 public:
  explicit ZeroStream(int dim) : dim_(dim), rng_(1) {}
  std::optional<StreamSample> next() override {
    StreamSample s;
    s.t = t_++;
    for (int i = 0; i < dim_; ++i) s.x.push_back(rng_.uniform(-1, 1));
    s.target = {0.0};
    return s;
  }
  std::optional<std::size_t> length() const override { return std::nullopt; }
  Task task() const noexcept override { return Task::regression; }
  int input_dim() const noexcept override { return dim_; }

 private:
  int dim_;
  Rng rng_;
  std::size_t t_ = 0;
};

Model small_kan(std::vector<int> dims, int G = 10, double scale = 0.1) {
  KanSpec s;
  s.dims = std::move(dims);
  s.grid_size = G;
  s.init_scale = scale;
  s.grid_ranges = {{-5, 5}};
  return Model::kan(s, Numerics::parse("7,3"), 2);
}

Model small_mlp(std::vector<int> dims) {
  MlpSpec s;
  s.dims = std::move(dims);
  return Model::mlp(s, Numerics::parse("10,3"), 2);
}

XorStreamConfig xor_cfg() {
  XorStreamConfig c;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("a perfect model accumulates no regret") {
  Model m = small_kan({3, 1}, 10, 0.0);
  ZeroStream s(3);
  RunOptions o;
  o.steps = 300;
  o.lr = 0.5;
  const auto log = run_online(m, s, o);
  CHECK(log.final_regret() == 0.0);
  CHECK_FALSE(log.final_accuracy().has_value());
}

TEST_CASE("lr 0 leaves parameters untouched") {
  Model m = small_kan({1, 1}, 10, 0.5);
  const Model before = m;
  RegressionStream s(3);
  RunOptions o;
  o.steps = 1500;
  o.lr = 0.0;
  run_online(m, s, o);
  const auto a = m.kan_layers()[0].coefficients();
  const auto b = before.kan_layers()[0].coefficients();
  CHECK(std::equal(a.begin(), a.end(), b.begin()));
}

TEST_CASE("freezing stops updates from the given step") {
  Model m = small_kan({2, 3, 1});
  RotatingXorStream s(xor_cfg());
  RunOptions o;
  o.steps = 200;
  o.lr = 0.05;
  o.freeze_after = 100;
  std::vector<double> at100;
  o.before_step = [&](std::size_t t, Model& mm) {
    const auto c = mm.kan_layers()[0].coefficients();
    if (t == 100) at100.assign(c.begin(), c.end());
  };
  run_online(m, s, o);
  const auto c = m.kan_layers()[0].coefficients();
  CHECK(std::equal(c.begin(), c.end(), at100.begin()));
  CHECK(m.ops().update_mults == 100u * (2 * 3 + 3) * 3);
}

TEST_CASE("running accuracy examples") {
  bool all[20];
  std::fill(std::begin(all), std::end(all), true);
  for (const double a : running_accuracy(all, 0)) CHECK(a == 1.0);

  bool alt[20];
  for (int i = 0; i < 20; ++i) alt[i] = i % 2 == 0;
  const auto w2 = running_accuracy(alt, 2);
  for (std::size_t i = 1; i < 20; ++i) CHECK(w2[i] == 0.5);

  static bool step[3000];
  for (int i = 0; i < 3000; ++i) step[i] = i >= 1000;
  const auto ramp = running_accuracy(step, 1000);
  CHECK(ramp[999] == 0.0);
  for (std::size_t k = 1; k <= 1000; ++k) REQUIRE(ramp[999 + k] == doctest::Approx(k / 1000.0));
  CHECK(ramp[2999] == 1.0);

  const auto cum = running_accuracy(alt, 0);
  CHECK(cum[0] == 1.0);
  CHECK(cum[3] == 0.5);
}

TEST_CASE("step log matches the CSV and the invariants hold") {
  Model m = small_kan({2, 7, 1});
  RotatingXorStream s(xor_cfg());
  RunOptions o;
  o.steps = 500;
  o.lr = 0.05;
  o.window = 100;
  std::ostringstream csv;
  const auto log = run_online(m, s, o, &csv);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,loss,cum_regret,pred,correct,run_acc");
  std::size_t rows = 0;
  double prev = 0.0;
  for (const auto& r : log.steps) {
    REQUIRE(std::getline(in, line));
    std::ostringstream expect;
    write_step_row(expect, r);
    REQUIRE(line + "\n" == expect.str());
    REQUIRE(r.cum_regret >= prev);
    prev = r.cum_regret;
    REQUIRE(r.running_accuracy.has_value());
    REQUIRE((*r.running_accuracy >= 0.0 && *r.running_accuracy <= 1.0));
    REQUIRE((r.prediction == 1.0 || r.prediction == -1.0));
    ++rows;
  }
  CHECK(rows == 500);
  CHECK(log.meta.model == "kan[2,7,1]");
  CHECK(log.meta.param_count == 273);
}

TEST_CASE("identical inputs give identical runs") {
  auto once = [] {
    Model m = small_mlp({2, 20, 8, 5, 1});
    RotatingXorStream s(xor_cfg());
    RunOptions o;
    o.steps = 400;
    o.lr = 0.01;
    std::ostringstream csv;
    run_online(m, s, o, &csv);
    return csv.str();
  };
  CHECK(once() == once());
}

TEST_CASE("update multiplies per sample follow the cost model") {
  const std::size_t T = 100;
  RunOptions o;
  o.steps = T;
  o.lr = 0.1;  // must survive quantization to <7,3>; a zero lr skips backward
  {
    Model m = small_kan({2, 7, 1});
    RotatingXorStream s(xor_cfg());
    const auto log = run_online(m, s, o);
    CHECK(log.ops.update_mults == T * (2 * 7 + 7 * 1) * 3);
    CHECK(log.ops.forward_mults == T * (2 * 7 + 7 * 1) * 3);
  }
  {
    Model m = small_mlp({2, 20, 8, 5, 1});
    RotatingXorStream s(xor_cfg());
    const auto log = run_online(m, s, o);
    CHECK(log.ops.update_mults == T * (2 * 20 + 20 * 8 + 8 * 5 + 5));
  }
}

TEST_CASE("grid size changes storage but not per-sample update work") {
  RunOptions o;
  o.steps = 50;
  o.lr = 0.05;
  std::uint64_t ref = 0;
  std::size_t prev_params = 0;
  for (const int G : {5, 10, 20, 40}) {
    Model m = small_kan({2, 7, 1}, G);
    RotatingXorStream s(xor_cfg());
    const auto log = run_online(m, s, o);
    if (ref == 0) ref = log.ops.update_mults;
    CHECK(log.ops.update_mults == ref);
    CHECK(m.param_count() > prev_params);
    prev_params = m.param_count();
  }
}

TEST_CASE("run_online rejects mismatched runs") {
  RunOptions o;
  o.steps = 1501;
  Model m = small_kan({1, 1});
  RegressionStream r(1);
  CHECK_THROWS_AS(run_online(m, r, o), std::invalid_argument);
  o.steps = 10;
  Model two = small_kan({2, 1});
  RegressionStream r2(1);
  CHECK_THROWS_AS(run_online(two, r2, o), std::invalid_argument);
  Model wide = small_kan({2, 2});
  RotatingXorStream x(xor_cfg());
  CHECK_THROWS_AS(run_online(wide, x, o), std::invalid_argument);
}

TEST_CASE("run_parallel keeps job order and surfaces errors") {
  std::vector<std::function<RunLog()>> jobs;
  for (int k = 0; k < 8; ++k) {
    jobs.emplace_back([k] {
      RunLog l;
      l.meta.run_id = std::to_string(k);
      return l;
    });
  }
  const auto out = run_parallel(jobs, 3);
  for (int k = 0; k < 8; ++k) CHECK(out[static_cast<std::size_t>(k)].meta.run_id == std::to_string(k));
  jobs.emplace_back([]() -> RunLog { throw std::runtime_error("boom"); });
  CHECK_THROWS_AS(run_parallel(jobs, 4), std::runtime_error);
}

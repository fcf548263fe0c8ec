#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "kanol/kan.hpp"
#include "kanol/rng.hpp"
#include "kanol/verify.hpp"

using namespace kanol;

namespace {

VerifyOptions quick() {
  VerifyOptions o;
  o.bound_trials = 500;
  o.oracle_cases = 2000;
  o.fd_points = 20;
  return o;
}

}  // namespace

TEST_CASE("edge output stays inside its coefficient range in float mode") {
  Rng rng(77);
  for (int p = 0; p <= 3; ++p) {
    KanLayer L(1, 1, GridSpec(-1, 1, 7, p), Numerics::floating());
    for (int trial = 0; trial < 300; ++trial) {
      L.init_uniform(rng.uniform(0.01, 3.0), rng);
      const auto c = L.coefficients();
      const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
      const double x = rng.uniform(-1.5, 1.5);
      const double y = L.edge_value(0, 0, x);
      REQUIRE(y >= *lo - 1e-12);
      REQUIRE(y <= *hi + 1e-12);
    }
  }
}

TEST_CASE("individual checks pass on reduced budgets") {
  const auto o = quick();
  for (const auto& r : {check_partition_of_unity(), check_kan_gradient_bound(o),
                        check_mlp_gradient_scaling(o), check_cost_ratios(),
                        check_update_ops_grid_invariance(), check_finite_differences_kan(o),
                        check_finite_differences_mlp(o), check_fixed_point_oracle(o)}) {
    CAPTURE(r.id);
    CAPTURE(r.detail);
    CHECK(r.pass);
    CHECK_FALSE(r.detail.empty());
  }
}

TEST_CASE("activation bound check reports every format") {
  const auto r = check_activation_bounds(quick());
  CHECK(r.id == "activation_bounds");
  for (const char* f : {"float", "6,2", "7,3", "10,3", "16,4"}) {
    CAPTURE(f);
    CHECK(r.detail.find(f) != std::string::npos);
  }
}

TEST_CASE("check table lists each row and a total") {
  std::vector<CheckResult> rows{{"a", "first", true, "ok", 0.1}, {"b", "second", false, "bad", 0.2}};
  std::ostringstream out;
  print_check_table(out, rows);
  const auto text = out.str();
  CHECK(text.find("PASS") != std::string::npos);
  CHECK(text.find("FAIL") != std::string::npos);
  CHECK(text.find("first") != std::string::npos);
  CHECK(text.find("1/2") != std::string::npos);
}

#pragma once

// Executable checks of the spline/KAN/MLP properties the engine relies on.
// Each check returns a result row instead of throwing, so a suite run always
// completes and reports every item.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kanol {

struct CheckResult {
  std::string id;      // short key, e.g. "partition_of_unity"
  std::string title;
  bool pass = false;
  std::string detail;  // measured value vs threshold
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 0x5eed;
  std::size_t bound_trials = 10000;
  std::size_t oracle_cases = 100000;
  std::size_t fd_points = 100;
};

CheckResult check_partition_of_unity();
CheckResult check_activation_bounds(const VerifyOptions& opt);
CheckResult check_kan_gradient_bound(const VerifyOptions& opt);
CheckResult check_mlp_gradient_scaling(const VerifyOptions& opt);
CheckResult check_cost_ratios();
CheckResult check_update_ops_grid_invariance();
CheckResult check_finite_differences_kan(const VerifyOptions& opt);
CheckResult check_finite_differences_mlp(const VerifyOptions& opt);
CheckResult check_fixed_point_oracle(const VerifyOptions& opt);

std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt = {});

// Fixed-width table, one row per check, then a totals line.
void print_check_table(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace kanol

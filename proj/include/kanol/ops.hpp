#pragma once

#include <cstdint>

namespace kanol {

// Scalar multiply tallies for the update-cost model.
//   forward_mults  - multiplies in the forward pass
//   update_mults   - multiplies forming parameter gradients
//   backward_mults - multiplies forming the input gradient
struct OpCounter {
  std::uint64_t forward_mults = 0;
  std::uint64_t update_mults = 0;
  std::uint64_t backward_mults = 0;

  OpCounter& operator+=(const OpCounter& o) noexcept {
    forward_mults += o.forward_mults;
    update_mults += o.update_mults;
    backward_mults += o.backward_mults;
    return *this;
  }
  friend bool operator==(const OpCounter&, const OpCounter&) = default;
};

}  // namespace kanol

#pragma once

// Numeric mode shared by every layer: either IEEE double ("float", used for
// ablations and gradient checks) or three fixed-point datapath types.
//
// Values travel through the engine as doubles. In fixed mode every stored
// double is exactly representable in the format of its role, and each helper
// below evaluates one assignment statement exactly before rounding it once
// into the destination role.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "kanol/fixedpoint.hpp"

namespace kanol {

enum class Role { input, weight, output };

struct Operand {
  double value;
  Role role;
};

inline Operand in_v(double v) { return {v, Role::input}; }
inline Operand wt_v(double v) { return {v, Role::weight}; }
inline Operand out_v(double v) { return {v, Role::output}; }

class Numerics {
 public:
  // Widest format accepted for engine datapaths; keeps triple products of
  // operands within the 128-bit exact accumulator.
  static constexpr int kMaxEngineBits = 32;

  static Numerics floating() noexcept { return Numerics{}; }
  static Numerics fixed(FixedFormat input, FixedFormat weight, FixedFormat output);
  static Numerics fixed(FixedFormat all) { return fixed(all, all, all); }
  // "float" or "W,I".
  static Numerics parse(std::string_view text);

  bool is_float() const noexcept { return !formats_.has_value(); }
  const FixedFormat& format(Role role) const;
  // Quantization step of a role, 0 in float mode.
  double step(Role role) const noexcept;
  std::string describe() const;

  double quantize(double v, Role role) const;

  double mul(Role out, Operand a, Operand b) const;
  // acc + a*b
  double mul_add(Role out, Operand acc, Operand a, Operand b) const;
  // acc + a*b*c
  double mul_add(Role out, Operand acc, Operand a, Operand b, Operand c) const;
  // w - a*b
  double mul_sub(Role out, Operand w, Operand a, Operand b) const;
  // w - a*b*c
  double mul_sub(Role out, Operand w, Operand a, Operand b, Operand c) const;

 private:
  Numerics() = default;

  ExactValue exact(Operand x) const;
  double round(const ExactValue& v, Role role) const;

  std::optional<std::array<FixedFormat, 3>> formats_;
};

}  // namespace kanol

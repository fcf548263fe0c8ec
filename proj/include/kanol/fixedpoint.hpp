#pragma once

// Saturated two's-complement fixed-point numbers in <W,I> notation.
//
// W is the total width and I the integer width, both counting the sign bit,
// so a format holds mantissa * 2^-(W-I) for mantissas in [-2^(W-1), 2^(W-1)-1].
// All rounding is round-half-to-even followed by saturation.

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace kanol {

class FixedFormat {
 public:
  // Throws std::invalid_argument unless 1 <= integer_bits <= total_bits <= 64.
  FixedFormat(int total_bits, int integer_bits);

  // Parses "W,I" (whitespace around the numbers is allowed).
  static FixedFormat parse(std::string_view text);

  int total_bits() const noexcept { return total_bits_; }
  int integer_bits() const noexcept { return integer_bits_; }
  int frac_bits() const noexcept { return total_bits_ - integer_bits_; }

  double step() const noexcept;       // 2^-frac_bits
  double max_value() const noexcept;  // 2^(I-1) - step
  double min_value() const noexcept;  // -2^(I-1)
  std::int64_t max_mantissa() const noexcept;
  std::int64_t min_mantissa() const noexcept;

  std::string to_string() const;  // "W,I"

  friend bool operator==(const FixedFormat&, const FixedFormat&) = default;

 private:
  int total_bits_;
  int integer_bits_;
};

class FixedNum {
 public:
  explicit FixedNum(FixedFormat format) noexcept : mantissa_(0), format_(format) {}

  // Throws std::out_of_range if the mantissa does not fit the format.
  static FixedNum from_mantissa(std::int64_t mantissa, FixedFormat format);

  // Exact conversion of a value that is already a multiple of the format step
  // and inside its range. Throws std::invalid_argument otherwise.
  static FixedNum from_representable(double value, FixedFormat format);

  std::int64_t mantissa() const noexcept { return mantissa_; }
  const FixedFormat& format() const noexcept { return format_; }
  double to_real() const noexcept;

  friend bool operator==(const FixedNum&, const FixedNum&) = default;

 private:
  FixedNum(std::int64_t mantissa, FixedFormat format) noexcept
      : mantissa_(mantissa), format_(format) {}

  std::int64_t mantissa_;
  FixedFormat format_;

  friend class ExactValue;
};

// An exact dyadic rational mantissa * 2^-frac held in 128 bits. Sums and
// products of fixed-point operands stay exact until round_to() is called, which
// is how a single assignment statement in fixed-point hardware behaves.
// Operations throw std::overflow_error if 128 bits are not enough.
class ExactValue {
 public:
  ExactValue() noexcept = default;
  ExactValue(const FixedNum& x) noexcept;  // NOLINT(google-explicit-constructor)

  static ExactValue from_double(double value);  // value must be finite

  __int128 mantissa() const noexcept { return mantissa_; }
  int frac_bits() const noexcept { return frac_; }

  FixedNum round_to(const FixedFormat& format) const noexcept;

  friend ExactValue operator+(const ExactValue& a, const ExactValue& b);
  friend ExactValue operator-(const ExactValue& a, const ExactValue& b);
  friend ExactValue operator*(const ExactValue& a, const ExactValue& b);
  friend ExactValue operator-(const ExactValue& a);

 private:
  ExactValue(__int128 mantissa, int frac) noexcept : mantissa_(mantissa), frac_(frac) {}

  __int128 mantissa_ = 0;
  int frac_ = 0;
};

// clip(step * round_half_even(z / step), min, max). Throws std::domain_error for
// non-finite z.
FixedNum quantize(double z, const FixedFormat& format);

FixedNum fx_add(const FixedNum& a, const FixedNum& b, const FixedFormat& out);
FixedNum fx_sub(const FixedNum& a, const FixedNum& b, const FixedFormat& out);
FixedNum fx_mul(const FixedNum& a, const FixedNum& b, const FixedFormat& out);

inline double to_real(const FixedNum& a) noexcept { return a.to_real(); }

}  // namespace kanol

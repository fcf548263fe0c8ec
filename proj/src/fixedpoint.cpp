#include "kanol/fixedpoint.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace kanol {

namespace {

using i128 = __int128;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s, std::string_view whole) {
  s = trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("bad fixed-point format '" + std::string(whole) +
                                "', expected \"W,I\"");
  }
  return v;
}

bool shl_checked(i128 m, int k, i128& out) {
  if (m == 0) {
    out = 0;
    return true;
  }
  if (k >= 127) return false;
  const i128 shifted = m << k;
  if ((shifted >> k) != m) return false;
  out = shifted;
  return true;
}

// floor(m / 2^shift) rounded half to even, for shift >= 1.
i128 shr_round_half_even(i128 m, int shift) {
  if (shift >= 128) return 0;
  if (shift == 127) {
    const i128 half = static_cast<i128>(1) << 126;
    if (m > half) return 1;
    if (m < -half) return -1;
    return 0;
  }
  const i128 q = m >> shift;
  const i128 rem = m - (q << shift);
  const i128 half = static_cast<i128>(1) << (shift - 1);
  if (rem > half || (rem == half && (q & 1) != 0)) return q + 1;
  return q;
}

}  // namespace

FixedFormat::FixedFormat(int total_bits, int integer_bits)
    : total_bits_(total_bits), integer_bits_(integer_bits) {
  if (integer_bits < 1 || integer_bits > total_bits || total_bits > 64) {
    throw std::invalid_argument("invalid fixed-point format <" + std::to_string(total_bits) +
                                "," + std::to_string(integer_bits) +
                                ">: need 1 <= I <= W <= 64");
  }
}

FixedFormat FixedFormat::parse(std::string_view text) {
  const auto comma = text.find(',');
  if (comma == std::string_view::npos) {
    throw std::invalid_argument("bad fixed-point format '" + std::string(text) +
                                "', expected \"W,I\"");
  }
  return {parse_int(text.substr(0, comma), text), parse_int(text.substr(comma + 1), text)};
}

double FixedFormat::step() const noexcept { return std::ldexp(1.0, -frac_bits()); }

std::int64_t FixedFormat::max_mantissa() const noexcept {
  return static_cast<std::int64_t>((static_cast<i128>(1) << (total_bits_ - 1)) - 1);
}

std::int64_t FixedFormat::min_mantissa() const noexcept {
  return static_cast<std::int64_t>(-(static_cast<i128>(1) << (total_bits_ - 1)));
}

double FixedFormat::max_value() const noexcept {
  return std::ldexp(static_cast<double>(max_mantissa()), -frac_bits());
}

double FixedFormat::min_value() const noexcept { return std::ldexp(-1.0, integer_bits_ - 1); }

std::string FixedFormat::to_string() const {
  return std::to_string(total_bits_) + "," + std::to_string(integer_bits_);
}

FixedNum FixedNum::from_mantissa(std::int64_t mantissa, FixedFormat format) {
  if (mantissa < format.min_mantissa() || mantissa > format.max_mantissa()) {
    throw std::out_of_range("mantissa " + std::to_string(mantissa) + " does not fit <" +
                            format.to_string() + ">");
  }
  return {mantissa, format};
}

FixedNum FixedNum::from_representable(double value, FixedFormat format) {
  const double scaled = std::ldexp(value, format.frac_bits());
  if (!std::isfinite(scaled) || scaled != std::trunc(scaled) ||
      scaled < static_cast<double>(format.min_mantissa()) ||
      scaled > static_cast<double>(format.max_mantissa())) {
    throw std::invalid_argument("value " + std::to_string(value) + " is not representable in <" +
                                format.to_string() + ">");
  }
  return {static_cast<std::int64_t>(scaled), format};
}

double FixedNum::to_real() const noexcept {
  return std::ldexp(static_cast<double>(mantissa_), -format_.frac_bits());
}

ExactValue::ExactValue(const FixedNum& x) noexcept
    : mantissa_(x.mantissa()), frac_(x.format().frac_bits()) {}

ExactValue ExactValue::from_double(double value) {
  if (!std::isfinite(value)) throw std::domain_error("non-finite value has no exact form");
  if (value == 0.0) return {};
  int exponent = 0;
  const double m = std::frexp(value, &exponent);
  auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
  int frac = 53 - exponent;
  const int tz = __builtin_ctzll(static_cast<unsigned long long>(mant));
  mant >>= tz;
  frac -= tz;
  return {mant, frac};
}

FixedNum ExactValue::round_to(const FixedFormat& format) const noexcept {
  const int target = format.frac_bits();
  const i128 lo = format.min_mantissa();
  const i128 hi = format.max_mantissa();
  i128 q = 0;
  if (target >= frac_) {
    if (!shl_checked(mantissa_, target - frac_, q)) q = mantissa_ < 0 ? lo : hi;
  } else {
    q = shr_round_half_even(mantissa_, frac_ - target);
  }
  if (q < lo) q = lo;
  if (q > hi) q = hi;
  return {static_cast<std::int64_t>(q), format};
}

ExactValue operator+(const ExactValue& a, const ExactValue& b) {
  const int frac = std::max(a.frac_, b.frac_);
  i128 ma = 0;
  i128 mb = 0;
  i128 sum = 0;
  if (!shl_checked(a.mantissa_, frac - a.frac_, ma) ||
      !shl_checked(b.mantissa_, frac - b.frac_, mb) || __builtin_add_overflow(ma, mb, &sum)) {
    throw std::overflow_error("exact fixed-point sum exceeds 128 bits");
  }
  return {sum, frac};
}

ExactValue operator-(const ExactValue& a) {
  if (a.mantissa_ == std::numeric_limits<i128>::min()) {
    throw std::overflow_error("exact fixed-point negation exceeds 128 bits");
  }
  return {-a.mantissa_, a.frac_};
}

ExactValue operator-(const ExactValue& a, const ExactValue& b) { return a + (-b); }

ExactValue operator*(const ExactValue& a, const ExactValue& b) {
  i128 prod = 0;
  if (__builtin_mul_overflow(a.mantissa_, b.mantissa_, &prod)) {
    throw std::overflow_error("exact fixed-point product exceeds 128 bits");
  }
  return {prod, a.frac_ + b.frac_};
}

FixedNum quantize(double z, const FixedFormat& format) {
  if (!std::isfinite(z)) throw std::domain_error("cannot quantize a non-finite value");
  return ExactValue::from_double(z).round_to(format);
}

FixedNum fx_add(const FixedNum& a, const FixedNum& b, const FixedFormat& out) {
  return (ExactValue(a) + ExactValue(b)).round_to(out);
}

FixedNum fx_sub(const FixedNum& a, const FixedNum& b, const FixedFormat& out) {
  return (ExactValue(a) - ExactValue(b)).round_to(out);
}

FixedNum fx_mul(const FixedNum& a, const FixedNum& b, const FixedFormat& out) {
  return (ExactValue(a) * ExactValue(b)).round_to(out);
}

}  // namespace kanol

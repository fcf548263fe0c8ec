#include "kanol/numerics.hpp"

#include <stdexcept>

namespace kanol {

namespace {

std::size_t slot(Role role) { return static_cast<std::size_t>(role); }

}  // namespace

Numerics Numerics::fixed(FixedFormat input, FixedFormat weight, FixedFormat output) {
  for (const auto& f : {input, weight, output}) {
    if (f.total_bits() > kMaxEngineBits) {
      throw std::invalid_argument("engine formats are limited to " +
                                  std::to_string(kMaxEngineBits) + " bits, got <" +
                                  f.to_string() + ">");
    }
  }
  Numerics n;
  n.formats_ = std::array<FixedFormat, 3>{input, weight, output};
  return n;
}

Numerics Numerics::parse(std::string_view text) {
  if (text == "float") return floating();
  return fixed(FixedFormat::parse(text));
}

const FixedFormat& Numerics::format(Role role) const {
  if (!formats_) throw std::logic_error("float mode has no fixed-point format");
  return (*formats_)[slot(role)];
}

double Numerics::step(Role role) const noexcept {
  return formats_ ? (*formats_)[slot(role)].step() : 0.0;
}

std::string Numerics::describe() const {
  if (!formats_) return "float";
  const auto& f = *formats_;
  if (f[0] == f[1] && f[1] == f[2]) return f[0].to_string();
  return f[0].to_string() + "/" + f[1].to_string() + "/" + f[2].to_string();
}

double Numerics::quantize(double v, Role role) const {
  if (!formats_) return v;
  return kanol::quantize(v, format(role)).to_real();
}

ExactValue Numerics::exact(Operand x) const {
  return FixedNum::from_representable(x.value, format(x.role));
}

double Numerics::round(const ExactValue& v, Role role) const {
  return v.round_to(format(role)).to_real();
}

double Numerics::mul(Role out, Operand a, Operand b) const {
  if (!formats_) return a.value * b.value;
  return round(exact(a) * exact(b), out);
}

double Numerics::mul_add(Role out, Operand acc, Operand a, Operand b) const {
  if (!formats_) return acc.value + a.value * b.value;
  return round(exact(acc) + exact(a) * exact(b), out);
}

double Numerics::mul_add(Role out, Operand acc, Operand a, Operand b, Operand c) const {
  if (!formats_) return acc.value + a.value * b.value * c.value;
  return round(exact(acc) + exact(a) * exact(b) * exact(c), out);
}

double Numerics::mul_sub(Role out, Operand w, Operand a, Operand b) const {
  if (!formats_) return w.value - a.value * b.value;
  return round(exact(w) - exact(a) * exact(b), out);
}

double Numerics::mul_sub(Role out, Operand w, Operand a, Operand b, Operand c) const {
  if (!formats_) return w.value - a.value * b.value * c.value;
  return round(exact(w) - exact(a) * exact(b) * exact(c), out);
}

}  // namespace kanol

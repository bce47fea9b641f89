#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deeplog {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

enum class ValueKind : std::uint8_t { Boolean, Real, Fuzzy, Dual };

std::string to_string(ValueKind k);

// Counts fuzzy clamps whose magnitude exceeded the drift tolerance (1e-9).
std::uint64_t fuzzy_clamp_events() noexcept;
void reset_fuzzy_clamp_events() noexcept;

/// A label value: boolean, nonnegative real, fuzzy score in [0,1], or a
/// dual number (primal, tangent) for forward-mode derivative checks.
struct Value {
  ValueKind kind = ValueKind::Real;
  double a = 0.0;  // boolean: 0/1; real/fuzzy: value; dual: primal
  double b = 0.0;  // dual: tangent

  static Value boolean(bool v) { return Value{ValueKind::Boolean, v ? 1.0 : 0.0, 0.0}; }
  static Value real(double v) { return Value{ValueKind::Real, v, 0.0}; }
  static Value fuzzy(double v);
  static Value dual(double primal, double tangent) {
    return Value{ValueKind::Dual, primal, tangent};
  }

  bool truthy() const { return a != 0.0; }
  std::string str() const;
};

bool approx_equal(const Value& x, const Value& y, double tol = 1e-9);

}  // namespace deeplog

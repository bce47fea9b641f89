#include "deeplog/value.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace deeplog {

namespace {
std::atomic<std::uint64_t> g_clamp_events{0};
}

std::uint64_t fuzzy_clamp_events() noexcept { return g_clamp_events.load(); }
void reset_fuzzy_clamp_events() noexcept { g_clamp_events.store(0); }

std::string to_string(ValueKind k) {
  switch (k) {
    case ValueKind::Boolean: return "boolean";
    case ValueKind::Real: return "real";
    case ValueKind::Fuzzy: return "fuzzy";
    case ValueKind::Dual: return "dual";
  }
  return "?";
}

Value Value::fuzzy(double v) {
  if (v < 0.0 || v > 1.0) {
    double clamped = v < 0.0 ? 0.0 : 1.0;
    if (std::abs(v - clamped) > 1e-9) g_clamp_events.fetch_add(1);
    v = clamped;
  }
  return Value{ValueKind::Fuzzy, v, 0.0};
}

std::string Value::str() const {
  std::ostringstream os;
  switch (kind) {
    case ValueKind::Boolean: os << (truthy() ? "true" : "false"); break;
    case ValueKind::Real: os << a; break;
    case ValueKind::Fuzzy: os << a; break;
    case ValueKind::Dual: os << "(" << a << ", " << b << ")"; break;
  }
  return os.str();
}

bool approx_equal(const Value& x, const Value& y, double tol) {
  if (x.kind != y.kind) return false;
  if (x.kind == ValueKind::Boolean) return x.truthy() == y.truthy();
  if (x.kind == ValueKind::Dual)
    return std::abs(x.a - y.a) <= tol && std::abs(x.b - y.b) <= tol;
  return std::abs(x.a - y.a) <= tol;
}

}  // namespace deeplog

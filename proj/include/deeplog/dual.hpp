#pragma once

#include <cmath>

namespace deeplog {

/// Forward-mode scalar: value and tangent. Tie-breaking in min/max follows
/// the reverse-mode convention (first operand wins ties) so both
/// differentiation modes pick the same subgradient.
struct Dual {
  double val = 0.0;
  double dot = 0.0;

  Dual() = default;
  Dual(double v) : val(v) {}
  Dual(double v, double d) : val(v), dot(d) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.val + b.val, a.dot + b.dot}; }
inline Dual operator-(Dual a, Dual b) { return {a.val - b.val, a.dot - b.dot}; }
inline Dual operator-(Dual a) { return {-a.val, -a.dot}; }
inline Dual operator*(Dual a, Dual b) {
  return {a.val * b.val, a.val * b.dot + a.dot * b.val};
}
inline Dual operator/(Dual a, Dual b) {
  double inv = 1.0 / b.val;
  return {a.val * inv, (a.dot - a.val * inv * b.dot) * inv};
}

inline Dual exp(Dual a) {
  double e = std::exp(a.val);
  return {e, e * a.dot};
}
inline Dual tanh(Dual a) {
  double t = std::tanh(a.val);
  return {t, (1.0 - t * t) * a.dot};
}
inline Dual fmin(Dual a, Dual b) { return a.val <= b.val ? a : b; }
inline Dual fmax(Dual a, Dual b) { return a.val >= b.val ? a : b; }
/// max(0, a): the constant branch wins the tie, with zero tangent.
inline Dual relu_floor(Dual a) { return a.val > 0.0 ? a : Dual{0.0, 0.0}; }
/// min(1, a): the constant branch wins the tie.
inline Dual one_ceiling(Dual a) { return a.val < 1.0 ? a : Dual{1.0, 0.0}; }

// double overloads so templated evaluation reads uniformly
inline double exp(double a) { return std::exp(a); }
inline double tanh(double a) { return std::tanh(a); }
inline double fmin(double a, double b) { return a <= b ? a : b; }
inline double fmax(double a, double b) { return a >= b ? a : b; }
inline double relu_floor(double a) { return a > 0.0 ? a : 0.0; }
inline double one_ceiling(double a) { return a < 1.0 ? a : 1.0; }

}  // namespace deeplog

#pragma once

#include <cmath>
#include <ostream>

namespace nakano {

/// Second-order hyper-dual number a + b·e1 + c·e2 + d·e1e2 with e1² = e2² = 0.
///
/// Seeding a coordinate with (x, u_i, v_i, 0) propagates the value, the
/// directional derivatives along u and v, and the mixed second derivative
/// u^T (∇²f) v through any composition of the operations below.
struct HyperDual {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d12 = 0.0;

  constexpr HyperDual() = default;
  constexpr HyperDual(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
  constexpr HyperDual(double v, double a, double b, double ab) : value(v), d1(a), d2(b), d12(ab) {}

  constexpr bool operator==(const HyperDual&) const = default;

  constexpr HyperDual& operator+=(const HyperDual& o) {
    value += o.value;
    d1 += o.d1;
    d2 += o.d2;
    d12 += o.d12;
    return *this;
  }
  constexpr HyperDual& operator-=(const HyperDual& o) {
    value -= o.value;
    d1 -= o.d1;
    d2 -= o.d2;
    d12 -= o.d12;
    return *this;
  }
  constexpr HyperDual& operator*=(const HyperDual& o) { return *this = *this * o; }
  constexpr HyperDual& operator/=(const HyperDual& o) { return *this = *this / o; }

  friend constexpr HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
  friend constexpr HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }
  friend constexpr HyperDual operator-(const HyperDual& a) { return {-a.value, -a.d1, -a.d2, -a.d12}; }

  friend constexpr HyperDual operator*(const HyperDual& a, const HyperDual& b) {
    return {a.value * b.value, a.d1 * b.value + a.value * b.d1, a.d2 * b.value + a.value * b.d2,
            a.d12 * b.value + a.d1 * b.d2 + a.d2 * b.d1 + a.value * b.d12};
  }

  friend constexpr HyperDual operator/(const HyperDual& a, const HyperDual& b) {
    return a * reciprocal(b);
  }

  /// Applies a scalar function given f(x), f'(x), f''(x) at x = value.
  constexpr HyperDual chain(double f, double df, double ddf) const {
    return {f, df * d1, df * d2, df * d12 + ddf * d1 * d2};
  }

  friend constexpr HyperDual reciprocal(const HyperDual& a) {
    const double inv = 1.0 / a.value;
    return a.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
  }
};

inline HyperDual exp(const HyperDual& a) {
  const double e = std::exp(a.value);
  return a.chain(e, e, e);
}

/// Natural log; caller guarantees a.value > 0.
inline HyperDual log(const HyperDual& a) {
  return a.chain(std::log(a.value), 1.0 / a.value, -1.0 / (a.value * a.value));
}

/// Square root; caller guarantees a.value > 0.
inline HyperDual sqrt(const HyperDual& a) {
  const double s = std::sqrt(a.value);
  return a.chain(s, 0.5 / s, -0.25 / (s * a.value));
}

inline HyperDual sin(const HyperDual& a) {
  const double s = std::sin(a.value);
  return a.chain(s, std::cos(a.value), -s);
}

inline HyperDual cos(const HyperDual& a) {
  const double c = std::cos(a.value);
  return a.chain(c, -std::sin(a.value), -c);
}

/// a^p for a constant real exponent. For non-integer p the base must be positive.
inline HyperDual pow(const HyperDual& a, double p) {
  if (p == 0.0) return HyperDual(1.0);
  if (p == 1.0) return a;
  if (p == 2.0) return a * a;
  const double x = a.value;
  // Integer p > 2 at the origin: all derivatives through second order vanish.
  if (x == 0.0) return a.chain(0.0, 0.0, 0.0);
  const double f = std::pow(x, p);
  return a.chain(f, p * f / x, p * (p - 1.0) * f / (x * x));
}

inline std::ostream& operator<<(std::ostream& os, const HyperDual& h) {
  return os << '(' << h.value << ", " << h.d1 << ", " << h.d2 << ", " << h.d12 << ')';
}

}  // namespace nakano

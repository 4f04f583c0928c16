#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <type_traits>

namespace graphsolver {

/// Unevaluated sum hi + lo of two doubles, about 106 significant bits.
/// Used as an Eigen scalar for high-precision reference evaluations.
struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;

  constexpr DoubleDouble() = default;
  template <typename T, typename = std::enable_if_t<std::is_arithmetic_v<T>>>
  constexpr DoubleDouble(T v) : hi(static_cast<double>(v)) {
    if constexpr (std::is_integral_v<T> && sizeof(T) > 4) lo = static_cast<double>(v - static_cast<T>(hi));
  }
  constexpr DoubleDouble(double h, double l) : hi(h), lo(l) {}

  explicit operator double() const { return hi + lo; }
  explicit operator long double() const { return static_cast<long double>(hi) + static_cast<long double>(lo); }

  static DoubleDouble quick_two_sum(double a, double b) {
    const double s = a + b;
    return {s, b - (s - a)};
  }
  static DoubleDouble two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
  }

  friend DoubleDouble operator+(const DoubleDouble& a, const DoubleDouble& b) {
    DoubleDouble s = two_sum(a.hi, b.hi);
    const DoubleDouble t = two_sum(a.lo, b.lo);
    s.lo += t.hi;
    s = quick_two_sum(s.hi, s.lo);
    s.lo += t.lo;
    return quick_two_sum(s.hi, s.lo);
  }
  friend DoubleDouble operator-(const DoubleDouble& a) { return {-a.hi, -a.lo}; }
  friend DoubleDouble operator-(const DoubleDouble& a, const DoubleDouble& b) { return a + (-b); }
  friend DoubleDouble operator*(const DoubleDouble& a, const DoubleDouble& b) {
    const double p = a.hi * b.hi;
    double e = std::fma(a.hi, b.hi, -p);
    e += a.hi * b.lo + a.lo * b.hi;
    return quick_two_sum(p, e);
  }
  friend DoubleDouble operator/(const DoubleDouble& a, const DoubleDouble& b) {
    const double q1 = a.hi / b.hi;
    DoubleDouble r = a - b * DoubleDouble(q1);
    const double q2 = r.hi / b.hi;
    r = r - b * DoubleDouble(q2);
    const double q3 = r.hi / b.hi;
    return quick_two_sum(q1, q2) + DoubleDouble(q3);
  }

  DoubleDouble& operator+=(const DoubleDouble& b) { return *this = *this + b; }
  DoubleDouble& operator-=(const DoubleDouble& b) { return *this = *this - b; }
  DoubleDouble& operator*=(const DoubleDouble& b) { return *this = *this * b; }
  DoubleDouble& operator/=(const DoubleDouble& b) { return *this = *this / b; }

  friend bool operator==(const DoubleDouble& a, const DoubleDouble& b) { return a.hi == b.hi && a.lo == b.lo; }
  friend bool operator!=(const DoubleDouble& a, const DoubleDouble& b) { return !(a == b); }
  friend bool operator<(const DoubleDouble& a, const DoubleDouble& b) {
    return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo);
  }
  friend bool operator>(const DoubleDouble& a, const DoubleDouble& b) { return b < a; }
  friend bool operator<=(const DoubleDouble& a, const DoubleDouble& b) { return !(b < a); }
  friend bool operator>=(const DoubleDouble& a, const DoubleDouble& b) { return !(a < b); }
};

inline DoubleDouble sqrt(const DoubleDouble& a) {
  if (a.hi <= 0.0) return DoubleDouble(std::sqrt(a.hi));
  const double x = std::sqrt(a.hi);
  const DoubleDouble y(x);
  return y + DoubleDouble((a - y * y).hi * (0.5 / x));
}
inline DoubleDouble abs(const DoubleDouble& a) { return a.hi < 0.0 ? -a : a; }
inline bool isfinite(const DoubleDouble& a) { return std::isfinite(a.hi); }
inline bool isnan(const DoubleDouble& a) { return std::isnan(a.hi); }
inline bool isinf(const DoubleDouble& a) { return std::isinf(a.hi); }

}  // namespace graphsolver

namespace Eigen {

template <>
struct NumTraits<graphsolver::DoubleDouble> : GenericNumTraits<graphsolver::DoubleDouble> {
  using Real = graphsolver::DoubleDouble;
  using NonInteger = graphsolver::DoubleDouble;
  using Literal = graphsolver::DoubleDouble;
  using Nested = graphsolver::DoubleDouble;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 10,
    MulCost = 6
  };
  static Real epsilon() { return Real(0x1.0p-104); }
  static Real dummy_precision() { return Real(1e-28); }
  static Real highest() { return Real(std::numeric_limits<double>::max()); }
  static Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static int digits10() { return 31; }
  static int digits() { return 106; }
};

}  // namespace Eigen

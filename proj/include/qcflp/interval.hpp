#pragma once

// Real intervals with independently open or closed endpoints.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qcflp/qual_domain.hpp"

namespace qcflp {

struct Interval {
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  double lo = -kInf;
  double hi = kInf;
  bool lo_open = true;
  bool hi_open = true;

  static Interval entire() { return {}; }
  static Interval point(double x) { return {x, x, false, false}; }
  static Interval closed(double a, double b) { return {a, b, false, false}; }
  static Interval make(double a, bool a_open, double b, bool b_open) {
    Interval r{a, b, a_open || std::isinf(a), b_open || std::isinf(b)};
    return r;
  }
  static Interval at_least(double a, bool open = false) { return make(a, open, kInf, true); }
  static Interval at_most(double b, bool open = false) { return make(-kInf, true, b, open); }
  static Interval empty_set() { return {1.0, 0.0, false, false}; }

  bool empty() const {
    if (std::isnan(lo) || std::isnan(hi)) return true;
    return lo > hi || (lo == hi && (lo_open || hi_open));
  }
  bool is_point() const { return !empty() && lo == hi; }
  bool contains(double x) const {
    if (x < lo || (x == lo && lo_open)) return false;
    if (x > hi || (x == hi && hi_open)) return false;
    return true;
  }
  bool contains_zero() const { return contains(0.0); }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }

  friend bool operator==(const Interval&, const Interval&) = default;
};

inline Interval intersect(const Interval& a, const Interval& b) {
  Interval r = a;
  if (b.lo > r.lo || (b.lo == r.lo && b.lo_open)) {
    r.lo = b.lo;
    r.lo_open = b.lo_open || (b.lo == a.lo && a.lo_open);
  }
  if (b.hi < r.hi || (b.hi == r.hi && b.hi_open)) {
    r.hi = b.hi;
    r.hi_open = b.hi_open || (b.hi == a.hi && a.hi_open);
  }
  // bounds that cross by rounding noise only (0.72 / 0.9 > 0.8) meet at a point
  if (r.lo > r.hi && std::isfinite(r.lo) && std::isfinite(r.hi) && !r.lo_open && !r.hi_open &&
      r.lo - r.hi <= 1e-12 * std::max(1.0, std::fabs(r.hi))) {
    r.lo = r.hi;
  }
  return r;
}

/// Smallest interval containing both.
inline Interval hull(const Interval& a, const Interval& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Interval r;
  if (a.lo < b.lo || (a.lo == b.lo && !a.lo_open)) {
    r.lo = a.lo;
    r.lo_open = a.lo_open;
  } else {
    r.lo = b.lo;
    r.lo_open = b.lo_open;
  }
  if (a.hi > b.hi || (a.hi == b.hi && !a.hi_open)) {
    r.hi = a.hi;
    r.hi_open = a.hi_open;
  } else {
    r.hi = b.hi;
    r.hi_open = b.hi_open;
  }
  return r;
}

inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo, a.hi_open, a.lo_open}; }

inline Interval operator+(const Interval& a, const Interval& b) {
  if (a.empty() || b.empty()) return Interval::empty_set();
  return Interval::make(a.lo + b.lo, a.lo_open || b.lo_open, a.hi + b.hi, a.hi_open || b.hi_open);
}

inline Interval operator-(const Interval& a, const Interval& b) { return a + (-b); }

namespace detail {

struct Bound {
  double x;
  bool open;
};

inline Bound mul_bound(double a, bool a_open, double b, bool b_open) {
  if ((a == 0.0 && !a_open) || (b == 0.0 && !b_open)) return {0.0, false};
  if (a == 0.0 || b == 0.0) return {0.0, true};
  return {a * b, a_open || b_open};
}

}  // namespace detail

inline Interval operator*(const Interval& a, const Interval& b) {
  if (a.empty() || b.empty()) return Interval::empty_set();
  detail::Bound c[4] = {
      detail::mul_bound(a.lo, a.lo_open, b.lo, b.lo_open),
      detail::mul_bound(a.lo, a.lo_open, b.hi, b.hi_open),
      detail::mul_bound(a.hi, a.hi_open, b.lo, b.lo_open),
      detail::mul_bound(a.hi, a.hi_open, b.hi, b.hi_open),
  };
  detail::Bound lo = c[0], hi = c[0];
  for (const auto& x : c) {
    if (x.x < lo.x || (x.x == lo.x && !x.open)) lo = x;
    if (x.x > hi.x || (x.x == hi.x && !x.open)) hi = x;
  }
  return Interval::make(lo.x, lo.open, hi.x, hi.open);
}

/// {1/y | y in b}, hulled; entire when b straddles zero.
inline Interval reciprocal(const Interval& b) {
  if (b.empty()) return Interval::empty_set();
  bool neg = b.lo < 0.0;
  bool pos = b.hi > 0.0;
  if (b.contains_zero() || (neg && pos)) return Interval::entire();
  if (b.lo == 0.0 && b.hi == 0.0) return Interval::empty_set();
  auto inv = [](double x, bool positive_side) {
    if (x == 0.0) return positive_side ? Interval::kInf : -Interval::kInf;
    return 1.0 / x;
  };
  if (!neg) return Interval::make(inv(b.hi, true), b.hi_open, inv(b.lo, true), b.lo_open);
  return Interval::make(inv(b.hi, false), b.hi_open, inv(b.lo, false), b.lo_open);
}

inline Interval operator/(const Interval& a, const Interval& b) { return a * reciprocal(b); }

inline std::string to_string(const Interval& i) {
  if (i.empty()) return "{}";
  auto num = [](double x) {
    if (std::isinf(x)) return std::string(x < 0 ? "-inf" : "inf");
    return format_real(x);
  };
  return std::string(i.lo_open ? "(" : "[") + num(i.lo) + ", " + num(i.hi) + (i.hi_open ? ")" : "]");
}

}  // namespace qcflp

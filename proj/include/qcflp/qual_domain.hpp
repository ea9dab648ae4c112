#pragma once

// Qualification domains: lattices <D, <=, bottom, top, attenuation>.
// Built in are the certainty domain U = [0,1] (multiplication as
// attenuation) and binary cartesian products of domains.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace qcflp {

/// Absolute tolerance used when comparing qualification reals.
inline constexpr double kQualEps = 1e-9;

/// Shortest decimal text that reads back as the same double.
inline std::string format_real(double x) {
  if (x == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

class QualError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A qualification value: a real in [0,1] or a pair of values.
class QualValue {
 public:
  QualValue() = default;

  static QualValue real(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw QualError("qualification value out of [0,1]: " + std::to_string(x));
    }
    QualValue v;
    v.x_ = x;
    return v;
  }

  static QualValue pair(QualValue l, QualValue r) {
    QualValue v;
    v.pair_ = std::make_shared<const std::pair<QualValue, QualValue>>(std::move(l), std::move(r));
    return v;
  }

  bool is_real() const { return pair_ == nullptr; }
  bool is_pair() const { return pair_ != nullptr; }

  double value() const {
    if (!is_real()) throw QualError("expected a real qualification value, got a pair");
    return x_;
  }
  const QualValue& left() const {
    if (!is_pair()) throw QualError("expected a pair qualification value");
    return pair_->first;
  }
  const QualValue& right() const {
    if (!is_pair()) throw QualError("expected a pair qualification value");
    return pair_->second;
  }

  friend bool operator==(const QualValue& a, const QualValue& b) {
    if (a.is_real() != b.is_real()) return false;
    if (a.is_real()) return a.x_ == b.x_;
    return a.left() == b.left() && a.right() == b.right();
  }

  /// Equality up to kQualEps on every real component.
  friend bool approx_equal(const QualValue& a, const QualValue& b, double eps = kQualEps) {
    if (a.is_real() != b.is_real()) return false;
    if (a.is_real()) return std::fabs(a.x_ - b.x_) <= eps;
    return approx_equal(a.left(), b.left(), eps) && approx_equal(a.right(), b.right(), eps);
  }

 private:
  double x_ = 1.0;
  std::shared_ptr<const std::pair<QualValue, QualValue>> pair_;
};

inline std::string to_string(const QualValue& v);

/// Descriptor of a qualification domain. Immutable; cheap to copy.
class QualDomain {
 public:
  static QualDomain unit() { return QualDomain{}; }

  static QualDomain product(QualDomain l, QualDomain r) {
    QualDomain d;
    d.factors_ = std::make_shared<const std::pair<QualDomain, QualDomain>>(std::move(l), std::move(r));
    return d;
  }

  /// Domain selection by name: `u` or `uxu`. Longer products such as
  /// `uxuxu` associate to the right.
  static std::optional<QualDomain> by_name(std::string_view name) {
    if (name == "u" || name == "U") return unit();
    if (name.size() > 2 && (name.substr(0, 2) == "ux" || name.substr(0, 2) == "UX")) {
      auto rest = by_name(name.substr(2));
      if (!rest) return std::nullopt;
      return product(unit(), *rest);
    }
    return std::nullopt;
  }

  bool is_unit() const { return factors_ == nullptr; }
  bool is_product() const { return factors_ != nullptr; }
  const QualDomain& left() const { return factors_->first; }
  const QualDomain& right() const { return factors_->second; }

  std::string name() const {
    if (is_unit()) return "u";
    return "(" + left().name() + "x" + right().name() + ")";
  }

  /// Number of real components of a value of this domain.
  int width() const { return is_unit() ? 1 : left().width() + right().width(); }

  friend bool operator==(const QualDomain& a, const QualDomain& b) {
    if (a.is_unit() != b.is_unit()) return false;
    if (a.is_unit()) return true;
    return a.left() == b.left() && a.right() == b.right();
  }

  bool conforms(const QualValue& d) const {
    if (is_unit()) return d.is_real();
    return d.is_pair() && left().conforms(d.left()) && right().conforms(d.right());
  }

  QualValue bottom() const {
    if (is_unit()) return QualValue::real(0.0);
    return QualValue::pair(left().bottom(), right().bottom());
  }
  QualValue top() const {
    if (is_unit()) return QualValue::real(1.0);
    return QualValue::pair(left().top(), right().top());
  }

  bool leq(const QualValue& d, const QualValue& e) const {
    check(d);
    check(e);
    return leq_unchecked(d, e, 0.0);
  }

  /// d <= e allowing kQualEps slack on every component.
  bool approx_leq(const QualValue& d, const QualValue& e, double eps = kQualEps) const {
    check(d);
    check(e);
    return leq_unchecked(d, e, eps);
  }

  QualValue glb(const QualValue& d, const QualValue& e) const {
    check(d);
    check(e);
    return combine(d, e, [](double x, double y) { return std::fmin(x, y); });
  }
  QualValue lub(const QualValue& d, const QualValue& e) const {
    check(d);
    check(e);
    return combine(d, e, [](double x, double y) { return std::fmax(x, y); });
  }

  /// glb over a finite collection; the empty glb is top.
  QualValue glb_all(std::span<const QualValue> values) const {
    QualValue acc = top();
    for (const auto& v : values) acc = glb(acc, v);
    return acc;
  }

  QualValue attenuate(const QualValue& d, const QualValue& e) const {
    check(d);
    check(e);
    return combine(d, e, [](double x, double y) { return x * y; });
  }

  /// Least e such that d <= alpha o e, if one exists (i.e. when d <= alpha).
  std::optional<QualValue> residual(const QualValue& d, const QualValue& alpha) const {
    check(d);
    check(alpha);
    return residual_unchecked(d, alpha);
  }

  bool is_bottom(const QualValue& d) const { return leq(d, bottom()); }
  bool is_top(const QualValue& d) const { return leq(top(), d); }

  /// Membership in D \ {bottom}, the values usable as attenuation factors,
  /// thresholds and statement qualifications.
  bool is_strict(const QualValue& d) const { return conforms(d) && !is_bottom(d); }

  void check(const QualValue& d) const {
    if (!conforms(d)) {
      throw QualError("qualification value " + to_string(d) + " does not conform to domain " + name());
    }
  }

 private:
  bool leq_unchecked(const QualValue& d, const QualValue& e, double eps) const {
    if (is_unit()) return d.value() <= e.value() + eps;
    return left().leq_unchecked(d.left(), e.left(), eps) &&
           right().leq_unchecked(d.right(), e.right(), eps);
  }

  template <class F>
  QualValue combine(const QualValue& d, const QualValue& e, F f) const {
    if (is_unit()) return QualValue::real(std::clamp(f(d.value(), e.value()), 0.0, 1.0));
    return QualValue::pair(left().combine(d.left(), e.left(), f),
                           right().combine(d.right(), e.right(), f));
  }

  std::optional<QualValue> residual_unchecked(const QualValue& d, const QualValue& alpha) const {
    if (is_unit()) {
      double x = d.value(), a = alpha.value();
      if (x == 0.0) return QualValue::real(0.0);
      if (x > a + kQualEps) return std::nullopt;
      return QualValue::real(std::fmin(1.0, x / a));
    }
    auto l = left().residual_unchecked(d.left(), alpha.left());
    auto r = right().residual_unchecked(d.right(), alpha.right());
    if (!l || !r) return std::nullopt;
    return QualValue::pair(*l, *r);
  }

  std::shared_ptr<const std::pair<QualDomain, QualDomain>> factors_;
};

inline std::string to_string(const QualValue& v) {
  if (v.is_real()) return format_real(v.value());
  return "(" + to_string(v.left()) + "," + to_string(v.right()) + ")";
}

}  // namespace qcflp

#pragma once

// Atomic constraints p(e1..en) == v over the real constraint domain, the
// interpretation of primitive symbols, and the qVal/qBound encoding of
// qualification statements.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qcflp/expr.hpp"
#include "qcflp/qual_domain.hpp"

namespace qcflp {

class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// p(e1..en) == v with p primitive and v a variable, nullary constructor or
/// basic value.
struct AtomicConstraint {
  Expr call;    // primitive application
  Expr result;  // v

  /// Bare `p(e)`: result `true`.
  static AtomicConstraint holds(Expr call) { return {std::move(call), Expr::boolean(true)}; }
  static AtomicConstraint equal(Expr a, Expr b) {
    return holds(Expr::prim(std::string(sym::kEq), {std::move(a), std::move(b)}));
  }
  static AtomicConstraint distinct(Expr a, Expr b) {
    return {Expr::prim(std::string(sym::kEq), {std::move(a), std::move(b)}), Expr::boolean(false)};
  }
  static AtomicConstraint relation(std::string op, Expr a, Expr b) {
    return holds(Expr::prim(std::move(op), {std::move(a), std::move(b)}));
  }

  const std::string& op() const { return call.name(); }
  bool is_equality() const { return call.name() == sym::kEq && result.is_true(); }
  bool is_disequality() const { return call.name() == sym::kEq && result.is_false(); }

  bool is_primitive() const { return !mentions_defined(call) && !mentions_defined(result); }

  friend bool operator==(const AtomicConstraint&, const AtomicConstraint&) = default;
  friend bool operator<(const AtomicConstraint& a, const AtomicConstraint& b) {
    if (int c = Expr::compare(a.call, b.call)) return c < 0;
    return Expr::compare(a.result, b.result) < 0;
  }
};

/// Conjunction of atomic constraints, kept in insertion order.
using ConstraintSet = std::vector<AtomicConstraint>;

inline AtomicConstraint apply_subst(const Substitution& s, const AtomicConstraint& c) {
  return {s.apply(c.call), s.apply(c.result)};
}
inline ConstraintSet apply_subst(const Substitution& s, const ConstraintSet& cs) {
  ConstraintSet out;
  out.reserve(cs.size());
  for (const auto& c : cs) out.push_back(apply_subst(s, c));
  return out;
}

inline std::vector<std::string> vars_of(const AtomicConstraint& c) {
  std::vector<std::string> out;
  collect_vars(c.call, out);
  collect_vars(c.result, out);
  return out;
}
inline std::vector<std::string> vars_of(const ConstraintSet& cs) {
  std::vector<std::string> out;
  for (const auto& c : cs) {
    collect_vars(c.call, out);
    collect_vars(c.result, out);
  }
  return out;
}

inline bool valid_result(const Expr& v) {
  return v.is_var() || v.is_num() || (v.is_constructor_app() && v.arity() == 0);
}

inline std::string to_string(const AtomicConstraint& c) {
  const Expr& call = c.call;
  if (call.name() == sym::kEq && call.arity() == 2 && (c.result.is_true() || c.result.is_false())) {
    // a == b / a /= b
    std::string out;
    detail::print(call.arg(0), 1, out);
    out += c.result.is_true() ? " == " : " /= ";
    detail::print(call.arg(1), 1, out);
    return out;
  }
  if (c.result.is_true()) return to_string(call);
  std::string out;
  detail::print(call, 1, out);
  return out + " ->! " + to_string(c.result);
}

inline std::string to_string(const ConstraintSet& cs) {
  std::string out;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (i) out += ", ";
    out += to_string(cs[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Primitive interpretation

namespace detail {

inline bool qual_leaves_ok(const Expr& t, bool& any_positive) {
  if (t.is_num()) {
    if (t.number() < 0.0 || t.number() > 1.0) return false;
    any_positive = any_positive || t.number() > 0.0;
    return true;
  }
  if (t.is_app_of(sym::kQPair) && t.arity() == 2) {
    return qual_leaves_ok(t.arg(0), any_positive) && qual_leaves_ok(t.arg(1), any_positive);
  }
  return false;
}

}  // namespace detail

/// Interpretation of primitive `p` in the real domain, applied to ground
/// (possibly partial) terms. Returns bottom when the arguments carry too
/// little information (or lie outside the primitive's domain).
inline Expr eval_primitive(std::string_view p, std::span<const Expr> args) {
  int arity = sym::primitive_arity(p);
  if (arity < 0) throw UsageError("not a primitive symbol: " + std::string(p));
  if (static_cast<int>(args.size()) != arity) {
    throw UsageError("primitive " + std::string(p) + " expects " + std::to_string(arity) + " arguments");
  }
  if (p == sym::kEq) {
    if (!is_total(args[0]) || !is_total(args[1])) return Expr::bottom();
    if (!is_ground(args[0]) || !is_ground(args[1])) return Expr::bottom();
    return Expr::boolean(args[0] == args[1]);
  }
  if (p == sym::kQVal) {
    const Expr& t = args[0];
    if (!is_total(t) || !is_ground(t)) return Expr::bottom();
    if (t.is_num()) return Expr::boolean(t.number() > 0.0 && t.number() <= 1.0);
    bool any = false;
    if (t.is_app_of(sym::kQPair)) return Expr::boolean(detail::qual_leaves_ok(t, any) && any);
    return Expr::boolean(false);
  }
  if (!args[0].is_num() || !args[1].is_num()) return Expr::bottom();
  double a = args[0].number(), b = args[1].number();
  if (p == "+") return Expr::num(a + b);
  if (p == "-") return Expr::num(a - b);
  if (p == "*") return Expr::num(a * b);
  if (p == "/") return b == 0.0 ? Expr::bottom() : Expr::num(a / b);
  if (p == "<") return Expr::boolean(a < b);
  if (p == "<=") return Expr::boolean(a <= b);
  if (p == ">") return Expr::boolean(a > b);
  if (p == ">=") return Expr::boolean(a >= b);
  throw UsageError("unhandled primitive " + std::string(p));
}

/// Evaluates nested primitive applications bottom-up in a ground
/// expression without defined symbols. Variables evaluate to bottom.
inline Expr evaluate_ground(const Expr& e) {
  if (e.is_var()) return Expr::bottom();
  if (!e.is_app() || e.arity() == 0) {
    if (e.is_defined_app()) return Expr::bottom();
    return e;
  }
  std::vector<Expr> args;
  args.reserve(e.arity());
  for (const auto& a : e.args()) args.push_back(evaluate_ground(a));
  switch (e.kind()) {
    case SymKind::Constructor: return e.with_args(std::move(args));
    case SymKind::Primitive: return eval_primitive(e.name(), args);
    case SymKind::Defined: return Expr::bottom();
  }
  return Expr::bottom();
}

/// Truth of a primitive constraint under a valuation covering its variables.
inline bool satisfied_by(const AtomicConstraint& c, const Substitution& valuation) {
  Expr lhs = evaluate_ground(valuation.apply(c.call));
  Expr v = valuation.apply(c.result);
  if (!is_total(lhs) || !is_ground(v)) return false;
  return lhs == v;
}

inline bool satisfied_by(const ConstraintSet& cs, const Substitution& valuation) {
  for (const auto& c : cs) {
    if (!satisfied_by(c, valuation)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Qualification constraints

/// qVal(X) or qBound(X, Y, Z) where each operand is a variable or a
/// literal qualification value.
struct QualEncodedConstraint {
  using Operand = std::variant<std::string, QualValue>;

  enum class Kind { Val, Bound } kind = Kind::Val;
  Operand x, y, z;

  static QualEncodedConstraint qval(std::string var) { return {Kind::Val, std::move(var), {}, {}}; }
  static QualEncodedConstraint qbound(Operand x, Operand y, Operand z) {
    return {Kind::Bound, std::move(x), std::move(y), std::move(z)};
  }
  /// encode[X <= Y o Z]
  static QualEncodedConstraint leq_att(Operand x, Operand y, Operand z) {
    return qbound(std::move(x), std::move(y), std::move(z));
  }
  /// encode[X <= Y] = qBound(X, top, Y)
  static QualEncodedConstraint leq(Operand x, Operand y, const QualDomain& dom) {
    return qbound(std::move(x), dom.top(), std::move(y));
  }
  /// encode[X >= Y] = qBound(Y, top, X)
  static QualEncodedConstraint geq(Operand x, Operand y, const QualDomain& dom) {
    return qbound(std::move(y), dom.top(), std::move(x));
  }
};

inline std::string to_string(const QualEncodedConstraint::Operand& o) {
  if (const auto* s = std::get_if<std::string>(&o)) return *s;
  return to_string(std::get<QualValue>(o));
}

inline std::string to_string(const QualEncodedConstraint& c) {
  if (c.kind == QualEncodedConstraint::Kind::Val) return "qVal(" + to_string(c.x) + ")";
  return "qBound(" + to_string(c.x) + "," + to_string(c.y) + "," + to_string(c.z) + ")";
}

namespace detail {

/// Component variable names for a qualification variable of shape `dom`:
/// `W` for U, `W_1`, `W_2` (recursively) for products.
inline Expr qual_term(const std::string& var, const QualDomain& dom) {
  if (dom.is_unit()) return Expr::var(var);
  return Expr::cons(std::string(sym::kQPair),
                    {qual_term(var + "_1", dom.left()), qual_term(var + "_2", dom.right())});
}

inline Expr qual_literal(const QualValue& v) {
  if (v.is_real()) return Expr::num(v.value());
  return Expr::cons(std::string(sym::kQPair), {qual_literal(v.left()), qual_literal(v.right())});
}

// Component-wise X <= Y * Z in the unit domain, simplifying top factors.
inline void lower_bound_u(const Expr& x, const Expr& y, const Expr& z, ConstraintSet& out) {
  Expr rhs;
  bool y_top = y.is_num() && y.number() == 1.0;
  bool z_top = z.is_num() && z.number() == 1.0;
  if (y_top && z_top) rhs = Expr::num(1.0);
  else if (y_top) rhs = z;
  else if (z_top) rhs = y;
  else if (y.is_num() && z.is_num()) rhs = Expr::num(y.number() * z.number());
  else rhs = Expr::prim("*", {y, z});
  if (x.is_num() && rhs.is_var()) {
    // thresholds read as W >= beta
    out.push_back(AtomicConstraint::relation(">=", rhs, x));
  } else {
    out.push_back(AtomicConstraint::relation("<=", x, rhs));
  }
}

inline void lower_bound(const Expr& x, const Expr& y, const Expr& z, const QualDomain& dom,
                        ConstraintSet& out) {
  if (dom.is_unit()) {
    lower_bound_u(x, y, z, out);
    return;
  }
  auto comp = [](const Expr& e, int i) { return e.arg(static_cast<std::size_t>(i)); };
  lower_bound(comp(x, 0), comp(y, 0), comp(z, 0), dom.left(), out);
  lower_bound(comp(x, 1), comp(y, 1), comp(z, 1), dom.right(), out);
}

}  // namespace detail

/// Qualification term for a qualification variable under `dom`.
inline Expr qual_term(const std::string& var, const QualDomain& dom) { return detail::qual_term(var, dom); }

inline Expr qual_operand_term(const QualEncodedConstraint::Operand& o, const QualDomain& dom) {
  if (const auto* s = std::get_if<std::string>(&o)) return qual_term(*s, dom);
  return detail::qual_literal(std::get<QualValue>(o));
}

/// Lowers an encoded qualification constraint into real-domain constraints:
/// qVal(X) stays the primitive `qVal`, qBound(X,Y,Z) becomes X <= Y*Z
/// component-wise.
inline ConstraintSet lower(const QualEncodedConstraint& c, const QualDomain& dom) {
  ConstraintSet out;
  if (c.kind == QualEncodedConstraint::Kind::Val) {
    out.push_back(AtomicConstraint::holds(
        Expr::prim(std::string(sym::kQVal), {qual_operand_term(c.x, dom)})));
    return out;
  }
  detail::lower_bound(qual_operand_term(c.x, dom), qual_operand_term(c.y, dom),
                      qual_operand_term(c.z, dom), dom, out);
  return out;
}

}  // namespace qcflp

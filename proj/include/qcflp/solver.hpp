#pragma once

// Three-valued satisfiability and entailment for primitive constraint sets:
// constructor equalities by unification, arithmetic by interval propagation,
// and a witness search whose candidates are always checked by ground
// evaluation.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qcflp/constraint.hpp"
#include "qcflp/interval.hpp"

namespace qcflp {

struct SatVerdict {
  enum class Kind { Sat, Unsat, Unknown } kind = Kind::Unknown;
  Substitution witness;

  bool sat() const { return kind == Kind::Sat; }
  bool unsat() const { return kind == Kind::Unsat; }
  bool unknown() const { return kind == Kind::Unknown; }
};

struct EntailVerdict {
  enum class Kind { Entailed, NotEntailed, Unknown } kind = Kind::Unknown;
  Substitution counterexample;

  bool entailed() const { return kind == Kind::Entailed; }
  bool not_entailed() const { return kind == Kind::NotEntailed; }
  bool unknown() const { return kind == Kind::Unknown; }
};

using Box = std::map<std::string, Interval>;

/// Most general unifier of two terms (no defined or primitive symbols
/// expected). Extends `s` in place; returns false on clash or occurs check.
inline bool unify(const Expr& a0, const Expr& b0, Substitution& s) {
  Expr a = s.apply(a0), b = s.apply(b0);
  if (a.is_var() && b.is_var() && a.name() == b.name()) return true;
  if (a.is_var() || b.is_var()) {
    const Expr& v = a.is_var() ? a : b;
    const Expr& t = a.is_var() ? b : a;
    if (occurs(v.name(), t)) return false;
    Substitution one{{v.name(), t}};
    s = s.then(one);
    return true;
  }
  if (a.is_num() || b.is_num()) return a.is_num() && b.is_num() && a.number() == b.number();
  if (a.is_bottom() || b.is_bottom()) return false;
  if (a.name() != b.name() || a.arity() != b.arity()) return false;
  for (std::size_t i = 0; i < a.arity(); ++i) {
    if (!unify(a.arg(i), b.arg(i), s)) return false;
  }
  return true;
}

namespace detail {

inline bool has_bottom(const Expr& e) { return !is_total(e); }

inline bool has_arith(const Expr& e) {
  if (e.is_primitive_app()) return true;
  if (!e.is_app()) return false;
  for (const auto& a : e.args()) {
    if (has_arith(a)) return true;
  }
  return false;
}

inline std::string negate_comparison(std::string_view op) {
  if (op == "<") return ">=";
  if (op == "<=") return ">";
  if (op == ">") return "<=";
  return "<";
}

struct NumRel {
  std::string op;  // <, <=, >, >=, =
  Expr lhs, rhs;
};

/// The constraint set split into the fragments the engine reasons about.
struct Normalized {
  bool unsat = false;
  Substitution unifier;
  std::vector<NumRel> rels;
  std::vector<std::pair<Expr, Expr>> diseqs;
  std::vector<AtomicConstraint> opaque;
  std::set<std::string> numeric_vars;
};

inline void numeric_vars_in(const Expr& e, std::set<std::string>& out) {
  if (e.is_var()) {
    out.insert(e.name());
    return;
  }
  if (e.is_primitive_app() && sym::is_arithmetic(e.name())) {
    for (const auto& a : e.args()) numeric_vars_in(a, out);
  }
}

inline Expr sum_of_leaves(const Expr& t) {
  if (t.is_app_of(sym::kQPair) && t.arity() == 2) {
    return Expr::prim("+", {sum_of_leaves(t.arg(0)), sum_of_leaves(t.arg(1))});
  }
  return t;
}

inline bool qval_bounds(const Expr& t, std::vector<NumRel>& rels) {
  if (t.is_app_of(sym::kQPair) && t.arity() == 2) {
    return qval_bounds(t.arg(0), rels) && qval_bounds(t.arg(1), rels);
  }
  if (t.is_num() || t.is_var() || t.is_primitive_app()) {
    rels.push_back({">=", t, Expr::num(0.0)});
    rels.push_back({"<=", t, Expr::num(1.0)});
    return true;
  }
  return false;
}

inline void add_rel(Normalized& n, std::string op, Expr lhs, Expr rhs) {
  numeric_vars_in(lhs, n.numeric_vars);
  numeric_vars_in(rhs, n.numeric_vars);
  n.rels.push_back({std::move(op), std::move(lhs), std::move(rhs)});
}

inline void classify(const AtomicConstraint& c, Normalized& n) {
  const Expr& call = c.call;
  const Expr& v = c.result;
  const std::string& p = call.name();
  if (sym::is_comparison(p)) {
    if (v.is_true()) add_rel(n, p, call.arg(0), call.arg(1));
    else if (v.is_false()) add_rel(n, negate_comparison(p), call.arg(0), call.arg(1));
    else if (v.is_var()) n.opaque.push_back(c);
    else n.unsat = true;
    return;
  }
  if (sym::is_arithmetic(p)) {
    if (v.is_num() || v.is_var()) add_rel(n, "=", call, v);
    else n.unsat = true;
    return;
  }
  if (p == sym::kEq) {
    const Expr& a = call.arg(0);
    const Expr& b = call.arg(1);
    if (v.is_true()) {
      if (has_arith(a) || has_arith(b)) add_rel(n, "=", a, b);
      // constructor equalities are solved before classification
      return;
    }
    if (v.is_false()) {
      n.diseqs.emplace_back(a, b);
      return;
    }
    if (v.is_var()) n.opaque.push_back(c);
    else n.unsat = true;
    return;
  }
  if (p == sym::kQVal) {
    if (!v.is_true()) {
      if (v.is_false() || v.is_var()) n.opaque.push_back(c);
      else n.unsat = true;
      return;
    }
    const Expr& t = call.arg(0);
    if (t.is_num() || t.is_var() || t.is_primitive_app()) {
      add_rel(n, ">", t, Expr::num(0.0));
      add_rel(n, "<=", t, Expr::num(1.0));
      return;
    }
    std::vector<NumRel> leaf;
    if (!t.is_app_of(sym::kQPair) || !qval_bounds(t, leaf)) {
      n.unsat = true;
      return;
    }
    for (auto& r : leaf) add_rel(n, r.op, r.lhs, r.rhs);
    add_rel(n, ">", sum_of_leaves(t), Expr::num(0.0));
    return;
  }
  n.opaque.push_back(c);
}

inline Normalized normalize(const ConstraintSet& cs) {
  Normalized n;
  for (const auto& c : cs) {
    if (has_bottom(c.call) || has_bottom(c.result)) {
      n.unsat = true;
      return n;
    }
    if (c.call.name() == sym::kEq && c.result.is_true() && !has_arith(c.call.arg(0)) &&
        !has_arith(c.call.arg(1))) {
      if (!unify(c.call.arg(0), c.call.arg(1), n.unifier)) {
        n.unsat = true;
        return n;
      }
    }
  }
  for (const auto& c : cs) {
    classify(apply_subst(n.unifier, c), n);
    if (n.unsat) return n;
  }
  return n;
}

inline Interval eval_interval(const Expr& e, const Box& box) {
  if (e.is_num()) return Interval::point(e.number());
  if (e.is_var()) {
    auto it = box.find(e.name());
    return it == box.end() ? Interval::entire() : it->second;
  }
  if (e.is_primitive_app() && sym::is_arithmetic(e.name()) && e.arity() == 2) {
    Interval a = eval_interval(e.arg(0), box);
    Interval b = eval_interval(e.arg(1), box);
    const std::string& p = e.name();
    if (p == "+") return a + b;
    if (p == "-") return a - b;
    if (p == "*") return a * b;
    return a / b;
  }
  return Interval::empty_set();
}

inline bool significant_change(const Interval& before, const Interval& after) {
  auto moved = [](double a, double b) {
    if (a == b) return false;
    if (std::isinf(a) || std::isinf(b)) return true;
    return std::fabs(a - b) > 1e-12 * std::max(1.0, std::fabs(a));
  };
  return moved(before.lo, after.lo) || moved(before.hi, after.hi) || before.lo_open != after.lo_open ||
         before.hi_open != after.hi_open;
}

// Backward step: restrict the value of `e` to `target`, narrowing variables.
inline bool narrow(const Expr& e, const Interval& target, Box& box, bool& changed) {
  Interval cur = intersect(eval_interval(e, box), target);
  if (cur.empty()) return false;
  if (e.is_num()) return true;
  if (e.is_var()) {
    Interval& slot = box.try_emplace(e.name(), Interval::entire()).first->second;
    Interval next = intersect(slot, target);
    if (next.empty()) return false;
    if (significant_change(slot, next)) changed = true;
    slot = next;
    return true;
  }
  const Expr& x = e.arg(0);
  const Expr& y = e.arg(1);
  Interval a = eval_interval(x, box);
  Interval b = eval_interval(y, box);
  const std::string& p = e.name();
  if (p == "+") return narrow(x, cur - b, box, changed) && narrow(y, cur - eval_interval(x, box), box, changed);
  if (p == "-") return narrow(x, cur + b, box, changed) && narrow(y, eval_interval(x, box) - cur, box, changed);
  if (p == "*") {
    Interval tx = b.contains_zero() && cur.contains_zero() ? Interval::entire() : cur / b;
    if (!narrow(x, tx, box, changed)) return false;
    a = eval_interval(x, box);
    Interval ty = a.contains_zero() && cur.contains_zero() ? Interval::entire() : cur / a;
    return narrow(y, ty, box, changed);
  }
  // x / y = cur
  if (!narrow(x, cur * b, box, changed)) return false;
  a = eval_interval(x, box);
  Interval ty = cur.contains_zero() ? Interval::entire() : a / cur;
  return narrow(y, ty, box, changed);
}

inline bool revise(const NumRel& r, Box& box, bool& changed) {
  Interval l = eval_interval(r.lhs, box);
  Interval h = eval_interval(r.rhs, box);
  if (l.empty() || h.empty()) return false;
  Interval tl, th;
  if (r.op == "=") {
    tl = th = intersect(l, h);
  } else if (r.op == "<=" || r.op == "<") {
    bool open = r.op == "<";
    tl = Interval::at_most(h.hi, open || h.hi_open);
    th = Interval::at_least(l.lo, open || l.lo_open);
  } else {
    bool open = r.op == ">";
    tl = Interval::at_least(h.lo, open || h.lo_open);
    th = Interval::at_most(l.hi, open || l.hi_open);
  }
  return narrow(r.lhs, tl, box, changed) && narrow(r.rhs, th, box, changed);
}

inline bool propagate(const std::vector<NumRel>& rels, Box& box) {
  for (int round = 0; round < 200; ++round) {
    bool changed = false;
    for (const auto& r : rels) {
      if (!revise(r, box, changed)) return false;
    }
    if (!changed) return true;
  }
  return true;
}

inline std::vector<double> candidates(const Interval& i) {
  std::vector<double> out;
  auto push = [&](double x) {
    if (std::isfinite(x) && i.contains(x) && std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
  };
  push(i.hi);
  push(i.lo);
  if (i.bounded()) {
    double w = i.hi - i.lo;
    push(i.lo + w * 0.5);
    push(i.hi - w * 1e-3);
    push(i.lo + w * 1e-3);
    push(std::nextafter(i.hi, i.lo));
    push(std::nextafter(i.lo, i.hi));
  } else if (std::isfinite(i.lo)) {
    push(i.lo + 1.0);
    push(i.lo + 1e-3);
    push(std::nextafter(i.lo, Interval::kInf));
  } else if (std::isfinite(i.hi)) {
    push(i.hi - 1.0);
    push(i.hi - 1e-3);
    push(std::nextafter(i.hi, -Interval::kInf));
  } else {
    push(0.0);
    push(1.0);
    push(-1.0);
  }
  push(std::round(i.lo));
  push(std::round(i.hi));
  return out;
}

struct WitnessSearch {
  const ConstraintSet& original;
  const Normalized& norm;
  std::vector<std::string> numeric;
  std::vector<std::string> terms;
  int budget = 4000;

  std::optional<Substitution> run(Box box) {
    Substitution assign;
    return dfs(0, box, assign);
  }

  std::optional<Substitution> dfs(std::size_t k, Box box, Substitution& assign) {
    if (--budget < 0) return std::nullopt;
    if (k == numeric.size()) return finish(assign);
    const std::string& v = numeric[k];
    Interval slot = box.count(v) ? box.at(v) : Interval::entire();
    for (double x : candidates(slot)) {
      Box next = box;
      next[v] = Interval::point(x);
      if (!propagate(norm.rels, next)) continue;
      assign.bind(v, Expr::num(x));
      if (auto r = dfs(k + 1, next, assign)) return r;
      assign.erase(v);
      if (budget < 0) break;
    }
    return std::nullopt;
  }

  std::optional<Substitution> finish(Substitution assign) {
    // remaining variables only occur in constructor positions
    for (std::size_t i = 0; i < terms.size(); ++i) {
      assign.bind(terms[i], Expr::num(1000.0 + static_cast<double>(i)));
    }
    Substitution full = norm.unifier.then(assign);
    if (satisfied_by(original, full)) return full;
    for (std::size_t i = 0; i < terms.size(); ++i) assign.bind(terms[i], Expr::nil());
    full = norm.unifier.then(assign);
    if (satisfied_by(original, full)) return full;
    return std::nullopt;
  }
};

}  // namespace detail

/// Interval box of the numeric variables after propagation, or nullopt when
/// propagation proves the set unsatisfiable.
inline std::optional<Box> propagated_box(const ConstraintSet& cs) {
  detail::Normalized n = detail::normalize(cs);
  if (n.unsat) return std::nullopt;
  Box box;
  for (const auto& v : n.numeric_vars) box[v] = Interval::entire();
  if (!detail::propagate(n.rels, box)) return std::nullopt;
  return box;
}

inline SatVerdict satisfiable(const ConstraintSet& cs) {
  for (const auto& c : cs) {
    if (!c.is_primitive()) return {};
  }
  std::vector<std::string> vars = vars_of(cs);
  if (vars.empty()) {
    return satisfied_by(cs, Substitution{}) ? SatVerdict{SatVerdict::Kind::Sat, {}}
                                            : SatVerdict{SatVerdict::Kind::Unsat, {}};
  }
  detail::Normalized n = detail::normalize(cs);
  if (n.unsat) return {SatVerdict::Kind::Unsat, {}};
  for (const auto& [a, b] : n.diseqs) {
    if (a == b) return {SatVerdict::Kind::Unsat, {}};
  }
  Box box;
  for (const auto& v : n.numeric_vars) box[v] = Interval::entire();
  if (!detail::propagate(n.rels, box)) return {SatVerdict::Kind::Unsat, {}};

  detail::WitnessSearch search{cs, n, {}, {}};
  std::vector<std::string> remaining = vars_of(apply_subst(n.unifier, cs));
  for (const auto& v : vars) {
    if (!n.unifier.contains(v) && std::find(remaining.begin(), remaining.end(), v) == remaining.end()) {
      remaining.push_back(v);
    }
  }
  for (const auto& v : remaining) {
    if (n.numeric_vars.count(v)) search.numeric.push_back(v);
    else search.terms.push_back(v);
  }
  if (auto w = search.run(box)) return {SatVerdict::Kind::Sat, w->restricted_to(vars)};
  return {};
}

namespace detail {

// Alternatives whose union is the complement of Sol(pi) among numeric
// valuations; nullopt when the complement is outside the fragment.
inline std::optional<std::vector<ConstraintSet>> negate(const AtomicConstraint& pi) {
  const Expr& call = pi.call;
  const Expr& v = pi.result;
  const std::string& p = call.name();
  std::vector<ConstraintSet> out;
  if (sym::is_comparison(p)) {
    if (v.is_true()) out.push_back(ConstraintSet{AtomicConstraint{call, Expr::boolean(false)}});
    else if (v.is_false()) out.push_back(ConstraintSet{AtomicConstraint{call, Expr::boolean(true)}});
    else return std::nullopt;
    return out;
  }
  if (p == sym::kEq) {
    if (v.is_true()) out.push_back(ConstraintSet{AtomicConstraint::distinct(call.arg(0), call.arg(1))});
    else if (v.is_false()) out.push_back(ConstraintSet{AtomicConstraint::equal(call.arg(0), call.arg(1))});
    else return std::nullopt;
    return out;
  }
  if (sym::is_arithmetic(p)) {
    if (!v.is_num() && !v.is_var()) return std::nullopt;
    out.push_back(ConstraintSet{AtomicConstraint::distinct(call, v)});
    return out;
  }
  if (p == sym::kQVal && v.is_true()) {
    const Expr& t = call.arg(0);
    if (t.is_num() || t.is_var() || t.is_primitive_app()) {
      out.push_back(ConstraintSet{AtomicConstraint::relation("<=", t, Expr::num(0.0))});
      out.push_back(ConstraintSet{AtomicConstraint::relation(">", t, Expr::num(1.0))});
      return out;
    }
    if (!t.is_app_of(sym::kQPair)) return std::nullopt;
    std::vector<Expr> leaves;
    std::function<void(const Expr&)> walk = [&](const Expr& x) {
      if (x.is_app_of(sym::kQPair) && x.arity() == 2) {
        walk(x.arg(0));
        walk(x.arg(1));
      } else {
        leaves.push_back(x);
      }
    };
    walk(t);
    for (const auto& l : leaves) {
      out.push_back(ConstraintSet{AtomicConstraint::relation("<", l, Expr::num(0.0))});
      out.push_back(ConstraintSet{AtomicConstraint::relation(">", l, Expr::num(1.0))});
    }
    out.push_back(ConstraintSet{AtomicConstraint::relation("<=", sum_of_leaves(t), Expr::num(0.0))});
    return out;
  }
  return std::nullopt;
}

// Variables of pi whose value must be a number for pi to hold at all.
inline std::set<std::string> demanded_numeric(const AtomicConstraint& pi) {
  std::set<std::string> out;
  const std::string& p = pi.call.name();
  if (sym::is_comparison(p) || sym::is_arithmetic(p)) {
    for (const auto& a : pi.call.args()) numeric_vars_in(a, out);
    if (sym::is_arithmetic(p) && pi.result.is_var()) out.insert(pi.result.name());
  } else if (p == sym::kEq) {
    for (const auto& a : pi.call.args()) {
      if (has_arith(a)) numeric_vars_in(a, out);
    }
  }
  return out;
}

}  // namespace detail

inline EntailVerdict entails(const ConstraintSet& cs, const AtomicConstraint& pi) {
  using K = EntailVerdict::Kind;
  SatVerdict base = satisfiable(cs);
  if (base.unsat()) return {K::Entailed, {}};
  if (!pi.is_primitive()) return {};
  if (!is_total(pi.call) || !is_total(pi.result)) {
    // pi can never hold
    if (base.sat()) return {K::NotEntailed, base.witness};
    return {};
  }

  bool unknown = false;
  detail::Normalized n = detail::normalize(cs);
  std::set<std::string> forced = n.numeric_vars;
  for (const auto& [v, t] : n.unifier) {
    if (t.is_num()) forced.insert(v);
  }
  for (const auto& v : detail::demanded_numeric(pi)) {
    if (forced.count(v)) continue;
    // v may take a non-numeric value, which makes pi fail
    if (base.sat()) {
      Substitution w = base.witness;
      w.bind(v, Expr::nil());
      for (const auto& x : vars_of(pi)) {
        if (!w.contains(x)) w.bind(x, Expr::nil());
      }
      if (satisfied_by(cs, w) && !satisfied_by(pi, w)) return {K::NotEntailed, w};
    }
    unknown = true;
  }

  auto alts = detail::negate(pi);
  if (!alts) {
    if (base.sat()) {
      Substitution w = base.witness;
      for (const auto& x : vars_of(pi)) {
        if (!w.contains(x)) w.bind(x, Expr::num(0.0));
      }
      if (satisfied_by(cs, w) && !satisfied_by(pi, w)) return {K::NotEntailed, w};
    }
    return {};
  }
  for (const auto& alt : *alts) {
    ConstraintSet joined = cs;
    joined.insert(joined.end(), alt.begin(), alt.end());
    SatVerdict r = satisfiable(joined);
    if (r.sat()) {
      if (satisfied_by(cs, r.witness) && !satisfied_by(pi, r.witness)) return {K::NotEntailed, r.witness};
      unknown = true;
    } else if (r.unknown()) {
      unknown = true;
    }
  }
  return unknown ? EntailVerdict{} : EntailVerdict{K::Entailed, {}};
}

}  // namespace qcflp

#pragma once

// qc-statements (e -> t)#d <== Pi and delta#d <== Pi, triviality, and
// (Q,C)-entailment between statements. A statement without a qualification
// is a plain c-statement of the unqualified rewriting logic.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcflp/solver.hpp"

namespace qcflp {

struct QcStatement {
  enum class Kind { Production, Atom } kind = Kind::Production;
  Expr lhs;                       // e
  Expr rhs;                       // t
  AtomicConstraint atom;          // delta
  std::optional<QualValue> qual;  // d
  ConstraintSet hyp;              // Pi

  static QcStatement production(Expr e, Expr t, std::optional<QualValue> d, ConstraintSet pi = {}) {
    QcStatement s;
    s.kind = Kind::Production;
    s.lhs = std::move(e);
    s.rhs = std::move(t);
    s.qual = std::move(d);
    s.hyp = std::move(pi);
    return s;
  }
  static QcStatement atomic(AtomicConstraint delta, std::optional<QualValue> d, ConstraintSet pi = {}) {
    QcStatement s;
    s.kind = Kind::Atom;
    s.atom = std::move(delta);
    s.qual = std::move(d);
    s.hyp = std::move(pi);
    return s;
  }

  bool is_production() const { return kind == Kind::Production; }
  bool is_atom() const { return kind == Kind::Atom; }

  /// f(t1..tn) -> t with f defined and every ti a term.
  bool is_fact() const {
    if (!is_production() || !lhs.is_defined_app()) return false;
    for (const auto& a : lhs.args()) {
      if (!is_term(a)) return false;
    }
    return is_term(rhs);
  }

  QcStatement with_qual(std::optional<QualValue> d) const {
    QcStatement s = *this;
    s.qual = std::move(d);
    return s;
  }

  friend bool operator==(const QcStatement& a, const QcStatement& b) {
    if (a.kind != b.kind || a.hyp != b.hyp || a.qual.has_value() != b.qual.has_value()) return false;
    if (a.qual && !(*a.qual == *b.qual)) return false;
    if (a.is_production()) return a.lhs == b.lhs && a.rhs == b.rhs;
    return a.atom == b.atom;
  }
};

inline QcStatement apply_subst(const Substitution& s, const QcStatement& st) {
  QcStatement out = st;
  if (st.is_production()) {
    out.lhs = s.apply(st.lhs);
    out.rhs = s.apply(st.rhs);
  } else {
    out.atom = apply_subst(s, st.atom);
  }
  out.hyp = apply_subst(s, st.hyp);
  return out;
}

/// Trivial iff t is bottom (productions) or Pi is unsatisfiable. An
/// `unknown` satisfiability verdict does not make a statement trivial.
inline bool is_trivial(const QcStatement& s) {
  if (s.is_production() && s.rhs.is_bottom()) return true;
  if (s.hyp.empty()) return false;
  return satisfiable(s.hyp).unsat();
}

inline std::string to_string(const QcStatement& s) {
  std::string out;
  if (s.is_production()) {
    out = to_string(s.lhs) + " -> " + to_string(s.rhs);
  } else {
    out = to_string(s.atom);
  }
  if (s.qual) out += " # " + to_string(*s.qual);
  if (!s.hyp.empty()) out += " <== " + to_string(s.hyp);
  return out;
}

namespace detail {

// Records, for each variable of `pattern`, the subterms of `target` found at
// its positions. Positions beyond `target`'s structure see bottom.
inline bool collect_positions(const Expr& pattern, const Expr& target,
                              std::map<std::string, std::vector<Expr>>& out, bool strict_shape) {
  if (pattern.is_var()) {
    out[pattern.name()].push_back(target);
    return true;
  }
  if (pattern.is_bottom()) return true;
  if (target.is_bottom()) {
    if (strict_shape) return false;
    for (const auto& a : pattern.args()) {
      if (!collect_positions(a, target, out, strict_shape)) return false;
    }
    return true;
  }
  if (pattern.is_num()) return target.is_num() && target.number() == pattern.number();
  if (!pattern.is_app() || !target.is_app()) return false;
  if (pattern.name() != target.name() || pattern.arity() != target.arity()) return false;
  for (std::size_t i = 0; i < pattern.arity(); ++i) {
    if (!collect_positions(pattern.arg(i), target.arg(i), out, strict_shape)) return false;
  }
  return true;
}

// Replaces maximal variable-free subterms by bottom.
inline Expr var_skeleton(const Expr& e) {
  if (e.is_var()) return e;
  if (vars_of(e).empty()) return Expr::bottom();
  std::vector<Expr> args;
  for (const auto& a : e.args()) args.push_back(var_skeleton(a));
  return e.with_args(std::move(args));
}

}  // namespace detail

/// Searches a witness sigma for phi (Q,C)-entailing phi2: Pi2 |= Pi sigma,
/// d >= d2, e sigma <= e2 and t sigma >= t2 (or delta sigma <= delta2).
inline std::optional<Substitution> qc_entails(const QcStatement& phi, const QcStatement& phi2,
                                              const QualDomain& dom) {
  if (phi.kind != phi2.kind) return std::nullopt;
  if (phi.qual.has_value() != phi2.qual.has_value()) return std::nullopt;
  if (phi.qual && !dom.leq(*phi2.qual, *phi.qual)) return std::nullopt;

  std::map<std::string, std::vector<Expr>> upper, lower;
  if (phi.is_production()) {
    if (!detail::collect_positions(phi.lhs, phi2.lhs, upper, true)) return std::nullopt;
    if (!detail::collect_positions(phi.rhs, phi2.rhs, lower, false)) return std::nullopt;
  } else {
    if (!detail::collect_positions(phi.atom.call, phi2.atom.call, upper, true)) return std::nullopt;
    if (!detail::collect_positions(phi.atom.result, phi2.atom.result, upper, true)) return std::nullopt;
  }

  auto check = [&](const Substitution& s) -> bool {
    if (phi.is_production()) {
      if (!info_leq(s.apply(phi.lhs), phi2.lhs)) return false;
      if (!info_leq(phi2.rhs, s.apply(phi.rhs))) return false;
    } else {
      AtomicConstraint d = apply_subst(s, phi.atom);
      if (!info_leq(d.call, phi2.atom.call) || !info_leq(d.result, phi2.atom.result)) return false;
    }
    for (const auto& pi : apply_subst(s, phi.hyp)) {
      if (!entails(phi2.hyp, pi).entailed()) return false;
    }
    return true;
  };

  std::vector<std::string> vars;
  if (phi.is_production()) {
    collect_vars(phi.lhs, vars);
    collect_vars(phi.rhs, vars);
  } else {
    collect_vars(phi.atom.call, vars);
    collect_vars(phi.atom.result, vars);
  }

  for (int attempt = 0; attempt < 3; ++attempt) {
    Substitution s;
    bool ok = true;
    for (const auto& v : vars) {
      std::optional<Expr> up;
      if (auto it = upper.find(v); it != upper.end()) {
        up = it->second.front();
        for (const auto& u : it->second) *up = info_glb(*up, u);
      }
      Expr low = Expr::bottom();
      if (auto it = lower.find(v); it != lower.end()) {
        for (const auto& l : it->second) {
          auto m = info_lub(low, l);
          if (!m) {
            ok = false;
            break;
          }
          low = *m;
        }
      }
      if (!ok) break;
      Expr choice = low;
      if (up) {
        Expr base = attempt == 0 ? detail::var_skeleton(*up) : attempt == 1 ? *up : Expr::bottom();
        auto m = info_lub(low, base);
        if (!m) {
          ok = false;
          break;
        }
        choice = *m;
      }
      if (!(choice.is_var() && choice.name() == v)) s.bind(v, choice);
    }
    if (ok && check(s)) return s;
  }
  return std::nullopt;
}

}  // namespace qcflp

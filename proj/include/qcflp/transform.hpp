#pragma once

// Translation of qualified programs, statements and goals into the
// unqualified constraint functional logic language. Every call to a defined
// function f gains a trailing qualification argument and becomes f'.

#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qcflp/statement.hpp"
#include "qcflp/syntax.hpp"

namespace qcflp {

/// Supply of qualification variables _W<n>.
class FreshSupply {
 public:
  explicit FreshSupply(long start = 0) : next_(start) {}

  /// Starting index from QCFLP_SEED, 0 when unset or malformed.
  static FreshSupply from_env() {
    const char* s = std::getenv("QCFLP_SEED");
    if (!s || !*s) return FreshSupply(0);
    char* end = nullptr;
    long v = std::strtol(s, &end, 10);
    if (*end != '\0' || v < 0) return FreshSupply(0);
    return FreshSupply(v);
  }

  std::string take() { return "_W" + std::to_string(next_++); }
  long peek() const { return next_; }

 private:
  long next_;
};

inline std::string primed(const std::string& f) { return f + "'"; }

struct ExprTransform {
  Expr expr;                                 // e'
  std::vector<QualEncodedConstraint> omega;  // Omega
  std::vector<std::string> outer;            // W, outermost qualification variables
};

struct StatementTransform {
  QcStatement statement;                     // psi' <== Pi, unqualified
  std::vector<QualEncodedConstraint> omega;  // Omega'
};

/// Position of a translated rule and the variables it introduced.
struct RuleMapEntry {
  std::size_t source = 0;
  std::size_t target = 0;
  std::string head_var;
  std::vector<std::string> introduced;  // head variable first
};

struct TranslatedProgram {
  Program program;
  std::vector<RuleMapEntry> map;
};

class Transformer {
 public:
  Transformer(QualDomain dom, FreshSupply& fresh) : dom_(std::move(dom)), fresh_(fresh) {}

  const QualDomain& dom() const { return dom_; }

  ExprTransform expr(const Expr& e) {
    if (e.is_bottom()) throw UsageError("cannot translate an expression containing bottom");
    if (!e.is_app()) return {e, {}, {}};
    ExprTransform out;
    std::vector<Expr> args;
    std::vector<std::string> inner;
    for (const auto& a : e.args()) {
      ExprTransform t = expr(a);
      args.push_back(std::move(t.expr));
      append(out.omega, t.omega);
      for (auto& w : t.outer) inner.push_back(std::move(w));
    }
    if (!e.is_defined_app()) {
      out.expr = e.with_args(std::move(args));
      out.outer = std::move(inner);
      return out;
    }
    std::string w = take();
    args.push_back(qual_term(w, dom_));
    out.expr = Expr::app(primed(e.name()), SymKind::Defined, std::move(args));
    out.omega.push_back(QualEncodedConstraint::qval(w));
    for (const auto& v : inner) out.omega.push_back(QualEncodedConstraint::leq(w, v, dom_));
    out.outer = {w};
    return out;
  }

  /// TP / TA: the body of a statement or condition.
  ExprTransform atom(const AtomicConstraint& c) {
    atom_result_ = c.result;
    return expr(c.call);
  }

  StatementTransform statement(const QcStatement& phi) {
    StatementTransform out;
    ExprTransform body;
    if (phi.is_production()) {
      body = expr(phi.lhs);
      out.statement = QcStatement::production(body.expr, phi.rhs, std::nullopt, phi.hyp);
    } else {
      body = atom(phi.atom);
      out.statement = QcStatement::atomic({body.expr, atom_result_}, std::nullopt, phi.hyp);
    }
    out.omega = body.omega;
    if (phi.qual) {
      for (const auto& w : body.outer) out.omega.push_back(QualEncodedConstraint::leq(*phi.qual, w, dom_));
    }
    return out;
  }

  ProgramRule rule(const ProgramRule& r, RuleMapEntry* entry = nullptr) {
    std::string w = take();
    ProgramRule out;
    out.name = primed(r.name);
    out.patterns = r.patterns;
    out.patterns.push_back(qual_term(w, dom_));
    out.alpha = QualValue::real(1.0);
    out.line = r.line;
    if (entry) {
      entry->head_var = w;
      entry->introduced = {w};
    }
    auto bounds = [&](const std::vector<std::string>& ws, std::vector<QualEncodedConstraint>& acc) {
      if (ws.empty()) {
        acc.push_back(QualEncodedConstraint::leq(w, r.alpha, dom_));
        return;
      }
      for (const auto& v : ws) acc.push_back(QualEncodedConstraint::leq_att(w, r.alpha, v));
    };
    std::vector<QualEncodedConstraint> head{QualEncodedConstraint::qval(w)};
    emit(head, out.conditions);

    ExprTransform rhs = expr(r.rhs);
    out.rhs = rhs.expr;
    std::vector<QualEncodedConstraint> block = rhs.omega;
    bounds(rhs.outer, block);
    emit(block, out.conditions);
    note_vars(rhs.omega, entry);

    for (const auto& c : r.conditions) {
      ExprTransform t = atom(c);
      std::vector<QualEncodedConstraint> cb = t.omega;
      bounds(t.outer, cb);
      emit(cb, out.conditions);
      note_vars(t.omega, entry);
      out.conditions.push_back({t.expr, atom_result_});
    }
    return out;
  }

  /// TG. Parts without a qualification variable get a fresh one.
  ConstraintSet goal(const Goal& g) {
    ConstraintSet out;
    for (const auto& part : g.parts) {
      ExprTransform t = atom(part.delta);
      AtomicConstraint delta{t.expr, atom_result_};
      std::string wi = part.qvar.empty() ? take() : part.qvar;
      std::vector<QualEncodedConstraint> block = t.omega;
      block.push_back(QualEncodedConstraint::qval(wi));
      if (t.outer.empty()) {
        block.push_back(QualEncodedConstraint::leq(wi, dom_.top(), dom_));
      } else {
        for (const auto& v : t.outer) block.push_back(QualEncodedConstraint::leq(wi, v, dom_));
      }
      if (part.threshold) block.push_back(QualEncodedConstraint::geq(wi, *part.threshold, dom_));
      emit(block, out);
      out.push_back(std::move(delta));
    }
    return out;
  }

  TranslatedProgram program(const Program& p) {
    TranslatedProgram out;
    out.program.data = p.data;
    out.program.sig.constructors = p.sig.constructors;
    for (const auto& [f, n] : p.sig.defined) out.program.sig.defined[primed(f)] = n + 1;
    for (std::size_t i = 0; i < p.rules.size(); ++i) {
      RuleMapEntry e;
      e.source = i;
      e.target = i;
      out.program.rules.push_back(rule(p.rules[i], &e));
      out.map.push_back(std::move(e));
    }
    return out;
  }

  ConstraintSet lower_all(const std::vector<QualEncodedConstraint>& omega) const {
    ConstraintSet out;
    emit(omega, out);
    return out;
  }

 private:
  std::string take() { return fresh_.take(); }

  static void append(std::vector<QualEncodedConstraint>& to, const std::vector<QualEncodedConstraint>& from) {
    to.insert(to.end(), from.begin(), from.end());
  }

  void emit(const std::vector<QualEncodedConstraint>& omega, ConstraintSet& out) const {
    for (const auto& c : omega) {
      for (auto& l : lower(c, dom_)) out.push_back(std::move(l));
    }
  }

  static void note_vars(const std::vector<QualEncodedConstraint>& omega, RuleMapEntry* entry) {
    if (!entry) return;
    for (const auto& c : omega) {
      if (c.kind != QualEncodedConstraint::Kind::Val) continue;
      const auto& w = std::get<std::string>(c.x);
      if (std::find(entry->introduced.begin(), entry->introduced.end(), w) == entry->introduced.end()) {
        entry->introduced.push_back(w);
      }
    }
  }

  QualDomain dom_;
  FreshSupply& fresh_;
  Expr atom_result_;
};

inline TranslatedProgram transform_program(const Program& p, const QualDomain& dom, FreshSupply& fresh) {
  Transformer t(dom, fresh);
  return t.program(p);
}

// ---------------------------------------------------------------------------
// Simplification

namespace detail {

inline bool is_fresh_qual_var(const std::string& v) { return is_reserved_qual_var(v); }

inline void count_occurrences(const Expr& e, std::map<std::string, int>& n) {
  if (e.is_var()) {
    ++n[e.name()];
    return;
  }
  for (const auto& a : e.args()) count_occurrences(a, n);
}

// Occurrences of v as the direct trailing argument of a defined call.
inline int call_arg_occurrences(const Expr& e, const std::string& v) {
  int k = 0;
  if (e.is_defined_app() && e.arity() > 0) {
    const Expr& last = e.arg(e.arity() - 1);
    if (last.is_var() && last.name() == v) ++k;
  }
  for (const auto& a : e.args()) k += call_arg_occurrences(a, v);
  return k;
}

inline bool is_qval_of(const AtomicConstraint& c, const std::string& v) {
  return c.result.is_true() && c.call.is_app_of(sym::kQVal) && c.call.arity() == 1 && c.call.arg(0).is_var() &&
         c.call.arg(0).name() == v;
}

// X <= V with X a variable.
inline std::optional<std::string> plain_upper_of(const AtomicConstraint& c, const std::string& v) {
  if (!c.result.is_true() || !c.call.is_app_of("<=") || c.call.arity() != 2) return std::nullopt;
  const Expr& a = c.call.arg(0);
  const Expr& b = c.call.arg(1);
  if (a.is_var() && b.is_var() && b.name() == v && a.name() != v) return a.name();
  return std::nullopt;
}

// One elimination step; `protected_vars` are never removed.
inline bool simplify_step(std::vector<Expr>& exprs, ConstraintSet& cs, const std::set<std::string>& protected_vars) {
  std::map<std::string, int> occ;
  for (const auto& e : exprs) count_occurrences(e, occ);
  for (const auto& c : cs) {
    count_occurrences(c.call, occ);
    count_occurrences(c.result, occ);
  }
  for (const auto& [v, total] : occ) {
    if (!is_fresh_qual_var(v) || protected_vars.count(v)) continue;
    int qvals = 0, uppers = 0, calls = 0;
    std::optional<std::string> target;
    for (const auto& c : cs) {
      if (is_qval_of(c, v)) ++qvals;
      if (auto x = plain_upper_of(c, v)) {
        ++uppers;
        target = x;
      }
      calls += call_arg_occurrences(c.call, v) + call_arg_occurrences(c.result, v);
    }
    for (const auto& e : exprs) calls += call_arg_occurrences(e, v);
    if (qvals != 1 || uppers != 1 || calls != 1 || total != 3) continue;
    Substitution ren{{v, Expr::var(*target)}};
    for (auto& e : exprs) e = ren.apply(e);
    ConstraintSet next;
    for (const auto& c : cs) {
      AtomicConstraint r = apply_subst(ren, c);
      if (plain_upper_of(c, v)) continue;
      if (std::find(next.begin(), next.end(), r) != next.end() && is_qval_of(r, *target)) continue;
      next.push_back(std::move(r));
    }
    cs = std::move(next);
    return true;
  }
  return false;
}

inline void dedupe_qvals(ConstraintSet& cs) {
  ConstraintSet out;
  for (const auto& c : cs) {
    bool qv = c.call.is_app_of(sym::kQVal);
    if (qv && std::find(out.begin(), out.end(), c) != out.end()) continue;
    out.push_back(c);
  }
  cs = std::move(out);
}

}  // namespace detail

/// Renames away a fresh qualification variable W' whose only occurrences
/// are qVal(W'), one W <= W' and one trailing call argument. Only the unit
/// domain's encoding has this shape; other inputs come back unchanged.
inline ConstraintSet simplify_goal(ConstraintSet goal) {
  std::vector<Expr> none;
  while (detail::simplify_step(none, goal, {})) {
  }
  detail::dedupe_qvals(goal);
  return goal;
}

inline ProgramRule simplify_rule(ProgramRule r) {
  std::vector<Expr> exprs = r.patterns;
  exprs.push_back(r.rhs);
  std::set<std::string> keep;
  for (const auto& p : r.patterns) {
    for (const auto& v : vars_of(p)) keep.insert(v);
  }
  while (detail::simplify_step(exprs, r.conditions, keep)) {
  }
  r.rhs = exprs.back();
  detail::dedupe_qvals(r.conditions);
  return r;
}

inline TranslatedProgram simplify_program(TranslatedProgram tp) {
  for (auto& r : tp.program.rules) r = simplify_rule(std::move(r));
  for (auto& m : tp.map) {
    const ProgramRule& r = tp.program.rules[m.target];
    std::vector<std::string> live;
    for (const auto& p : r.patterns) collect_vars(p, live);
    collect_vars(r.rhs, live);
    for (const auto& c : r.conditions) collect_vars(c.call, live);
    std::vector<std::string> kept;
    for (const auto& w : m.introduced) {
      if (std::find(live.begin(), live.end(), w) != live.end()) kept.push_back(w);
    }
    m.introduced = std::move(kept);
  }
  return tp;
}

// ---------------------------------------------------------------------------
// Printing

inline std::string print_rule_map(const TranslatedProgram& tp) {
  std::string out = "source\ttarget\tvariables\n";
  for (const auto& m : tp.map) {
    out += std::to_string(m.source) + "\t" + std::to_string(m.target) + "\t";
    for (std::size_t i = 0; i < m.introduced.size(); ++i) {
      if (i) out += ",";
      out += m.introduced[i];
    }
    out += "\n";
  }
  return out;
}

inline std::string print_constraints_goal(const ConstraintSet& g) { return to_string(g); }

}  // namespace qcflp

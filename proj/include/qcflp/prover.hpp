#pragma once

// Proof trees of the qualified rewriting logic (and of its unqualified
// counterpart), a bounded goal-directed prover, a proof checker, and the
// bounded iteration of the interpretation transformer.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qcflp/statement.hpp"
#include "qcflp/syntax.hpp"

namespace qcflp {

enum class Logic { Qualified, Plain };

enum class Step { TI, RR, DC, DF, PF, AC };

inline std::string step_name(Step s) {
  switch (s) {
    case Step::TI: return "TI";
    case Step::RR: return "RR";
    case Step::DC: return "DC";
    case Step::DF: return "DF";
    case Step::PF: return "PF";
    case Step::AC: return "AC";
  }
  return "?";
}

inline std::optional<Step> step_from_name(std::string_view s) {
  for (Step st : {Step::TI, Step::RR, Step::DC, Step::DF, Step::PF, Step::AC}) {
    if (step_name(st) == s) return st;
  }
  return std::nullopt;
}

/// One inference. For DF the children are the argument premises, then the
/// right-hand side premise, then one premise per condition. A DF step taken
/// from an interpretation (rule_index < 0) has only argument premises.
struct ProofNode {
  Step step = Step::TI;
  QcStatement conclusion;
  int rule_index = -1;
  Substitution theta;
  std::vector<ProofNode> children;

  /// QTI, QDF, ... when qualified; TI, DF, ... otherwise.
  std::string tag() const { return (conclusion.qual ? "Q" : "") + step_name(step); }

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& c : children) n += c.size();
    return n;
  }
  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& c : children) d = std::max(d, c.depth());
    return d + 1;
  }
};

/// The instance R theta of a program rule.
inline ProgramRule instantiate_rule(const ProgramRule& r, const Substitution& theta) {
  ProgramRule out = r;
  for (auto& p : out.patterns) p = theta.apply(p);
  out.rhs = theta.apply(r.rhs);
  out.conditions = apply_subst(theta, r.conditions);
  return out;
}

inline std::vector<std::string> rule_vars(const ProgramRule& r) {
  std::vector<std::string> vars;
  for (const auto& p : r.patterns) collect_vars(p, vars);
  collect_vars(r.rhs, vars);
  for (const auto& c : r.conditions) {
    collect_vars(c.call, vars);
    collect_vars(c.result, vars);
  }
  return vars;
}

// ---------------------------------------------------------------------------
// Interpretations

/// A non-trivial qc-fact (f(t1..tn) -> t)#d <== Pi.
struct QcFact {
  std::string fn;
  std::vector<Expr> args;
  Expr result;
  QualValue qual;
  ConstraintSet hyp;

  QcStatement statement() const {
    return QcStatement::production(Expr::app(fn, SymKind::Defined, args), result, qual, hyp);
  }
  friend bool operator==(const QcFact& a, const QcFact& b) {
    return a.fn == b.fn && a.args == b.args && a.result == b.result && a.qual == b.qual && a.hyp == b.hyp;
  }
};

/// A set of qc-facts closed under entailment, represented by generators.
class Interpretation {
 public:
  explicit Interpretation(QualDomain dom = QualDomain::unit()) : dom_(std::move(dom)) {}

  const QualDomain& dom() const { return dom_; }
  const std::vector<QcFact>& generators() const { return facts_; }

  /// Adds a generator unless an existing one already entails it.
  bool add(QcFact f) {
    QcStatement s = f.statement();
    for (const auto& g : facts_) {
      if (g.fn == f.fn && qc_entails(g.statement(), s, dom_)) return false;
    }
    facts_.push_back(std::move(f));
    return true;
  }

  bool contains(const QcStatement& phi) const {
    if (!phi.is_fact() || !phi.qual) return false;
    if (is_trivial(phi)) return true;
    const std::string& fn = phi.lhs.name();
    for (const auto& g : facts_) {
      if (g.fn == fn && qc_entails(g.statement(), phi, dom_)) return true;
    }
    return false;
  }

 private:
  QualDomain dom_;
  std::vector<QcFact> facts_;
};

// ---------------------------------------------------------------------------
// Search

struct ProverOptions {
  int max_depth = 12;              // nested rule applications
  std::size_t node_budget = 400000;
  std::size_t max_candidates = 48;  // values tried per extra variable
};

namespace detail {

inline bool is_data(const Expr& e) {
  if (e.is_num()) return true;
  if (!e.is_constructor_app()) return false;
  for (const auto& a : e.args()) {
    if (!is_data(a)) return false;
  }
  return true;
}

inline void ground_subterms(const Expr& e, std::vector<Expr>& out) {
  if (e.is_app()) {
    for (const auto& a : e.args()) ground_subterms(a, out);
  }
  if (is_data(e) && std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
}

// Built from variables, numbers, bottom and constructors only.
inline bool is_passive(const Expr& e) {
  if (e.is_app() && !e.is_constructor_app()) return false;
  for (const auto& a : e.args()) {
    if (!is_passive(a)) return false;
  }
  return true;
}

inline bool match_pattern(const Expr& pat, const Expr& value, Substitution& theta) {
  if (pat.is_var()) {
    if (const Expr* b = theta.lookup(pat.name())) return *b == value;
    theta.bind(pat.name(), value);
    return true;
  }
  if (pat.is_num()) return value.is_num() && value.number() == pat.number();
  if (!pat.is_app() || !value.is_app()) return false;
  if (pat.name() != value.name() || pat.arity() != value.arity()) return false;
  for (std::size_t i = 0; i < pat.arity(); ++i) {
    if (!match_pattern(pat.arg(i), value.arg(i), theta)) return false;
  }
  return true;
}

inline bool is_result_value(const Expr& v) {
  return v.is_var() || v.is_num() || (v.is_constructor_app() && v.arity() == 0);
}

// Coefficient k when e is Y, k*Y or Y*k with k a number.
inline std::optional<double> scaled_var(const Expr& e, const std::string& y) {
  if (e.is_var()) return e.name() == y ? std::optional<double>(1.0) : std::nullopt;
  if (e.is_primitive_app() && e.name() == "*" && e.arity() == 2) {
    if (e.arg(0).is_num() && e.arg(1).is_var() && e.arg(1).name() == y) return e.arg(0).number();
    if (e.arg(1).is_num() && e.arg(0).is_var() && e.arg(0).name() == y) return e.arg(1).number();
  }
  return std::nullopt;
}

}  // namespace detail

/// Depth-first search for derivations under a fixed hypothesis set.
class Search {
 public:
  struct Val {
    Expr value;
    QualValue bound;
    ProofNode proof;
  };
  using Cont = std::function<bool(Val)>;

  Search(const Program& prog, QualDomain dom, Logic logic, ConstraintSet hyp, ProverOptions opts,
         const Interpretation* interp = nullptr)
      : prog_(prog), dom_(logic == Logic::Plain ? QualDomain::unit() : std::move(dom)), logic_(logic),
        hyp_(std::move(hyp)), opts_(opts), interp_(interp) {
    for (const auto& r : prog_.rules) {
      for (const auto& p : r.patterns) detail::ground_subterms(p, pool_);
      detail::ground_subterms(r.rhs, pool_);
      for (const auto& c : r.conditions) {
        detail::ground_subterms(c.call, pool_);
        detail::ground_subterms(c.result, pool_);
      }
    }
    if (auto box = propagated_box(hyp_)) box_ = *box;
  }

  bool incomplete = false;  // a depth or budget cut happened
  bool undecided = false;   // the constraint solver answered unknown

  const QualDomain& dom() const { return dom_; }
  const ConstraintSet& hyp() const { return hyp_; }

  void add_pool_terms(const Expr& e) { detail::ground_subterms(e, pool_); }
  void set_pool(std::vector<Expr> pool) { pool_ = std::move(pool); }

  std::optional<QualValue> conclusion_qual(const QualValue& b) const {
    if (logic_ == Logic::Plain) return std::nullopt;
    return b;
  }

  ProofNode trivial(const Expr& e, const Expr& t, const QualValue& d) const {
    ProofNode n;
    n.step = Step::TI;
    n.conclusion = QcStatement::production(e, t, conclusion_qual(d), hyp_);
    return n;
  }

  /// Enumerates maximal values s with (e -> s)#b <== Pi derivable, b >= floor.
  bool values(const Expr& e, const QualValue& floor, int depth, const Cont& k) {
    if (!tick()) return false;
    switch (e.tag()) {
      case Expr::Tag::Bottom:
        return k({e, dom_.top(), trivial(e, e, dom_.top())});
      case Expr::Tag::Var:
      case Expr::Tag::Num: {
        ProofNode n;
        n.step = Step::RR;
        n.conclusion = QcStatement::production(e, e, conclusion_qual(dom_.top()), hyp_);
        return k({e, dom_.top(), std::move(n)});
      }
      case Expr::Tag::App: break;
    }
    if (e.is_constructor_app() && detail::is_passive(e)) return k({e, dom_.top(), identity_proof(e)});
    if (e.is_constructor_app()) {
      std::vector<Val> acc;
      return args_values(e.args(), 0, floor, depth, true, acc, [&](std::vector<Val>& vs) {
        std::vector<Expr> vals;
        ProofNode n;
        n.step = Step::DC;
        QualValue b = dom_.top();
        for (auto& v : vs) {
          vals.push_back(v.value);
          b = dom_.glb(b, v.bound);
          n.children.push_back(v.proof);
        }
        Expr s = e.with_args(std::move(vals));
        n.conclusion = QcStatement::production(e, s, conclusion_qual(b), hyp_);
        return k({s, b, std::move(n)});
      });
    }
    if (e.is_primitive_app()) return primitive_values(e, floor, depth, k);
    if (interp_ && !unfold_next_) return fact_values(e, floor, depth, k);
    unfold_next_ = false;
    return rule_values(e, floor, depth, k);
  }

  /// e -> e by RR, DC and TI steps alone.
  ProofNode identity_proof(const Expr& e) const {
    ProofNode n;
    n.conclusion = QcStatement::production(e, e, conclusion_qual(dom_.top()), hyp_);
    if (e.is_bottom()) {
      n.step = Step::TI;
    } else if (e.is_app()) {
      n.step = Step::DC;
      for (const auto& a : e.args()) n.children.push_back(identity_proof(a));
    } else {
      n.step = Step::RR;
    }
    return n;
  }

  /// Proofs of delta#b <== Pi with b >= floor.
  bool condition(const AtomicConstraint& delta, const QualValue& floor, int depth, const Cont& k) {
    if (!tick()) return false;
    const Expr& call = delta.call;
    if (!call.is_primitive_app()) return false;
    std::vector<Val> acc;
    return args_values(call.args(), 0, floor, depth, false, acc, [&](std::vector<Val>& vs) {
      std::vector<Expr> ts;
      QualValue b = dom_.top();
      ProofNode n;
      n.step = Step::AC;
      for (auto& v : vs) {
        ts.push_back(v.value);
        b = dom_.glb(b, v.bound);
        n.children.push_back(v.proof);
      }
      AtomicConstraint inst{call.with_args(ts), delta.result};
      if (!entailed(inst)) return false;
      n.conclusion = QcStatement::atomic(delta, conclusion_qual(b), hyp_);
      return k({delta.result, b, std::move(n)});
    });
  }

  /// Applies program rules at the root of f(args) even when the search is
  /// otherwise reading an interpretation.
  bool unfold(const Expr& call, const QualValue& floor, int depth, const Cont& k) {
    unfold_next_ = true;
    bool r = values(call, floor, depth, k);
    unfold_next_ = false;
    return r;
  }

  /// Replaces the value of a production proof by a smaller one.
  ProofNode weaken(const ProofNode& n, const Expr& t) const {
    if (n.conclusion.rhs == t) return n;
    if (t.is_bottom()) {
      ProofNode out = trivial(n.conclusion.lhs, t, n.conclusion.qual.value_or(dom_.top()));
      out.conclusion.qual = n.conclusion.qual;
      return out;
    }
    ProofNode out = n;
    out.conclusion.rhs = t;
    if (n.step == Step::DC) {
      for (std::size_t i = 0; i < out.children.size(); ++i) out.children[i] = weaken(n.children[i], t.arg(i));
    } else if (n.step == Step::DF && n.rule_index >= 0) {
      std::size_t at = n.conclusion.lhs.arity();
      out.children[at] = weaken(n.children[at], t);
    }
    return out;
  }

 private:
  bool tick() {
    if (++nodes_ > opts_.node_budget) {
      incomplete = true;
      return false;
    }
    return true;
  }

  bool entailed(const AtomicConstraint& c) {
    if (is_ground(c.call) && is_ground(c.result) && !mentions_defined(c.call)) {
      Expr v = evaluate_ground(c.call);
      if (!v.is_bottom() && v == c.result) return true;
      if (hyp_.empty()) return false;
    }
    std::string key = to_string(c);
    auto it = entail_cache_.find(key);
    if (it == entail_cache_.end()) {
      it = entail_cache_.emplace(key, entails(hyp_, c)).first;
    }
    if (it->second.unknown()) undecided = true;
    return it->second.entailed();
  }

  // Cartesian enumeration of argument values; an argument without any value
  // contributes bottom when `bottom_fallback` is set.
  bool args_values(std::span<const Expr> args, std::size_t i, const QualValue& floor, int depth,
                   bool bottom_fallback, std::vector<Val>& acc,
                   const std::function<bool(std::vector<Val>&)>& k) {
    if (i == args.size()) return k(acc);
    bool any = false;
    bool stop = values(args[i], floor, depth, [&](Val v) {
      any = true;
      acc.push_back(std::move(v));
      bool r = args_values(args, i + 1, floor, depth, bottom_fallback, acc, k);
      acc.pop_back();
      return r;
    });
    if (stop) return true;
    if (!any && bottom_fallback && !args[i].is_bottom() && nodes_ <= opts_.node_budget) {
      acc.push_back({Expr::bottom(), dom_.top(), trivial(args[i], Expr::bottom(), dom_.top())});
      bool r = args_values(args, i + 1, floor, depth, bottom_fallback, acc, k);
      acc.pop_back();
      return r;
    }
    return false;
  }

  bool primitive_values(const Expr& e, const QualValue& floor, int depth, const Cont& k) {
    std::vector<Val> acc;
    return args_values(e.args(), 0, floor, depth, false, acc, [&](std::vector<Val>& vs) {
      std::vector<Expr> ts;
      QualValue b = dom_.top();
      ProofNode n;
      n.step = Step::PF;
      for (auto& v : vs) {
        ts.push_back(v.value);
        b = dom_.glb(b, v.bound);
        n.children.push_back(v.proof);
      }
      Expr inst = e.with_args(ts);
      std::vector<Expr> candidates;
      bool ground = true;
      for (const auto& t : ts) ground = ground && is_ground(t);
      if (ground) {
        Expr v = evaluate_ground(inst);
        if (v.is_bottom() || !detail::is_result_value(v)) return false;
        candidates.push_back(v);
      } else {
        if (sym::is_arithmetic(e.name())) {
          Interval i = detail::eval_interval(inst, box_);
          if (i.is_point()) candidates.push_back(Expr::num(i.lo));
        }
        for (const auto& v : vars_of(hyp_)) candidates.push_back(Expr::var(v));
        if (sym::is_comparison(e.name()) || e.name() == sym::kEq || e.name() == sym::kQVal) {
          candidates.push_back(Expr::boolean(true));
          candidates.push_back(Expr::boolean(false));
        }
      }
      for (const auto& v : candidates) {
        if (!ground && !entailed({inst, v})) continue;
        ProofNode m = n;
        m.conclusion = QcStatement::production(e, v, conclusion_qual(b), hyp_);
        if (k({v, b, std::move(m)})) return true;
      }
      return false;
    });
  }

  bool fact_values(const Expr& e, const QualValue& floor, int depth, const Cont& k) {
    std::vector<Val> acc;
    return args_values(e.args(), 0, floor, depth, true, acc, [&](std::vector<Val>& vs) {
      std::vector<Expr> ts;
      QualValue b = dom_.top();
      for (auto& v : vs) {
        ts.push_back(v.value);
        b = dom_.glb(b, v.bound);
      }
      for (const auto& f : interp_->generators()) {
        if (f.fn != e.name() || f.args.size() != ts.size()) continue;
        if (!dom_.approx_leq(floor, f.qual)) continue;
        QcStatement want =
            QcStatement::production(Expr::app(f.fn, SymKind::Defined, ts), f.result, f.qual, hyp_);
        if (!qc_entails(f.statement(), want, dom_)) continue;
        QualValue bb = dom_.glb(b, f.qual);
        ProofNode n;
        n.step = Step::DF;
        n.conclusion = QcStatement::production(e, f.result, conclusion_qual(bb), hyp_);
        for (auto& v : vs) n.children.push_back(v.proof);
        if (k({f.result, bb, std::move(n)})) return true;
      }
      return false;
    });
  }

  std::vector<Expr> extra_candidates(const ProgramRule& r, const std::string& y, const Substitution& theta) {
    std::vector<Expr> out;
    auto push = [&](Expr e) {
      if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(std::move(e));
    };
    std::optional<double> need;
    bool qual_var = false;
    for (const auto& c0 : r.conditions) {
      AtomicConstraint c = apply_subst(theta, c0);
      if (c.call.is_app_of(sym::kQVal) && c.call.arity() == 1 && c.call.arg(0).is_var() &&
          c.call.arg(0).name() == y) {
        qual_var = true;
      }
      if (!c.result.is_true() || !c.call.is_primitive_app() || c.call.arity() != 2) continue;
      const std::string& op = c.call.name();
      if (!sym::is_comparison(op)) continue;
      Expr lower = (op == "<=" || op == "<") ? c.call.arg(0) : c.call.arg(1);
      Expr upper = (op == "<=" || op == "<") ? c.call.arg(1) : c.call.arg(0);
      auto coef = detail::scaled_var(upper, y);
      if (!coef || *coef <= 0.0) continue;
      Interval li = detail::eval_interval(lower, box_);
      if (li.empty() || !std::isfinite(li.hi)) continue;
      double v = li.hi / *coef;
      if (op == "<" || op == ">") v = std::nextafter(v, Interval::kInf);
      need = need ? std::max(*need, v) : v;
    }
    {
      ConstraintSet local = hyp_;
      for (const auto& c0 : r.conditions) {
        AtomicConstraint c = apply_subst(theta, c0);
        if (c.is_primitive()) local.push_back(c);
      }
      if (auto lb = propagated_box(local)) {
        if (auto it = lb->find(y); it != lb->end() && std::isfinite(it->second.lo)) {
          double v = it->second.lo_open ? std::nextafter(it->second.lo, Interval::kInf) : it->second.lo;
          need = need ? std::max(*need, v) : v;
        }
      }
    }
    if (need) {
      if (qual_var && *need <= 0.0) need = kQualEps;
      if (!qual_var || *need <= 1.0 + kQualEps) {
        double v = qual_var ? std::min(*need, 1.0) : *need;
        double snapped = std::round(v / kQualEps) * kQualEps;
        if (std::fabs(snapped - v) <= kQualEps && snapped != v) push(Expr::num(snapped));
        push(Expr::num(v));
      }
    } else if (qual_var) {
      push(Expr::num(kQualEps));
    }
    if (!qual_var) {
      ConstraintSet local = hyp_;
      for (const auto& c0 : r.conditions) {
        AtomicConstraint c = apply_subst(theta, c0);
        if (!c.is_primitive()) continue;
        auto vs = vars_of(c);
        bool only = std::find(vs.begin(), vs.end(), y) != vs.end();
        for (const auto& v : vs) {
          if (v != y && !theta.contains(v)) {
            auto hv = vars_of(hyp_);
            if (std::find(hv.begin(), hv.end(), v) == hv.end()) only = false;
          }
        }
        if (only) local.push_back(c);
      }
      if (local.size() > hyp_.size()) {
        SatVerdict sv = satisfiable(local);
        if (sv.sat()) {
          if (const Expr* w = sv.witness.lookup(y)) push(*w);
        }
      }
      std::vector<Expr> pool = pool_;
      std::stable_sort(pool.begin(), pool.end(),
                       [](const Expr& a, const Expr& b) { return expr_size(a) > expr_size(b); });
      for (const auto& p : pool) {
        if (out.size() >= opts_.max_candidates) break;
        push(p);
      }
    }
    push(Expr::bottom());
    return out;
  }

  bool rule_values(const Expr& e, const QualValue& floor, int depth, const Cont& k) {
    if (depth <= 0) {
      incomplete = true;
      return false;
    }
    std::vector<Val> acc;
    return args_values(e.args(), 0, floor, depth, true, acc, [&](std::vector<Val>& argv) {
      for (std::size_t idx = 0; idx < prog_.rules.size(); ++idx) {
        const ProgramRule& r = prog_.rules[idx];
        if (r.name != e.name() || r.patterns.size() != argv.size()) continue;
        if (!dom_.conforms(r.alpha) && logic_ == Logic::Qualified) continue;
        QualValue alpha = logic_ == Logic::Plain ? dom_.top() : r.alpha;
        auto inner = dom_.residual(floor, alpha);
        if (!inner) continue;
        Substitution theta;
        bool ok = true;
        for (std::size_t i = 0; i < argv.size() && ok; ++i) {
          ok = detail::match_pattern(r.patterns[i], argv[i].value, theta);
        }
        if (!ok) continue;
        std::vector<std::string> extras, seen;
        for (const auto& c : r.conditions) {
          collect_vars(c.call, seen);
          collect_vars(c.result, seen);
        }
        for (const auto& v : rule_vars(r)) {
          if (std::find(seen.begin(), seen.end(), v) == seen.end()) seen.push_back(v);
        }
        for (const auto& v : seen) {
          if (!theta.contains(v)) extras.push_back(v);
        }
        if (with_extras(r, idx, alpha, *inner, extras, 0, theta, e, argv, floor, depth, k)) return true;
      }
      return false;
    });
  }

  bool with_extras(const ProgramRule& r, std::size_t idx, const QualValue& alpha, const QualValue& inner,
                   const std::vector<std::string>& extras, std::size_t i, Substitution& theta, const Expr& e,
                   std::vector<Val>& argv, const QualValue& floor, int depth, const Cont& k) {
    if (i < extras.size()) {
      for (const auto& c : extra_candidates(r, extras[i], theta)) {
        theta.bind(extras[i], c);
        bool r2 = with_extras(r, idx, alpha, inner, extras, i + 1, theta, e, argv, floor, depth, k);
        theta.erase(extras[i]);
        if (r2) return true;
        if (nodes_ > opts_.node_budget) return false;
      }
      return false;
    }
    ProgramRule inst = instantiate_rule(r, theta);
    std::vector<Val> conds;
    return prove_conditions(inst, 0, inner, depth, conds, [&](std::vector<Val>& cv) {
      return values(inst.rhs, inner, depth - 1, [&](Val rv) {
        QualValue b = dom_.top();
        ProofNode n;
        n.step = Step::DF;
        n.rule_index = static_cast<int>(idx);
        n.theta = theta;
        for (auto& a : argv) {
          b = dom_.glb(b, a.bound);
          n.children.push_back(a.proof);
        }
        b = dom_.glb(b, dom_.attenuate(alpha, rv.bound));
        n.children.push_back(rv.proof);
        for (auto& c : cv) {
          b = dom_.glb(b, dom_.attenuate(alpha, c.bound));
          n.children.push_back(c.proof);
        }
        if (!dom_.approx_leq(floor, b)) return false;
        n.conclusion = QcStatement::production(e, rv.value, conclusion_qual(b), hyp_);
        return k({rv.value, b, std::move(n)});
      });
    });
  }

  bool prove_conditions(const ProgramRule& inst, std::size_t j, const QualValue& floor, int depth,
                        std::vector<Val>& acc, const std::function<bool(std::vector<Val>&)>& k) {
    if (j == inst.conditions.size()) return k(acc);
    return condition(inst.conditions[j], floor, depth - 1, [&](Val v) {
      acc.push_back(std::move(v));
      bool r = prove_conditions(inst, j + 1, floor, depth, acc, k);
      acc.pop_back();
      return r;
    });
  }

  const Program& prog_;
  QualDomain dom_;
  Logic logic_;
  ConstraintSet hyp_;
  ProverOptions opts_;
  const Interpretation* interp_;
  bool unfold_next_ = false;
  std::size_t nodes_ = 0;
  std::vector<Expr> pool_;
  Box box_;
  std::map<std::string, EntailVerdict> entail_cache_;
};

// ---------------------------------------------------------------------------
// holds

struct HoldsResult {
  enum class Kind { Derivable, NotFound, Unknown } kind = Kind::NotFound;
  std::optional<ProofNode> proof;
  std::string reason;

  bool derivable() const { return kind == Kind::Derivable; }
  bool not_found() const { return kind == Kind::NotFound; }
  bool unknown() const { return kind == Kind::Unknown; }
};

inline std::string to_string(HoldsResult::Kind k) {
  switch (k) {
    case HoldsResult::Kind::Derivable: return "derivable";
    case HoldsResult::Kind::NotFound: return "not_found";
    case HoldsResult::Kind::Unknown: return "unknown";
  }
  return "?";
}

/// Looks for a proof of phi from P (or, given `interp`, from I) within the
/// depth and node budgets. Plain logic expects statements without
/// qualification.
inline HoldsResult holds(const Program& prog, const QualDomain& dom, const QcStatement& phi,
                         ProverOptions opts = {}, const Interpretation* interp = nullptr) {
  Logic logic = phi.qual ? Logic::Qualified : Logic::Plain;
  if (logic == Logic::Qualified && !dom.is_strict(*phi.qual)) {
    throw UsageError("statement qualification must lie in D \\ {bottom}");
  }
  HoldsResult res;
  if (is_trivial(phi)) {
    ProofNode n;
    n.step = Step::TI;
    n.conclusion = phi;
    res.kind = HoldsResult::Kind::Derivable;
    res.proof = std::move(n);
    return res;
  }
  QualDomain d = logic == Logic::Plain ? QualDomain::unit() : dom;
  QualValue target = phi.qual ? *phi.qual : d.top();
  bool cut = false, undecided = false;
  for (int depth = 1; depth <= opts.max_depth; ++depth) {
    Search s(prog, d, logic, phi.hyp, opts, interp);
    if (phi.is_production()) {
      s.add_pool_terms(phi.lhs);
      s.add_pool_terms(phi.rhs);
    } else {
      s.add_pool_terms(phi.atom.call);
      s.add_pool_terms(phi.atom.result);
    }
    std::optional<ProofNode> found;
    auto accept = [&](Search::Val v) {
      ProofNode n = phi.is_production() ? s.weaken(v.proof, phi.rhs) : v.proof;
      n.conclusion.qual = phi.qual;
      found = std::move(n);
      return true;
    };
    if (phi.is_production()) {
      s.values(phi.lhs, target, depth, [&](Search::Val v) {
        if (!info_leq(phi.rhs, v.value)) return false;
        return accept(std::move(v));
      });
    } else {
      s.condition(phi.atom, target, depth, accept);
    }
    if (found) {
      res.kind = HoldsResult::Kind::Derivable;
      res.proof = std::move(found);
      return res;
    }
    undecided = undecided || s.undecided;
    cut = s.incomplete;
    if (!cut) break;
  }
  if (cut || undecided) {
    res.kind = HoldsResult::Kind::Unknown;
    res.reason = cut ? "search budget exhausted" : "constraint solver could not decide an entailment";
  } else {
    res.kind = HoldsResult::Kind::NotFound;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Proof checking

struct CheckResult {
  enum class Kind { Valid, Invalid, Unknown } kind = Kind::Valid;
  std::string reason;
  std::string path;  // child indices from the root, e.g. "0.2.1"

  bool valid() const { return kind == Kind::Valid; }
  bool invalid() const { return kind == Kind::Invalid; }
  bool unknown() const { return kind == Kind::Unknown; }
};

namespace detail {

class Checker {
 public:
  Checker(const Program& prog, const QualDomain& dom, const Interpretation* interp)
      : prog_(prog), dom_(dom), interp_(interp) {}

  CheckResult check(const ProofNode& n, const ConstraintSet& hyp, bool qualified, const std::string& path) {
    auto fail = [&](std::string why) { return CheckResult{CheckResult::Kind::Invalid, std::move(why), path}; };
    auto unknown = [&](std::string why) { return CheckResult{CheckResult::Kind::Unknown, std::move(why), path}; };
    const QcStatement& c = n.conclusion;
    if (c.qual.has_value() != qualified) return fail("qualification presence differs from the root");
    if (c.qual && !dom_.is_strict(*c.qual)) return fail("qualification outside D \\ {bottom}");
    if (!(c.hyp == hyp)) return fail("hypotheses differ from the root");

    int triv = trivial(c);
    if (n.step == Step::TI) {
      if (!n.children.empty()) return fail("TI has premises");
      if (triv == 1) return {};
      if (triv == 0) return fail("statement is not trivial");
      return unknown("satisfiability of the hypotheses is undecided");
    }
    if (triv == 1) return fail("statement is trivial and must use TI");
    if (triv == 2) return unknown("satisfiability of the hypotheses is undecided");

    CheckResult local = check_step(n, qualified);
    if (!local.valid()) {
      local.path = path;
      return local;
    }
    CheckResult pending;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      CheckResult r = check(n.children[i], hyp, qualified, path.empty() ? std::to_string(i) : path + "." + std::to_string(i));
      if (r.invalid()) return r;
      if (r.unknown() && pending.valid()) pending = r;
    }
    return pending;
  }

 private:
  // 1 trivial, 0 not trivial, 2 undecided.
  int trivial(const QcStatement& s) {
    if (s.is_production() && s.rhs.is_bottom()) return 1;
    if (s.hyp.empty()) return 0;
    std::string key = to_string(s.hyp);
    auto it = sat_.find(key);
    if (it == sat_.end()) it = sat_.emplace(key, satisfiable(s.hyp)).first;
    if (it->second.unsat()) return 1;
    if (it->second.sat()) return 0;
    return 2;
  }

  bool qual_ok(const ProofNode& parent, const ProofNode& child, const std::optional<QualValue>& alpha) {
    if (!parent.conclusion.qual) return true;
    const QualValue& d = *parent.conclusion.qual;
    const QualValue& di = *child.conclusion.qual;
    if (alpha) return dom_.approx_leq(d, dom_.attenuate(*alpha, di));
    return dom_.approx_leq(d, di);
  }

  static bool is_production_of(const ProofNode& ch, const Expr& e, const Expr& t) {
    return ch.conclusion.is_production() && ch.conclusion.lhs == e && ch.conclusion.rhs == t;
  }

  CheckResult premises_for_args(const ProofNode& n, std::span<const Expr> args, std::vector<Expr>& ts) {
    for (std::size_t i = 0; i < args.size(); ++i) {
      const auto& ch = n.children[i];
      if (!ch.conclusion.is_production() || !(ch.conclusion.lhs == args[i])) {
        return {CheckResult::Kind::Invalid, "premise " + std::to_string(i) + " does not reduce argument " +
                                                std::to_string(i), ""};
      }
      if (!qual_ok(n, ch, std::nullopt)) {
        return {CheckResult::Kind::Invalid, "premise " + std::to_string(i) + " is qualified below the conclusion", ""};
      }
      ts.push_back(ch.conclusion.rhs);
    }
    return {};
  }

  CheckResult entail_check(const ConstraintSet& hyp, const AtomicConstraint& c) {
    EntailVerdict v = entails(hyp, c);
    if (v.entailed()) return {};
    if (v.unknown()) return {CheckResult::Kind::Unknown, "entailment of " + to_string(c) + " is undecided", ""};
    return {CheckResult::Kind::Invalid, "hypotheses do not entail " + to_string(c), ""};
  }

  CheckResult check_step(const ProofNode& n, bool qualified) {
    const QcStatement& c = n.conclusion;
    auto fail = [](std::string why) { return CheckResult{CheckResult::Kind::Invalid, std::move(why), ""}; };
    switch (n.step) {
      case Step::TI: return {};
      case Step::RR:
        if (!c.is_production() || !(c.lhs == c.rhs) || !(c.lhs.is_var() || c.lhs.is_num())) {
          return fail("RR needs v -> v with v a variable or basic value");
        }
        if (!n.children.empty()) return fail("RR has premises");
        return {};
      case Step::DC: {
        if (!c.is_production() || !c.lhs.is_constructor_app()) return fail("DC needs a constructor application");
        if (!c.rhs.is_app() || c.rhs.name() != c.lhs.name() || c.rhs.arity() != c.lhs.arity()) {
          return fail("DC result is not headed by the same constructor");
        }
        if (n.children.size() != c.lhs.arity()) return fail("DC premise count differs from the arity");
        std::vector<Expr> ts;
        if (auto r = premises_for_args(n, c.lhs.args(), ts); !r.valid()) return r;
        for (std::size_t i = 0; i < ts.size(); ++i) {
          if (!(ts[i] == c.rhs.arg(i))) return fail("DC premise " + std::to_string(i) + " has the wrong value");
        }
        return {};
      }
      case Step::PF: {
        if (!c.is_production() || !c.lhs.is_primitive_app()) return fail("PF needs a primitive application");
        if (!is_result_value(c.rhs)) return fail("PF result must be a variable, nullary constructor or number");
        if (n.children.size() != c.lhs.arity()) return fail("PF premise count differs from the arity");
        std::vector<Expr> ts;
        if (auto r = premises_for_args(n, c.lhs.args(), ts); !r.valid()) return r;
        return entail_check(c.hyp, {c.lhs.with_args(ts), c.rhs});
      }
      case Step::AC: {
        if (!c.is_atom() || !c.atom.call.is_primitive_app()) return fail("AC needs a primitive atomic constraint");
        if (n.children.size() != c.atom.call.arity()) return fail("AC premise count differs from the arity");
        std::vector<Expr> ts;
        if (auto r = premises_for_args(n, c.atom.call.args(), ts); !r.valid()) return r;
        return entail_check(c.hyp, {c.atom.call.with_args(ts), c.atom.result});
      }
      case Step::DF: return check_df(n, qualified);
    }
    return fail("unknown step");
  }

  CheckResult check_df(const ProofNode& n, bool qualified) {
    const QcStatement& c = n.conclusion;
    auto fail = [](std::string why) { return CheckResult{CheckResult::Kind::Invalid, std::move(why), ""}; };
    if (!c.is_production() || !c.lhs.is_defined_app()) return fail("DF needs a defined function call");
    std::size_t ar = c.lhs.arity();
    if (n.rule_index < 0) {
      if (!interp_) return fail("DF without a program rule");
      if (n.children.size() != ar) return fail("DF premise count differs from the arity");
      std::vector<Expr> ts;
      if (auto r = premises_for_args(n, c.lhs.args(), ts); !r.valid()) return r;
      QcStatement fact = QcStatement::production(c.lhs.with_args(ts), c.rhs, c.qual, c.hyp);
      if (!interp_->contains(fact)) return fail("fact " + to_string(fact) + " is not in the interpretation");
      return {};
    }
    if (static_cast<std::size_t>(n.rule_index) >= prog_.rules.size()) return fail("rule index out of range");
    const ProgramRule& rule = prog_.rules[n.rule_index];
    if (rule.name != c.lhs.name() || rule.patterns.size() != ar) return fail("rule does not define the called function");
    ProgramRule inst = instantiate_rule(rule, n.theta);
    if (n.children.size() != ar + 1 + inst.conditions.size()) return fail("DF premise count differs from the rule");
    for (std::size_t i = 0; i < ar; ++i) {
      if (!is_production_of(n.children[i], c.lhs.arg(i), inst.patterns[i])) {
        return fail("premise " + std::to_string(i) + " does not match the rule instance");
      }
      if (!qual_ok(n, n.children[i], std::nullopt)) return fail("argument premise qualified below the conclusion");
    }
    std::optional<QualValue> alpha;
    if (qualified) alpha = rule.alpha;
    if (!is_production_of(n.children[ar], inst.rhs, c.rhs)) return fail("body premise does not match the rule instance");
    if (!qual_ok(n, n.children[ar], alpha)) return fail("body premise too weak for the attenuation factor");
    for (std::size_t j = 0; j < inst.conditions.size(); ++j) {
      const auto& ch = n.children[ar + 1 + j];
      if (!ch.conclusion.is_atom() || !(ch.conclusion.atom == inst.conditions[j])) {
        return fail("condition premise " + std::to_string(j) + " does not match the rule instance");
      }
      if (!qual_ok(n, ch, alpha)) return fail("condition premise too weak for the attenuation factor");
    }
    return {};
  }

  const Program& prog_;
  QualDomain dom_;
  const Interpretation* interp_;
  std::map<std::string, SatVerdict> sat_;
};

}  // namespace detail

/// Verifies every inference of `tree` against P (or I for interpretation
/// steps).
inline CheckResult check_proof(const Program& prog, const QualDomain& dom, const ProofNode& tree,
                               const Interpretation* interp = nullptr) {
  detail::Checker ch(prog, dom, interp);
  return ch.check(tree, tree.conclusion.hyp, tree.conclusion.qual.has_value(), "");
}

// ---------------------------------------------------------------------------
// Bounded fixpoint iteration

struct LfpResult {
  Interpretation interp;
  std::vector<QcStatement> facts;  // every fact over the finite family, trivial ones included
  bool partial = false;
  bool converged = false;  // an iteration added nothing new
};

/// k applications of the transformer starting from the trivial facts, with
/// heads, results, qualifications and hypotheses restricted to the given
/// finite family.
inline LfpResult bounded_lfp(const Program& prog, const QualDomain& dom, int k, const std::vector<Expr>& universe,
                             const std::vector<QualValue>& quals, const std::vector<ConstraintSet>& hyps,
                             ProverOptions opts = {}) {
  for (const auto& q : quals) {
    if (!dom.is_strict(q)) throw UsageError("grid qualification outside D \\ {bottom}");
  }
  std::map<std::string, int> fns;
  for (const auto& r : prog.rules) fns.emplace(r.name, static_cast<int>(r.patterns.size()));

  LfpResult res{Interpretation(dom), {}, false, false};
  auto covers = [](const Interpretation& a, const Interpretation& b) {
    for (const auto& f : b.generators()) {
      if (!a.contains(f.statement())) return false;
    }
    return true;
  };
  auto tuples = [&](int n) {
    std::vector<std::vector<Expr>> out{{}};
    for (int i = 0; i < n; ++i) {
      std::vector<std::vector<Expr>> next;
      for (const auto& t : out) {
        for (const auto& u : universe) {
          auto t2 = t;
          t2.push_back(u);
          next.push_back(std::move(t2));
        }
      }
      out = std::move(next);
    }
    return out;
  };
  std::vector<bool> hyp_sat;
  for (const auto& h : hyps) hyp_sat.push_back(!satisfiable(h).unsat());

  for (int iter = 0; iter < k; ++iter) {
    Interpretation next(dom);
    const Interpretation& prev = res.interp;
    for (const auto& [fn, ar] : fns) {
      for (const auto& args : tuples(ar)) {
        Expr call = Expr::app(fn, SymKind::Defined, args);
        for (std::size_t h = 0; h < hyps.size(); ++h) {
          if (!hyp_sat[h]) continue;
          Search s(prog, dom, Logic::Qualified, hyps[h], opts, &prev);
          s.set_pool(universe);
          std::vector<QcFact> found;
          s.unfold(call, dom.bottom(), 2, [&](Search::Val v) {
            if (!dom.is_strict(v.bound)) return false;
            for (const auto& u : universe) {
              if (info_leq(u, v.value)) found.push_back({fn, args, u, v.bound, hyps[h]});
            }
            return false;
          });
          if (s.incomplete || s.undecided) res.partial = true;
          for (auto& f : found) next.add(std::move(f));
        }
      }
    }
    bool same = covers(prev, next) && covers(next, prev);
    res.interp = std::move(next);
    if (same) {
      res.converged = true;
      break;
    }
  }

  std::vector<Expr> results = universe;
  results.push_back(Expr::bottom());
  for (const auto& [fn, ar] : fns) {
    for (const auto& args : tuples(ar)) {
      Expr call = Expr::app(fn, SymKind::Defined, args);
      for (const auto& t : results) {
        for (const auto& q : quals) {
          for (const auto& h : hyps) {
            QcStatement phi = QcStatement::production(call, t, q, h);
            if (res.interp.contains(phi)) res.facts.push_back(std::move(phi));
          }
        }
      }
    }
  }
  return res;
}

}  // namespace qcflp

#pragma once

// Goal solver for unqualified (translated) programs: lazy narrowing with
// call-time choice, rules tried in textual order, conditions left to right,
// and an interval-propagated store for numeric and qualification
// constraints.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qcflp/solver.hpp"
#include "qcflp/syntax.hpp"

namespace qcflp {

struct QualInterval {
  std::string var;
  Interval range;
};

struct Answer {
  Substitution subst;                // goal variables other than qualification variables
  std::vector<QualInterval> qual;    // goal qualification variables
  ConstraintSet residual;            // store constraints over goal variables
  bool conditional = false;          // the store's satisfiability is undecided
  bool incomplete = false;           // produced after a depth cut

  std::vector<std::string> flags() const {
    std::vector<std::string> f;
    if (conditional) f.push_back("conditional");
    if (incomplete) f.push_back("incomplete");
    return f;
  }
};

/// `{ R -> 4 } { W in [0.65, 0.7] }`
inline std::string to_string(const Answer& a) {
  std::string out = "{";
  bool first = true;
  for (const auto& [v, t] : a.subst) {
    out += first ? " " : ", ";
    first = false;
    out += v + " -> " + to_string(t);
  }
  out += first ? "}" : " }";
  if (!a.qual.empty()) {
    out += " {";
    for (std::size_t i = 0; i < a.qual.size(); ++i) {
      out += i ? ", " : " ";
      out += a.qual[i].var + " in " + to_string(a.qual[i].range);
    }
    out += " }";
  }
  if (!a.residual.empty()) out += " { " + to_string(a.residual) + " }";
  for (const auto& f : a.flags()) out += " [" + f + "]";
  return out;
}

/// Constraint store of a solver session: the posted constraints and the
/// interval box they propagate to.
class AnswerStore {
 public:
  explicit AnswerStore(QualDomain dom = QualDomain::unit()) : dom_(std::move(dom)), box_(Box{}) {}

  const ConstraintSet& constraints() const { return cs_; }
  bool failed() const { return !box_.has_value(); }

  /// Interval of a variable; (-inf, inf) when unconstrained.
  Interval interval(const std::string& var) const {
    if (!box_) return Interval::empty_set();
    auto it = box_->find(var);
    return it == box_->end() ? Interval::entire() : it->second;
  }

  /// Posts a primitive constraint. Returns false (leaving the store failed)
  /// when propagation empties the box.
  bool post(const AtomicConstraint& c) {
    if (failed()) return false;
    cs_.push_back(c);
    box_ = propagated_box(cs_);
    return box_.has_value();
  }

  bool post_qual(const QualEncodedConstraint& c) {
    for (const auto& a : lower(c, dom_)) {
      if (!post(a)) return false;
    }
    return true;
  }

 private:
  QualDomain dom_;
  ConstraintSet cs_;
  std::optional<Box> box_;
};

struct SolveOptions {
  int max_depth = 8;                  // nested rule applications; iterative deepening up to this
  std::size_t max_answers = 0;        // 0 = all
  std::size_t step_budget = 2000000;  // per deepening round
  std::function<void(const std::string&)> trace;
};

struct SolveReport {
  std::vector<Answer> answers;
  bool incomplete = false;  // some branch was cut by depth or budget
  bool budget_exhausted = false;
};

namespace detail {

struct RtState {
  std::map<std::string, Expr> bind;
  ConstraintSet store;
};

class Narrower {
 public:
  using Cont = std::function<bool(RtState&)>;
  using ValCont = std::function<bool(const Expr&, RtState&)>;

  Narrower(const Program& prog, const SolveOptions& opts) : prog_(prog), opts_(opts) {
    for (std::size_t i = 0; i < prog_.rules.size(); ++i) by_name_[prog_.rules[i].name].push_back(i);
  }

  bool cut = false;
  bool budget_hit = false;

  // Follows variable-to-variable and variable-to-value bindings.
  Expr walk(const Expr& e, const RtState& st) const {
    Expr cur = e;
    while (cur.is_var()) {
      auto it = st.bind.find(cur.name());
      if (it == st.bind.end()) break;
      cur = it->second;
    }
    return cur;
  }

  // Replaces bound variables everywhere, keeping variables bound to
  // unevaluated calls.
  Expr resolve(const Expr& e, const RtState& st) const {
    if (e.is_var()) {
      Expr w = walk(e, st);
      if (w.is_var()) return w;
      if (!is_passive(w)) return last_var(e, st);
      return resolve(w, st);
    }
    if (!e.is_app() || e.arity() == 0) return e;
    std::vector<Expr> args;
    for (const auto& a : e.args()) args.push_back(resolve(a, st));
    return e.with_args(std::move(args));
  }

  ConstraintSet resolved_store(const RtState& st) const {
    ConstraintSet out;
    for (const auto& c : st.store) out.push_back({resolve(c.call, st), resolve(c.result, st)});
    return out;
  }

  bool consistent(const RtState& st) const {
    ConstraintSet cs = resolved_store(st);
    for (const auto& c : cs) {
      if (is_ground(c.call) && is_ground(c.result)) {
        Expr v = evaluate_ground(c.call);
        if (v.is_bottom() || !(v == c.result)) return false;
      }
    }
    return propagated_box(cs).has_value();
  }

  bool hnf(const Expr& e, int depth, RtState& st, const ValCont& k) {
    if (!tick()) return false;
    if (e.is_var()) {
      auto it = st.bind.find(e.name());
      if (it == st.bind.end()) return k(e, st);
      Expr b = it->second;
      std::string name = e.name();
      return hnf(b, depth, st, [&, name, b](const Expr& h, RtState& s) {
        if (!(h == b)) {
          RtState s2 = s;
          s2.bind[name] = h;
          return k(h, s2);
        }
        return k(h, s);
      });
    }
    if (e.is_num() || e.is_constructor_app()) return k(e, st);
    if (e.is_bottom()) return false;
    if (e.is_primitive_app()) return primitive(e, depth, st, k);
    return call(e, depth, st, k);
  }

  bool nf(const Expr& e, int depth, RtState& st, const ValCont& k) {
    return hnf(e, depth, st, [&, depth](const Expr& h, RtState& s) {
      if (!h.is_constructor_app() || h.arity() == 0) return k(h, s);
      return nf_args(h, 0, {}, depth, s, k);
    });
  }

  bool solve_conditions(const ConstraintSet& cs, std::size_t i, int depth, RtState& st, const Cont& k) {
    if (i == cs.size()) return k(st);
    return condition(cs[i], depth, st, [&, i, depth](RtState& s) { return solve_conditions(cs, i + 1, depth, s, k); });
  }

  bool condition(const AtomicConstraint& c, int depth, RtState& st, const Cont& k) {
    if (!tick()) return false;
    const Expr& call = c.call;
    if (call.is_app_of(sym::kEq) && call.arity() == 2 && c.result.is_true()) {
      return nf(call.arg(0), depth, st, [&, depth](const Expr& a, RtState& s) {
        return nf(call.arg(1), depth, s, [&, a](const Expr& b, RtState& s2) {
          RtState s3 = s2;
          std::size_t before = s3.bind.size();
          if (!unify(a, b, s3)) return false;
          if (s3.bind.size() != before && !s3.store.empty() && !consistent(s3)) return false;
          return k(s3);
        });
      });
    }
    if (!call.is_primitive_app()) return false;
    return nf_list(call.args(), 0, {}, depth, st, [&](std::vector<Expr>& ts, RtState& s) {
      Expr inst = call.with_args(ts);
      Expr r = resolve(c.result, s);
      bool ground = true;
      for (const auto& t : ts) ground = ground && is_ground(resolve(t, s));
      if (ground) {
        Expr v = evaluate_ground(resolve(inst, s));
        if (v.is_bottom()) return false;
        if (r.is_var()) {
          RtState s2 = s;
          s2.bind[r.name()] = v;
          if (!consistent(s2)) return false;
          return k(s2);
        }
        if (!(v == r)) return false;
        return k(s);
      }
      RtState s2 = s;
      s2.store.push_back({inst, c.result});
      if (!consistent(s2)) return false;
      return k(s2);
    });
  }

 private:
  static bool is_passive(const Expr& e) {
    if (e.is_defined_app()) return false;
    for (const auto& a : e.args()) {
      if (!is_passive(a)) return false;
    }
    return true;
  }

  Expr last_var(const Expr& e, const RtState& st) const {
    Expr cur = e;
    for (;;) {
      auto it = st.bind.find(cur.name());
      if (it == st.bind.end() || !it->second.is_var()) return cur;
      cur = it->second;
    }
  }

  bool tick() {
    if (++steps_ > opts_.step_budget) {
      budget_hit = true;
      cut = true;
      return false;
    }
    return true;
  }

  bool nf_args(const Expr& h, std::size_t i, std::vector<Expr> done, int depth, RtState& st, const ValCont& k) {
    if (i == h.arity()) return k(h.with_args(std::move(done)), st);
    return nf(h.arg(i), depth, st, [&, i, done, depth](const Expr& a, RtState& s) {
      std::vector<Expr> d = done;
      d.push_back(a);
      return nf_args(h, i + 1, std::move(d), depth, s, k);
    });
  }

  bool nf_list(std::span<const Expr> es, std::size_t i, std::vector<Expr> done, int depth, RtState& st,
               const std::function<bool(std::vector<Expr>&, RtState&)>& k) {
    if (i == es.size()) return k(done, st);
    return nf(es[i], depth, st, [&, es, i, done, depth](const Expr& a, RtState& s) {
      std::vector<Expr> d = done;
      d.push_back(a);
      return nf_list(es, i + 1, std::move(d), depth, s, k);
    });
  }

  bool bind_var(const std::string& v, const Expr& t, RtState& st) {
    if (t.is_var() && t.name() == v) return true;
    if (occurs_resolved(v, t, st)) return false;
    st.bind[v] = t;
    return true;
  }

  bool occurs_resolved(const std::string& v, const Expr& t, const RtState& st) const {
    Expr r = resolve(t, st);
    return occurs(v, r);
  }

  // Unification of two normal forms.
  bool unify(const Expr& a0, const Expr& b0, RtState& st) {
    Expr a = walk(a0, st), b = walk(b0, st);
    if (a.is_var()) return bind_var(a.name(), b, st);
    if (b.is_var()) return bind_var(b.name(), a, st);
    if (a.is_num() || b.is_num()) return a.is_num() && b.is_num() && a.number() == b.number();
    if (!a.is_app() || !b.is_app() || a.name() != b.name() || a.arity() != b.arity()) return false;
    for (std::size_t i = 0; i < a.arity(); ++i) {
      if (!unify(a.arg(i), b.arg(i), st)) return false;
    }
    return true;
  }

  bool primitive(const Expr& e, int depth, RtState& st, const ValCont& k) {
    return nf_list(e.args(), 0, {}, depth, st, [&](std::vector<Expr>& ts, RtState& s) {
      Expr inst = resolve(e.with_args(ts), s);
      bool ground = true;
      for (const auto& a : inst.args()) ground = ground && is_ground(a);
      if (ground) {
        Expr v = evaluate_ground(inst);
        if (v.is_bottom()) return false;
        return k(v, s);
      }
      return k(inst, s);
    });
  }

  Expr rename(const Expr& e, const std::string& suffix) const {
    if (e.is_var()) return Expr::var(e.name() + suffix);
    if (!e.is_app() || e.arity() == 0) return e;
    std::vector<Expr> args;
    for (const auto& a : e.args()) args.push_back(rename(a, suffix));
    return e.with_args(std::move(args));
  }

  bool call(const Expr& e, int depth, RtState& st, const ValCont& k) {
    if (depth <= 0) {
      cut = true;
      return false;
    }
    auto it = by_name_.find(e.name());
    if (it == by_name_.end()) return false;
    for (std::size_t idx : it->second) {
      const ProgramRule& r = prog_.rules[idx];
      if (r.patterns.size() != e.arity()) continue;
      std::string suffix = "#" + std::to_string(fresh_++);
      std::vector<Expr> pats;
      for (const auto& p : r.patterns) pats.push_back(rename(p, suffix));
      ConstraintSet conds;
      for (const auto& c : r.conditions) conds.push_back({rename(c.call, suffix), rename(c.result, suffix)});
      Expr rhs = rename(r.rhs, suffix);
      if (opts_.trace) opts_.trace("try rule " + std::to_string(idx) + " for " + to_string(resolve(e, st)));
      RtState s = st;
      bool stop = match_list(pats, e.args(), 0, depth, s, [&, depth](RtState& s1) {
        return solve_conditions(conds, 0, depth - 1, s1, [&, depth](RtState& s2) {
          return hnf(rhs, depth - 1, s2, k);
        });
      });
      if (stop) return true;
      if (budget_hit) return false;
    }
    return false;
  }

  bool match_list(const std::vector<Expr>& pats, std::span<const Expr> args, std::size_t i, int depth, RtState& st,
                  const Cont& k) {
    if (i == pats.size()) return k(st);
    return match(pats[i], args[i], depth, st,
                 [&, i, depth](RtState& s) { return match_list(pats, args, i + 1, depth, s, k); });
  }

  bool match(const Expr& pat, const Expr& arg, int depth, RtState& st, const Cont& k) {
    if (pat.is_var()) {
      RtState s = st;
      s.bind[pat.name()] = arg;
      return k(s);
    }
    return hnf(arg, depth, st, [&, depth](const Expr& h, RtState& s) {
      if (h.is_var()) {
        RtState s2 = s;
        Expr shape = pat;
        if (pat.is_app()) {
          std::vector<Expr> vs;
          for (std::size_t i = 0; i < pat.arity(); ++i) vs.push_back(Expr::var("_N#" + std::to_string(fresh_++)));
          shape = pat.with_args(vs);
        }
        s2.bind[h.name()] = shape;
        if (!consistent(s2)) return false;
        if (!pat.is_app() || pat.arity() == 0) return k(s2);
        return match_list(std::vector<Expr>(pat.args().begin(), pat.args().end()), shape.args(), 0, depth, s2, k);
      }
      if (pat.is_num()) return h.is_num() && h.number() == pat.number() && k(s);
      if (!h.is_app() || h.name() != pat.name() || h.arity() != pat.arity()) return false;
      if (h.arity() == 0) return k(s);
      std::vector<Expr> ps(pat.args().begin(), pat.args().end());
      return match_list(ps, h.args(), 0, depth, s, k);
    });
  }

  const Program& prog_;
  const SolveOptions& opts_;
  std::map<std::string, std::vector<std::size_t>> by_name_;
  std::size_t steps_ = 0;
  long fresh_ = 0;
};

inline void qual_vars_in(const ConstraintSet& goal, std::vector<std::string>& out) {
  for (const auto& c : goal) {
    if (c.call.is_app_of(sym::kQVal) && c.call.arity() == 1) collect_vars(c.call.arg(0), out);
  }
}

}  // namespace detail

struct HeadNormalForm {
  Expr value;
  ConstraintSet store;  // constraints posted on the way, resolved
  bool conditional = false;
};

/// All head normal forms of `e`, in search order, up to `opts.max_depth`.
inline std::vector<HeadNormalForm> hnf(const Program& prog, const Expr& e, const SolveOptions& opts = {}) {
  std::vector<HeadNormalForm> out;
  detail::Narrower nw(prog, opts);
  detail::RtState st;
  nw.hnf(e, opts.max_depth, st, [&](const Expr& h, detail::RtState& s) {
    ConstraintSet cs = nw.resolved_store(s);
    SatVerdict sv = satisfiable(cs);
    if (sv.unsat()) return false;
    out.push_back({nw.resolve(h, s), cs, sv.unknown()});
    return opts.max_answers && out.size() >= opts.max_answers;
  });
  return out;
}

/// Solves a conjunction of constraints against P with iterative deepening.
/// `on_answer` returns false to stop the enumeration.
inline SolveReport solve(const Program& prog, const ConstraintSet& goal, const SolveOptions& opts = {},
                         const std::function<bool(const Answer&)>& on_answer = {}) {
  SolveReport rep;
  std::vector<std::string> goal_vars = vars_of(goal);
  std::vector<std::string> qvars;
  detail::qual_vars_in(goal, qvars);
  std::erase_if(qvars, [](const std::string& v) { return is_reserved_qual_var(v); });
  std::erase_if(goal_vars, [](const std::string& v) { return is_reserved_qual_var(v); });
  std::set<std::string> seen;
  bool stopped = false;

  for (int depth = 1; depth <= opts.max_depth && !stopped; ++depth) {
    detail::Narrower nw(prog, opts);
    detail::RtState st;
    nw.solve_conditions(goal, 0, depth, st, [&](detail::RtState& s) {
      ConstraintSet cs = nw.resolved_store(s);
      SatVerdict sv = satisfiable(cs);
      if (sv.unsat()) return false;
      Answer a;
      a.conditional = sv.unknown();
      for (const auto& v : goal_vars) {
        if (std::find(qvars.begin(), qvars.end(), v) != qvars.end()) continue;
        Expr t = nw.resolve(Expr::var(v), s);
        if (!(t.is_var() && t.name() == v)) a.subst.bind(v, t);
      }
      auto box = propagated_box(cs);
      for (const auto& q : qvars) {
        Expr t = nw.resolve(Expr::var(q), s);
        Interval range = Interval::entire();
        if (t.is_num()) {
          range = Interval::point(t.number());
        } else if (t.is_var() && box) {
          if (auto it = box->find(t.name()); it != box->end()) range = it->second;
        }
        a.qual.push_back({q, range});
      }
      std::vector<std::string> store_qvars;
      detail::qual_vars_in(cs, store_qvars);
      for (const auto& c : cs) {
        bool involves_goal = false, only_qual = true;
        for (const auto& v : vars_of(c)) {
          if (std::find(goal_vars.begin(), goal_vars.end(), v) != goal_vars.end()) involves_goal = true;
          if (std::find(store_qvars.begin(), store_qvars.end(), v) == store_qvars.end() && !is_reserved_qual_var(v))
            only_qual = false;
        }
        if (involves_goal && !only_qual) a.residual.push_back(c);
      }
      a.incomplete = nw.cut && depth == opts.max_depth;
      std::string key = to_string(a.subst) + "|" + to_string(a.residual);
      for (const auto& q : a.qual) key += "|" + to_string(q.range);
      if (!seen.insert(key).second) return false;
      rep.answers.push_back(a);
      if (on_answer && !on_answer(a)) {
        stopped = true;
        return true;
      }
      if (opts.max_answers && rep.answers.size() >= opts.max_answers) {
        stopped = true;
        return true;
      }
      return false;
    });
    rep.incomplete = nw.cut;
    rep.budget_exhausted = nw.budget_hit;
    if (!nw.cut) break;
  }
  if (stopped) rep.incomplete = false;
  return rep;
}

}  // namespace qcflp

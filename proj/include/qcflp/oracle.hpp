#pragma once

// Cross-check of the declarative semantics against the runtime on tiny
// programs over the unit domain. For every defined f and every argument
// tuple drawn from a finite universe, the qualified facts of the bounded
// fixpoint are compared with the answers of the translated goal
// f'(t1..tn, W) == R: each result must come with exactly the set of W values
// (0, d] where d is the largest qualification the fixpoint derives.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcflp/prover.hpp"
#include "qcflp/runtime.hpp"
#include "qcflp/transform.hpp"

namespace qcflp {

/// A qualification condition of a translated rule: rules[rule].conditions[condition].
struct MutationSite {
  std::size_t rule = 0;
  std::size_t condition = 0;
};

inline bool is_qual_condition(const AtomicConstraint& c) {
  if (c.call.is_app_of(sym::kQVal)) return true;
  for (const auto& v : vars_of(c)) {
    if (is_reserved_qual_var(v)) return true;
  }
  return false;
}

inline std::vector<MutationSite> mutation_sites(const Program& translated) {
  std::vector<MutationSite> out;
  for (std::size_t i = 0; i < translated.rules.size(); ++i) {
    const auto& cs = translated.rules[i].conditions;
    for (std::size_t j = 0; j < cs.size(); ++j) {
      if (is_qual_condition(cs[j])) out.push_back({i, j});
    }
  }
  return out;
}

inline Program drop_condition(Program p, const MutationSite& site) {
  auto& cs = p.rules.at(site.rule).conditions;
  cs.erase(cs.begin() + static_cast<std::ptrdiff_t>(site.condition));
  return p;
}

inline void call_qual_vars(const Expr& e, std::vector<std::string>& out) {
  if (!e.is_app()) return;
  if (e.is_defined_app() && e.arity() > 0 && e.args().back().is_var()) out.push_back(e.args().back().name());
  for (const auto& a : e.args()) call_qual_vars(a, out);
}

/// Whether dropping the site's condition leaves an equivalent rule: the
/// remaining conditions, together with qVal of every qualification argument
/// passed to a call (each callee imposes it on its own head), entail it.
inline bool is_redundant_site(const Program& translated, const MutationSite& site) {
  const ProgramRule& r = translated.rules.at(site.rule);
  ConstraintSet rest;
  std::vector<std::string> callee_vars;
  call_qual_vars(r.rhs, callee_vars);
  for (std::size_t j = 0; j < r.conditions.size(); ++j) {
    const auto& c = r.conditions[j];
    call_qual_vars(c.call, callee_vars);
    if (j != site.condition && c.is_primitive()) rest.push_back(c);
  }
  for (const auto& v : callee_vars) rest.push_back(AtomicConstraint::holds(Expr::prim(std::string(sym::kQVal), {Expr::var(v)})));
  const AtomicConstraint& dropped = r.conditions[site.condition];
  if (!dropped.is_primitive()) return false;
  return entails(rest, dropped).entailed();
}

struct OracleOptions {
  std::vector<Expr> universe;  // empty: ground data subterms of the program
  int lfp_iterations = 6;
  int depth = 6;
  std::size_t max_rules = 16;
  std::size_t max_universe = 20;
  std::optional<MutationSite> mutation;
  ProverOptions prover;
};

struct OracleRow {
  std::string call;
  std::string result;
  std::optional<double> lfp;       // largest derived qualification
  std::optional<Interval> runtime; // hull of the W intervals over the answers
  bool shape_ok = true;            // every runtime interval is (0, h]
  bool match = false;
};

struct OracleReport {
  std::vector<OracleRow> rows;
  std::size_t mismatches = 0;
  bool budget_exceeded = false;
  std::string note;
  bool ok() const { return mismatches == 0 && !budget_exceeded; }
};

inline std::vector<Expr> default_universe(const Program& p) {
  std::vector<Expr> out;
  auto add = [&](const Expr& e) {
    std::vector<Expr> sub;
    detail::ground_subterms(e, sub);
    for (auto& t : sub) {
      if (detail::is_data(t) && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    }
  };
  for (const auto& r : p.rules) {
    for (const auto& pat : r.patterns) add(pat);
    add(r.rhs);
    for (const auto& c : r.conditions) {
      add(c.call);
      add(c.result);
    }
  }
  return out;
}

inline std::string format_oracle_row(const OracleRow& r) {
  std::string out = r.match ? "match    " : "MISMATCH ";
  out += r.call + " -> " + r.result;
  out += "  lfp=" + (r.lfp ? format_real(*r.lfp) : std::string("none"));
  out += "  runtime=" + (r.runtime ? to_string(*r.runtime) : std::string("none"));
  if (!r.shape_ok) out += "  (interval not of the form (0, h])";
  return out;
}

inline OracleReport oracle_compare(const Program& prog, const OracleOptions& opts = {}) {
  const QualDomain dom = QualDomain::unit();
  OracleReport rep;
  std::vector<Expr> universe = opts.universe.empty() ? default_universe(prog) : opts.universe;
  if (prog.rules.size() > opts.max_rules || universe.size() > opts.max_universe) {
    rep.budget_exceeded = true;
    rep.note = "program or universe larger than the configured limits";
    return rep;
  }

  LfpResult lfp = bounded_lfp(prog, dom, opts.lfp_iterations, universe, {dom.top()}, {ConstraintSet{}}, opts.prover);
  if (lfp.partial) {
    rep.budget_exceeded = true;
    rep.note = "fixpoint search was cut by its budget";
  } else if (!lfp.converged) {
    rep.budget_exceeded = true;
    rep.note = "no fixpoint within " + std::to_string(opts.lfp_iterations) + " iterations";
  }

  FreshSupply fresh(0);
  TranslatedProgram tp = transform_program(prog, dom, fresh);
  Program target = opts.mutation ? drop_condition(tp.program, *opts.mutation) : tp.program;

  std::map<std::string, std::size_t> fns;
  for (const auto& r : prog.rules) fns.emplace(r.name, r.patterns.size());

  for (const auto& [fn, ar] : fns) {
    std::vector<std::vector<Expr>> tuples{{}};
    for (std::size_t i = 0; i < ar; ++i) {
      std::vector<std::vector<Expr>> next;
      for (const auto& t : tuples) {
        for (const auto& u : universe) {
          auto t2 = t;
          t2.push_back(u);
          next.push_back(std::move(t2));
        }
      }
      tuples = std::move(next);
    }
    for (const auto& args : tuples) {
      std::string call = to_string(Expr::app(fn, SymKind::Defined, args));
      std::map<std::string, OracleRow> rows;
      auto row = [&](const Expr& result) -> OracleRow& {
        std::string key = to_string(result);
        auto [it, fresh_row] = rows.try_emplace(key);
        if (fresh_row) {
          it->second.call = call;
          it->second.result = key;
        }
        return it->second;
      };

      for (const auto& g : lfp.interp.generators()) {
        if (g.fn != fn || g.args != args || !g.hyp.empty()) continue;
        OracleRow& r = row(g.result);
        r.lfp = std::max(r.lfp.value_or(0.0), g.qual.value());
      }

      std::vector<Expr> pargs = args;
      pargs.push_back(Expr::var("W"));
      ConstraintSet goal{AtomicConstraint::equal(Expr::app(primed(fn), SymKind::Defined, pargs), Expr::var("R"))};
      SolveOptions so;
      so.max_depth = opts.depth;
      detail::Narrower nw(target, so);
      detail::RtState st;
      nw.solve_conditions(goal, 0, opts.depth, st, [&](detail::RtState& s) {
        ConstraintSet cs = nw.resolved_store(s);
        if (satisfiable(cs).unsat()) return false;
        Expr r = nw.resolve(Expr::var("R"), s);
        if (!is_ground(r) || std::find(universe.begin(), universe.end(), r) == universe.end()) return false;
        Expr w = nw.resolve(Expr::var("W"), s);
        Interval iv = Interval::entire();
        if (auto box = propagated_box(cs); box && w.is_var()) {
          if (auto it = box->find(w.name()); it != box->end()) iv = it->second;
        }
        OracleRow& row_r = row(r);
        if (!(iv.lo == 0.0 && iv.lo_open && iv.hi <= 1.0 && !iv.hi_open)) row_r.shape_ok = false;
        if (!row_r.runtime) {
          row_r.runtime = iv;
        } else {
          row_r.runtime->lo = std::min(row_r.runtime->lo, iv.lo);
          row_r.runtime->hi = std::max(row_r.runtime->hi, iv.hi);
        }
        return false;
      });
      if (nw.cut) {
        rep.budget_exceeded = true;
        rep.note = "runtime search was cut at depth " + std::to_string(opts.depth);
      }

      for (auto& [_, r] : rows) {
        r.match = r.lfp && r.runtime && r.shape_ok && std::fabs(*r.lfp - r.runtime->hi) <= kQualEps;
        if (!r.match) ++rep.mismatches;
        rep.rows.push_back(r);
      }
    }
  }
  return rep;
}

}  // namespace qcflp

#include <gtest/gtest.h>

#include <random>

#include "qcflp/solver.hpp"

using namespace qcflp;

namespace {

Expr V(const char* n) { return Expr::var(n); }
Expr N(double x) { return Expr::num(x); }
Expr C(const char* n, std::vector<Expr> a = {}) { return Expr::cons(n, std::move(a)); }
Expr Op(const char* p, Expr a, Expr b) { return Expr::prim(p, {std::move(a), std::move(b)}); }
AtomicConstraint Rel(const char* p, Expr a, Expr b) { return AtomicConstraint::relation(p, std::move(a), std::move(b)); }

}  // namespace

TEST(Expr, InformationOrdering) {
  EXPECT_TRUE(info_leq(Expr::bottom(), C("f", {N(1)})));
  Expr lhs = C("f", {Expr::list_cons(V("A"), Expr::list_cons(V("B"), Expr::bottom()))});
  Expr rhs = C("f", {Expr::list_cons(V("A"), Expr::list_cons(V("B"), Expr::nil()))});
  EXPECT_TRUE(info_leq(lhs, rhs));
  EXPECT_FALSE(info_leq(rhs, lhs));
  EXPECT_FALSE(info_leq(C("c", {N(1)}), C("c", {N(2)})));
  EXPECT_FALSE(info_leq(C("c", {N(2)}), C("c", {N(1)})));
}

TEST(Expr, SubstitutionApplication) {
  Substitution s{{"X", V("A")}, {"Xs", Expr::list_cons(V("B"), Expr::bottom())}};
  Expr e = C("f", {Expr::list_cons(V("X"), V("Xs"))});
  EXPECT_EQ(to_string(s.apply(e)), "f(A:B:_|_)");
  EXPECT_EQ(Substitution{}.apply(e), e);
  Substitution a{{"X", V("Y")}};
  Substitution b{{"Y", N(3)}};
  EXPECT_EQ(b.apply(a.apply(V("X"))), N(3));
  EXPECT_EQ(a.then(b).apply(V("X")), N(3));
}

TEST(Expr, Printing) {
  EXPECT_EQ(to_string(Expr::string("German")), "\"German\"");
  EXPECT_EQ(to_string(Expr::list_cons(N(1), Expr::list_cons(N(2), Expr::nil()))), "[1,2]");
  EXPECT_EQ(to_string(Op("-", V("X"), Op("-", V("Y"), V("Z")))), "X - (Y - Z)");
  EXPECT_EQ(to_string(Op("-", Op("-", V("X"), V("Y")), V("Z"))), "X - Y - Z");
  EXPECT_EQ(to_string(Op("*", Op("+", V("X"), N(1)), N(-2))), "(X + 1) * (-2)");
  EXPECT_EQ(to_string(AtomicConstraint::distinct(V("X"), C("a"))), "X /= a");
  EXPECT_EQ(to_string(AtomicConstraint{Op("+", V("X"), N(1)), V("Y")}), "X + 1 ->! Y");
}

TEST(Primitive, Evaluation) {
  std::vector<Expr> a = {N(0.9), N(0.8)};
  EXPECT_NEAR(eval_primitive("*", a).number(), 0.72, 1e-12);
  std::vector<Expr> b = {N(65), N(65)};
  EXPECT_TRUE(eval_primitive("==", b).is_true());
  std::vector<Expr> c = {Expr::bottom(), N(200)};
  EXPECT_TRUE(eval_primitive("<", c).is_bottom());
  std::vector<Expr> d = {Expr::list_cons(N(1), Expr::bottom()), Expr::list_cons(N(2), Expr::bottom())};
  EXPECT_TRUE(eval_primitive("==", d).is_bottom());
  std::vector<Expr> e = {N(1), N(0)};
  EXPECT_TRUE(eval_primitive("/", e).is_bottom());
  EXPECT_THROW(eval_primitive("length", e), UsageError);
  std::vector<Expr> q = {C("qpair", {N(0), N(0.5)})};
  EXPECT_TRUE(eval_primitive("qVal", q).is_true());
  std::vector<Expr> q0 = {C("qpair", {N(0), N(0)})};
  EXPECT_TRUE(eval_primitive("qVal", q0).is_false());
}

TEST(Primitive, MonotoneAndRadicalBySampling) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(0, 4);
  const char* ops[] = {"+", "-", "*", "/", "<", "<=", ">", ">=", "=="};
  auto sample_term = [&](int depth, auto& self) -> Expr {
    switch (depth > 2 ? pick(rng) % 3 : pick(rng)) {
      case 0: return N(pick(rng) - 2);
      case 1: return C(pick(rng) % 2 ? "a" : "b");
      case 2: return N(0.5 * pick(rng));
      case 3: return Expr::list_cons(self(depth + 1, self), self(depth + 1, self));
      default: return Expr::nil();
    }
  };
  std::function<Expr(const Expr&)> weaken = [&](const Expr& t) -> Expr {
    if (pick(rng) == 0) return Expr::bottom();
    if (!t.is_app() || t.arity() == 0) return t;
    std::vector<Expr> args;
    for (const auto& x : t.args()) args.push_back(weaken(x));
    return t.with_args(args);
  };
  for (int i = 0; i < 2000; ++i) {
    for (const char* p : ops) {
      std::vector<Expr> full = {sample_term(0, sample_term), sample_term(0, sample_term)};
      std::vector<Expr> part = {weaken(full[0]), weaken(full[1])};
      ASSERT_TRUE(info_leq(part[0], full[0]));
      Expr r_full = eval_primitive(p, full);
      Expr r_part = eval_primitive(p, part);
      if (!r_part.is_bottom()) EXPECT_EQ(r_part, r_full) << p;
      if (!r_full.is_bottom()) {
        EXPECT_TRUE(r_full.is_num() || (r_full.is_constructor_app() && r_full.arity() == 0));
      }
    }
  }
}

TEST(Solver, SatisfiableExamples) {
  auto r = satisfiable({Rel("<=", V("W"), N(0.7)), Rel(">=", V("W"), N(0.65))});
  ASSERT_TRUE(r.sat());
  EXPECT_EQ(*r.witness.lookup("W"), N(0.7));
  EXPECT_TRUE(satisfiable({Rel("<=", V("W"), N(0.3)), Rel(">=", V("W"), N(0.5))}).unsat());
  auto q = satisfiable({Rel("<", N(0), V("W")), Rel("<=", V("W"), N(1))});
  ASSERT_TRUE(q.sat());
  EXPECT_EQ(*q.witness.lookup("W"), N(1.0));
  auto qv = satisfiable({AtomicConstraint::holds(Expr::prim("qVal", {V("W")}))});
  ASSERT_TRUE(qv.sat());
  EXPECT_EQ(*qv.witness.lookup("W"), N(1.0));
}

TEST(Solver, SatisfiableStructural) {
  EXPECT_TRUE(satisfiable({AtomicConstraint::equal(C("f", {V("X")}), C("g", {V("Y")}))}).unsat());
  auto r = satisfiable({AtomicConstraint::equal(C("f", {V("X")}), C("f", {N(2)})), Rel("<", V("X"), N(3))});
  ASSERT_TRUE(r.sat());
  EXPECT_EQ(*r.witness.lookup("X"), N(2));
  EXPECT_TRUE(satisfiable({AtomicConstraint::equal(C("f", {V("X")}), C("f", {N(5)})), Rel("<", V("X"), N(3))}).unsat());
  EXPECT_TRUE(satisfiable({AtomicConstraint::distinct(V("X"), V("X"))}).unsat());
  EXPECT_TRUE(satisfiable({AtomicConstraint::distinct(V("X"), V("Y"))}).sat());
  EXPECT_TRUE(satisfiable({Rel("<", Expr::bottom(), N(200))}).unsat());
  EXPECT_TRUE(satisfiable({Rel("<=", V("W"), Op("*", N(0.9), V("W1"))), Rel(">=", V("W"), N(0.65)),
                           Rel("<=", V("W1"), N(0.7))})
                  .unsat());
}

TEST(Solver, EntailmentExamples) {
  Expr A = V("A");
  EXPECT_TRUE(entails({Rel("<", A, N(0))}, AtomicConstraint::distinct(Op("*", A, A), N(0))).entailed());
  EXPECT_TRUE(entails({}, AtomicConstraint::equal(N(3), N(3))).entailed());
  auto r = entails({Rel("<", A, N(0))}, Rel(">", A, N(0)));
  ASSERT_TRUE(r.not_entailed());
  EXPECT_EQ(*r.counterexample.lookup("A"), N(-1));
  EXPECT_TRUE(entails({Rel("<=", V("W"), N(0.7)), Rel(">=", V("W"), N(0.65))},
                      AtomicConstraint::holds(Expr::prim("qVal", {V("W")})))
                  .entailed());
  // an unconstrained variable may be non-numeric
  EXPECT_TRUE(entails({}, Rel("<=", V("X"), V("X"))).not_entailed());
}

namespace {

struct RandomSystem {
  ConstraintSet pi_set;
  AtomicConstraint pi;
};

Expr random_linear(std::mt19937_64& rng, const std::vector<std::string>& vars) {
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_int_distribution<int> vi(0, static_cast<int>(vars.size()) - 1);
  Expr x = Expr::var(vars[vi(rng)]);
  switch (pick(rng)) {
    case 0: return Expr::prim("*", {Expr::num(0.5 * (pick(rng) + 1)), x});
    case 1: return Expr::prim("+", {x, Expr::num(pick(rng) - 2)});
    case 2: return Expr::prim("-", {x, Expr::var(vars[vi(rng)])});
    default: return x;
  }
}

AtomicConstraint random_atomic(std::mt19937_64& rng, const std::vector<std::string>& vars) {
  static const char* rels[] = {"<", "<=", ">", ">="};
  std::uniform_int_distribution<int> pick(0, 9);
  int k = pick(rng);
  if (k == 0) return AtomicConstraint::holds(Expr::prim("qVal", {Expr::var(vars[pick(rng) % vars.size()])}));
  if (k == 1) return AtomicConstraint::distinct(random_linear(rng, vars), Expr::num(pick(rng) % 3));
  return AtomicConstraint::relation(rels[pick(rng) % 4], random_linear(rng, vars),
                                    Expr::num(0.25 * (pick(rng) - 3)));
}

}  // namespace

TEST(SolverProperty, SatisfiableWitnessesHold) {
  std::mt19937_64 rng(99);
  std::vector<std::string> vars = {"X", "Y", "Z"};
  int sat = 0;
  for (int i = 0; i < 2000; ++i) {
    ConstraintSet cs;
    int n = 1 + static_cast<int>(rng() % 4);
    for (int j = 0; j < n; ++j) cs.push_back(random_atomic(rng, vars));
    auto r = satisfiable(cs);
    if (r.sat()) {
      ++sat;
      EXPECT_TRUE(satisfied_by(cs, r.witness)) << to_string(cs) << " w=" << to_string(r.witness);
    }
  }
  EXPECT_GT(sat, 100);
}

TEST(SolverProperty, EntailmentIsSound) {
  std::mt19937_64 rng(1234);
  std::vector<std::string> vars = {"X", "Y"};
  int entailed = 0, refuted = 0;
  for (int i = 0; i < 400; ++i) {
    ConstraintSet cs;
    int n = 1 + static_cast<int>(rng() % 3);
    for (int j = 0; j < n; ++j) cs.push_back(random_atomic(rng, vars));
    AtomicConstraint pi = random_atomic(rng, vars);
    auto r = entails(cs, pi);
    if (r.not_entailed()) {
      ++refuted;
      EXPECT_TRUE(satisfied_by(cs, r.counterexample));
      EXPECT_FALSE(satisfied_by(pi, r.counterexample));
    } else if (r.entailed()) {
      ++entailed;
      auto box = propagated_box(cs);
      if (!box) continue;
      std::vector<std::string> all = vars_of(cs);
      for (const auto& v : vars_of(pi)) all.push_back(v);
      for (int s = 0; s < 10000; ++s) {
        Substitution eta;
        for (const auto& v : all) {
          Interval iv = box->count(v) ? box->at(v) : Interval::closed(-4, 4);
          double lo = std::isfinite(iv.lo) ? iv.lo : std::min(-4.0, iv.hi - 4.0);
          double hi = std::isfinite(iv.hi) ? iv.hi : std::max(4.0, iv.lo + 4.0);
          std::uniform_real_distribution<double> u(lo, hi);
          double x = (s % 7 == 0) ? (s % 2 ? lo : hi) : u(rng);
          eta.bind(v, Expr::num(x));
        }
        if (satisfied_by(cs, eta)) {
          ASSERT_TRUE(satisfied_by(pi, eta)) << to_string(cs) << " |= " << to_string(pi) << " at "
                                             << to_string(eta);
        }
      }
    }
  }
  EXPECT_GT(entailed, 10);
  EXPECT_GT(refuted, 10);
}

#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "qcflp/prover.hpp"
#include "qcflp/runtime.hpp"
#include "qcflp/transform.hpp"
#include "test_util.hpp"

using namespace qcflp;

namespace {

const char* kBook2 = "book(2, \"Dune\", \"F. P. Herbert\", \"English\", \"SciFi\", medium, 345)";
const char* kBook4 = "book(4, \"Beim Hauten der Zwiebel\", \"Gunter Grass\", \"German\", \"Biography\", medium, 432)";

struct Translated {
  Program source;
  Program program;
  ConstraintSet goal;
};

Translated translate(const std::string& program_text, const std::string& goal_text) {
  Translated t;
  t.source = parse_program_or_throw(program_text);
  FreshSupply fresh(0);
  t.program = transform_program(t.source, QualDomain::unit(), fresh).program;
  Transformer tr(QualDomain::unit(), fresh);
  t.goal = tr.goal(parse_goal(goal_text, t.source.sig));
  return t;
}

std::string library_text() { return read_file(program_path("library.qcflp")); }

const Interval& qual_of(const Answer& a, const std::string& var) {
  for (const auto& q : a.qual) {
    if (q.var == var) return q.range;
  }
  throw std::runtime_error("no interval for " + var);
}

}  // namespace

TEST(AnswerStore, PostQual) {
  AnswerStore s;
  ASSERT_TRUE(s.post_qual(QualEncodedConstraint::qval("W")));
  EXPECT_EQ(to_string(s.interval("W")), "(0, 1]");
  ASSERT_TRUE(s.post_qual(QualEncodedConstraint::leq("W", QualValue::real(0.9), QualDomain::unit())));
  ASSERT_TRUE(s.post_qual(QualEncodedConstraint::geq("W", QualValue::real(0.65), QualDomain::unit())));
  EXPECT_EQ(to_string(s.interval("W")), "[0.65, 0.9]");

  ASSERT_TRUE(s.post_qual(QualEncodedConstraint::qval("W1")));
  ASSERT_TRUE(s.post_qual(QualEncodedConstraint::leq_att("W", QualValue::real(0.7), "W1")));
  EXPECT_NEAR(s.interval("W").lo, 0.65, 1e-12);
  EXPECT_NEAR(s.interval("W").hi, 0.7, 1e-12);
  EXPECT_FALSE(s.failed());

  AnswerStore t;
  ASSERT_TRUE(t.post_qual(QualEncodedConstraint::leq("W", QualValue::real(0.7), QualDomain::unit())));
  EXPECT_FALSE(t.post_qual(QualEncodedConstraint::geq("W", QualValue::real(0.8), QualDomain::unit())));
  EXPECT_TRUE(t.failed());
}

TEST(HeadNormalForm, Examples) {
  Program src = parse_program_or_throw(library_text());
  FreshSupply fresh(0);
  Program p = transform_program(src, QualDomain::unit(), fresh).program;

  auto m = hnf(p, parse_expr("member'(b, [b], W)", p.sig, {SourceKind::Plain}));
  ASSERT_FALSE(m.empty());
  EXPECT_EQ(to_string(m[0].value), "true");
  auto box = propagated_box(m[0].store);
  ASSERT_TRUE(box.has_value());
  EXPECT_EQ(to_string(box->at("W")), "(0, 1]");

  auto three = hnf(p, Expr::num(3));
  ASSERT_EQ(three.size(), 1u);
  EXPECT_EQ(to_string(three[0].value), "3");

  auto pages = hnf(p, parse_expr(std::string("getPages'(") + kBook4 + ", W)", p.sig, {SourceKind::Plain}));
  ASSERT_EQ(pages.size(), 1u);
  EXPECT_EQ(to_string(pages[0].value), "432");
}

TEST(Solve, LibraryGoalFirstAnswer) {
  auto t = translate(library_text(), "search(\"German\", \"Essay\", intermediate) == R # W | W >= 0.65");
  auto start = std::chrono::steady_clock::now();
  SolveOptions o;
  o.max_answers = 1;
  SolveReport rep = solve(t.program, t.goal, o);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(rep.answers.size(), 1u);
  const Answer& a = rep.answers[0];
  EXPECT_EQ(to_string(a.subst), "{ R -> 4 }");
  const Interval& w = qual_of(a, "W");
  EXPECT_NEAR(w.lo, 0.65, 1e-9);
  EXPECT_NEAR(w.hi, 0.7, 1e-9);
  EXPECT_FALSE(w.lo_open);
  EXPECT_FALSE(w.hi_open);
  EXPECT_TRUE(a.flags().empty());
  EXPECT_EQ(to_string(a), "{ R -> 4 } { W in [0.65, 0.7] }");
  EXPECT_LT(secs, 5.0);
}

TEST(Solve, ThresholdAboveTheBestAnswerFails) {
  auto t = translate(library_text(), "search(\"German\", \"Essay\", intermediate) == R # W | W >= 0.71");
  SolveReport rep = solve(t.program, t.goal);
  EXPECT_TRUE(rep.answers.empty());
  EXPECT_FALSE(rep.incomplete);
}

TEST(Solve, ReaderLevelOfDune) {
  auto t = translate(library_text(), std::string("guessReaderLevel(") + kBook2 + ") == intermediate # W");
  SolveOptions o;
  o.max_answers = 1;
  SolveReport rep = solve(t.program, t.goal, o);
  ASSERT_EQ(rep.answers.size(), 1u);
  EXPECT_EQ(to_string(qual_of(rep.answers[0], "W")), "(0, 0.8]");
}

TEST(Solve, SubInferenceQualifications) {
  SolveOptions o;
  o.max_depth = 6;
  auto best = [&](const std::string& goal) {
    auto t = translate(library_text(), goal);
    double h = 0.0;
    for (const auto& a : solve(t.program, t.goal, o).answers) h = std::max(h, qual_of(a, "W").hi);
    return h;
  };
  EXPECT_NEAR(best(std::string("guessGenre(") + kBook4 + ") == \"Essay\" # W"), 0.7, 1e-9);
  EXPECT_NEAR(best(std::string("guessReaderLevel(") + kBook4 + ") == intermediate # W"), 0.8, 1e-9);
}

TEST(Solve, EmptyGoalHasOneEmptyAnswer) {
  Program p = parse_program_or_throw("f --> 1\n");
  SolveReport rep = solve(p, {});
  ASSERT_EQ(rep.answers.size(), 1u);
  EXPECT_TRUE(rep.answers[0].subst.empty());
  EXPECT_TRUE(rep.answers[0].residual.empty());
  EXPECT_EQ(to_string(rep.answers[0]), "{}");
}

TEST(Solve, CallTimeChoiceSharesArguments) {
  auto t = translate("coin --> 0\ncoin --> 1\ndbl(X) --> X + X\n", "dbl(coin) == R # W");
  SolveReport rep = solve(t.program, t.goal);
  std::vector<std::string> rs;
  for (const auto& a : rep.answers) rs.push_back(to_string(a.subst));
  EXPECT_EQ(rs, (std::vector<std::string>{"{ R -> 0 }", "{ R -> 2 }"}));
}

TEST(Solve, NarrowsFreeArguments) {
  auto t = translate("neg(true) --> false\nneg(false) -0.8-> true\n", "neg(X) == true # W");
  SolveReport rep = solve(t.program, t.goal);
  ASSERT_EQ(rep.answers.size(), 1u);
  EXPECT_EQ(to_string(rep.answers[0]), "{ X -> false } { W in (0, 0.8] }");
}

TEST(Solve, ResidualConstraintsOverGoalVariables) {
  auto t = translate("pos(X) --> true <== X > 0\n", "pos(Y) == true # W");
  SolveReport rep = solve(t.program, t.goal);
  ASSERT_EQ(rep.answers.size(), 1u);
  EXPECT_EQ(to_string(rep.answers[0].residual), "Y > 0");
  EXPECT_TRUE(rep.answers[0].subst.empty());
}

TEST(Solve, DeterministicAnswerSequence) {
  auto t = translate(library_text(), "getGenre(B) == G # W");
  SolveReport a = solve(t.program, t.goal);
  SolveReport b = solve(t.program, t.goal);
  ASSERT_EQ(a.answers.size(), b.answers.size());
  for (std::size_t i = 0; i < a.answers.size(); ++i) EXPECT_EQ(to_string(a.answers[i]), to_string(b.answers[i]));
}

TEST(Solve, DepthCutFlagsTheReport) {
  auto t = translate("loop(X) --> loop(X)\nloop(X) -0.5-> X\n", "loop(1) == R # W");
  SolveOptions o;
  o.max_depth = 4;
  SolveReport rep = solve(t.program, t.goal, o);
  EXPECT_TRUE(rep.incomplete);
  ASSERT_FALSE(rep.answers.empty());
  EXPECT_EQ(to_string(rep.answers[0].subst), "{ R -> 1 }");
}

// Instantiating the goal qualification variables at their upper bounds gives
// a goal instance that the plain prover derives from the translated program.
TEST(Properties, AnswersAreDerivable) {
  struct Case {
    std::string program, goal;
  };
  std::vector<Case> cases = {
      {library_text(), "search(\"German\", \"Essay\", intermediate) == R # W | W >= 0.65"},
      {library_text(), std::string("guessGenre(") + kBook4 + ") == G # W | W >= 0.5"},
      {"neg(true) --> false\nneg(false) -0.8-> true\ntwice(X) -0.9-> neg(neg(X))\n", "twice(X) == Y # W"},
      {"small(X) -0.8-> true <== X <= 1\ncheck(X) -0.9-> ok <== small(X) == true\n", "check(1) == R # W"},
  };
  for (const auto& c : cases) {
    auto t = translate(c.program, c.goal);
    SolveOptions o;
    o.max_depth = 6;
    o.max_answers = 3;
    SolveReport rep = solve(t.program, t.goal, o);
    ASSERT_FALSE(rep.answers.empty()) << c.goal;
    for (const auto& a : rep.answers) {
      Substitution s = a.subst;
      for (const auto& q : a.qual) s.bind(q.var, Expr::num(q.range.hi));
      // inner qualification variables take their smallest admissible value,
      // the weakest obligation for the calls they annotate
      ConstraintSet prim;
      for (const auto& gc : apply_subst(s, t.goal)) {
        if (gc.is_primitive()) prim.push_back(gc);
      }
      auto box = propagated_box(prim);
      ASSERT_TRUE(box.has_value());
      for (const auto& [v, iv] : *box) {
        if (!s.contains(v)) s.bind(v, Expr::num(iv.lo_open ? std::nextafter(iv.lo, 2.0) : iv.lo));
      }
      for (const auto& gc : apply_subst(s, t.goal)) {
        if (gc.is_primitive()) {
          EXPECT_TRUE(satisfied_by(gc, Substitution{})) << to_string(gc);
          continue;
        }
        QcStatement psi = QcStatement::production(gc.call.arg(0), gc.call.arg(1), std::nullopt, {});
        auto h = holds(t.program, QualDomain::unit(), psi);
        EXPECT_EQ(h.kind, HoldsResult::Kind::Derivable) << to_string(psi) << " " << h.reason;
        if (h.proof) EXPECT_EQ(check_proof(t.program, QualDomain::unit(), *h.proof).kind, CheckResult::Kind::Valid);
      }
    }
  }
}

// Re-solving with the threshold at the interval's upper bound (or half of
// it) still succeeds; raising it by 0.01 fails.
TEST(Properties, ThresholdMonotonicity) {
  const char* programs[] = {
      "neg(true) --> false\nneg(false) -0.8-> true\ntwice(X) -0.9-> neg(neg(X))\npick(X) --> X\n"
      "pick(X) -0.5-> neg(X)\n",
      "small(X) -0.8-> true <== X <= 1\nsmall(X) -0.6-> false <== X >= 2\n"
      "check(X) -0.9-> ok <== small(X) == true\ncheck(X) -0.7-> big <== small(X) == false, X < 5\n",
      "f --> true\ng -0.9-> true\nh -0.75-> f\n",
  };
  const char* goals[][6] = {
      {"neg(true) == R", "neg(false) == R", "twice(true) == R", "pick(true) == R", "pick(false) == R",
       "twice(X) == R"},
      {"small(1) == R", "small(3) == R", "check(1) == R", "check(3) == R", "check(0) == R", "small(X) == R"},
      {"f == R", "g == R", "h == R", "f == true", "g == true", "h == true"},
  };
  std::mt19937 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t pi = rng() % 3, gi = rng() % 6;
    std::string base = goals[pi][gi];
    auto t = translate(programs[pi], base + " # W");
    SolveOptions o;
    o.max_depth = 6;
    SolveReport rep = solve(t.program, t.goal, o);
    ASSERT_FALSE(rep.answers.empty()) << base;
    const Answer& a = rep.answers[rng() % rep.answers.size()];
    double h = qual_of(a, "W").hi;
    std::string bind;
    for (const auto& [v, e] : a.subst) bind += v + " == " + to_string(e) + " # Q" + v + ", ";
    auto again = [&](double beta) {
      auto t2 = translate(programs[pi], bind + base + " # W | W >= " + format_real(beta));
      return !solve(t2.program, t2.goal, o).answers.empty();
    };
    EXPECT_TRUE(again(h)) << base << " at " << h;
    EXPECT_TRUE(again(h / 2)) << base << " at " << h / 2;
    if (h < 1.0) EXPECT_FALSE(again(std::min(1.0, h + 0.01))) << base << " at " << h + 0.01;
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

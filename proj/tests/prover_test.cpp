#include <gtest/gtest.h>

#include <random>

#include "qcflp/certificate.hpp"
#include "test_util.hpp"

using namespace qcflp;

namespace {

Program library() { return parse_program_or_throw(read_file(program_path("library.qcflp"))); }

Program program(const std::string& text) { return parse_program_or_throw(text); }

QcStatement stmt(const Program& p, const std::string& text, QualDomain dom = QualDomain::unit()) {
  return parse_statement(text, p.sig, {SourceKind::Qualified, dom});
}

const char* kBook4 = "book(4, \"Beim Hauten der Zwiebel\", \"Gunter Grass\", \"German\", \"Biography\", medium, 432)";

}  // namespace

TEST(Statement, EntailmentWitness) {
  Program p = program("f(X) --> X\n");
  auto phi = stmt(p, "f(X:Xs) -> Xs # 0.8 <== X*X /= 0");
  auto phi2 = stmt(p, "f(A:(B:[])) -> _|_ : _|_ # 0.7 <== A < 0");
  auto sigma = qc_entails(phi, phi2, QualDomain::unit());
  ASSERT_TRUE(sigma.has_value());
  EXPECT_EQ(to_string(sigma->apply(Expr::var("X"))), "A");
  EXPECT_EQ(to_string(sigma->apply(Expr::var("Xs"))), "B:_|_");
  EXPECT_FALSE(qc_entails(phi, stmt(p, "f(A:(B:[])) -> _|_ : _|_ # 0.9 <== A < 0"), QualDomain::unit()));
  EXPECT_FALSE(qc_entails(phi, stmt(p, "f(A:(B:[])) -> _|_ : _|_ # 0.7"), QualDomain::unit()));
}

TEST(Statement, Triviality) {
  Program p = program("f --> 1\n");
  EXPECT_TRUE(is_trivial(stmt(p, "f -> _|_ # 0.5")));
  EXPECT_TRUE(is_trivial(stmt(p, "f -> 2 # 0.5 <== X > 1, X < 0")));
  EXPECT_FALSE(is_trivial(stmt(p, "f -> 2 # 0.5 <== X > 1")));
}

TEST(Prover, GuessGenreOfBookFour) {
  Program p = library();
  auto phi = stmt(p, std::string("guessGenre(") + kBook4 + ") -> \"Essay\" # 0.7");
  auto r = holds(p, QualDomain::unit(), phi);
  ASSERT_TRUE(r.derivable()) << r.reason;
  EXPECT_EQ(r.proof->tag(), "QDF");
  EXPECT_EQ(r.proof->rule_index, 14);  // the fourth guessGenre rule
  EXPECT_TRUE(check_proof(p, QualDomain::unit(), *r.proof).valid());

  auto too_strong = stmt(p, std::string("guessGenre(") + kBook4 + ") -> \"Essay\" # 0.75");
  EXPECT_TRUE(holds(p, QualDomain::unit(), too_strong).not_found());
}

TEST(Prover, ReaderLevelAndSearch) {
  Program p = library();
  auto dune = "book(2, \"Dune\", \"F. P. Herbert\", \"English\", \"SciFi\", medium, 345)";
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, std::string("guessReaderLevel(") + dune + ") -> intermediate # 0.8"))
                  .derivable());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, std::string("guessReaderLevel(") + dune + ") -> intermediate # 0.81"))
                  .not_found());
  auto r = holds(p, QualDomain::unit(), stmt(p, "search(\"German\", \"Essay\", upper) -> 4 # 0.65"));
  ASSERT_TRUE(r.derivable()) << r.reason;
  EXPECT_TRUE(check_proof(p, QualDomain::unit(), *r.proof).valid());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "search(\"German\", \"Essay\", upper) -> 4 # 0.75")).not_found());
}

TEST(Prover, SmallExamples) {
  Program p = program("g -0.9-> true\n");
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "X -> X # 0.5")).derivable());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "g -> true # 0.9")).derivable());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "g -> true # 0.95")).not_found());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "f -> true # 0.95")).not_found());
  auto triv = holds(p, QualDomain::unit(), stmt(p, "g -> _|_ # 1"));
  ASSERT_TRUE(triv.derivable());
  EXPECT_EQ(triv.proof->tag(), "QTI");
}

TEST(Prover, ConstraintsAndVariables) {
  Program p = program("pos(X) --> true <== X > 0\nsq(X) -0.5-> X * X\n");
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "pos(X) -> true # 1 <== X > 2")).derivable());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "pos(X) -> true # 1 <== X > -1")).not_found());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "pos(3) -> true # 1")).derivable());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "sq(3) -> 9 # 0.5")).derivable());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "sq(3) -> 9 # 0.6")).not_found());
  EXPECT_TRUE(holds(p, QualDomain::unit(), stmt(p, "pos(X) == true # 0.3 <== X >= 1")).derivable());
}

TEST(Prover, PlainLogic) {
  Program p = parse_program_or_throw("f(X) --> g(X) <== X > 0\ng(X) --> X + 1\n", {SourceKind::Plain});
  auto s = parse_statement("f(2) -> 3", p.sig, {SourceKind::Plain});
  auto r = holds(p, QualDomain::unit(), s);
  ASSERT_TRUE(r.derivable());
  EXPECT_EQ(r.proof->tag(), "DF");
  EXPECT_TRUE(check_proof(p, QualDomain::unit(), *r.proof).valid());
  EXPECT_TRUE(holds(p, QualDomain::unit(), parse_statement("f(0) -> 1", p.sig, {SourceKind::Plain})).not_found());
}

TEST(Prover, ProductDomain) {
  QualDomain uxu = QualDomain::product(QualDomain::unit(), QualDomain::unit());
  Program p = parse_program_or_throw("g -(0.9,0.5)-> true\nh --> g\n", {SourceKind::Qualified, uxu});
  EXPECT_TRUE(holds(p, uxu, stmt(p, "h -> true # (0.9,0.5)", uxu)).derivable());
  EXPECT_TRUE(holds(p, uxu, stmt(p, "h -> true # (0.3,0.2)", uxu)).derivable());
  EXPECT_TRUE(holds(p, uxu, stmt(p, "h -> true # (0.95,0.2)", uxu)).not_found());
}

TEST(Checker, HandBuiltTrees) {
  Program p = program("g -0.9-> true\n");
  QualDomain u = QualDomain::unit();
  ProofNode ti;
  ti.step = Step::TI;
  ti.conclusion = stmt(p, "g -> _|_ # 0.5");
  EXPECT_TRUE(check_proof(p, u, ti).valid());

  ProofNode rr;
  rr.step = Step::RR;
  rr.conclusion = stmt(p, "X -> X # 0.5");
  EXPECT_TRUE(check_proof(p, u, rr).valid());

  ProofNode dc;
  dc.step = Step::DC;
  dc.conclusion = stmt(p, "c(X) -> c(X) # 0.9");
  ProofNode child = rr;
  dc.children.push_back(child);
  auto bad = check_proof(p, u, dc);
  EXPECT_TRUE(bad.invalid());
  EXPECT_EQ(bad.path, "");
  dc.conclusion = stmt(p, "c(X) -> c(X) # 0.5");
  EXPECT_TRUE(check_proof(p, u, dc).valid());

  ProofNode wrong = ti;
  wrong.conclusion = stmt(p, "g -> true # 0.5");
  EXPECT_TRUE(check_proof(p, u, wrong).invalid());
}

TEST(Checker, RejectsMisusedRuleInstances) {
  Program p = library();
  auto r = holds(p, QualDomain::unit(), stmt(p, std::string("guessGenre(") + kBook4 + ") -> \"Essay\" # 0.7"));
  ASSERT_TRUE(r.derivable());
  ProofNode t = *r.proof;
  t.rule_index = 13;
  EXPECT_TRUE(check_proof(p, QualDomain::unit(), t).invalid());
  t = *r.proof;
  t.conclusion.qual = QualValue::real(0.75);
  EXPECT_TRUE(check_proof(p, QualDomain::unit(), t).invalid());
  t = *r.proof;
  t.children.pop_back();
  EXPECT_TRUE(check_proof(p, QualDomain::unit(), t).invalid());
}

TEST(Lfp, SmallIterates) {
  QualDomain u = QualDomain::unit();
  std::vector<QualValue> grid = {QualValue::real(0.5), QualValue::real(0.9), QualValue::real(0.95),
                                 QualValue::real(1.0)};
  std::vector<ConstraintSet> hyps = {{}};
  Program p1 = program("f --> true\n");
  std::vector<Expr> uni = {Expr::boolean(true), Expr::boolean(false)};
  auto r1 = bounded_lfp(p1, u, 1, uni, grid, hyps);
  EXPECT_TRUE(r1.interp.contains(stmt(p1, "f -> true # 1")));

  Program p2 = program("g -0.9-> true\n");
  auto r2 = bounded_lfp(p2, u, 1, uni, grid, hyps);
  EXPECT_TRUE(r2.interp.contains(stmt(p2, "g -> true # 0.9")));
  EXPECT_FALSE(r2.interp.contains(stmt(p2, "g -> true # 0.95")));

  auto r0 = bounded_lfp(p2, u, 0, uni, grid, hyps);
  for (const auto& f : r0.facts) EXPECT_TRUE(is_trivial(f)) << to_string(f);
  EXPECT_EQ(r0.facts.size(), grid.size());
}

TEST(Lfp, IteratesGrowAndAgreeWithTheProver) {
  Program p = program(
      "nat(z) --> true\n"
      "nat(s(N)) -0.9-> nat(N)\n"
      "half(z) --> z\n"
      "half(s(s(N))) -0.8-> s(half(N))\n"
      "pick(X) --> X <== nat(X) == true\n");
  QualDomain u = QualDomain::unit();
  Expr z = Expr::cons("z");
  std::vector<Expr> uni = {z};
  for (int i = 0; i < 4; ++i) uni.push_back(Expr::cons("s", {uni.back()}));
  uni.push_back(Expr::boolean(true));
  std::vector<QualValue> grid = {QualValue::real(0.5), QualValue::real(0.7), QualValue::real(0.81),
                                 QualValue::real(0.9), QualValue::real(1.0)};
  std::vector<ConstraintSet> hyps = {{}};
  std::size_t prev = 0;
  for (int k = 0; k <= 6; ++k) {
    auto r = bounded_lfp(p, u, k, uni, grid, hyps);
    EXPECT_GE(r.facts.size(), prev);
    prev = r.facts.size();
    for (const auto& f : r.facts) {
      auto h = holds(p, u, f);
      EXPECT_TRUE(h.derivable()) << "k=" << k << " " << to_string(f);
      if (h.derivable()) {
        EXPECT_TRUE(check_proof(p, u, *h.proof).valid());
      }
    }
    if (k == 6) {
      for (const auto& a : uni) {
        for (const auto& t : uni) {
          for (const auto& fn : {"nat", "half", "pick"}) {
            for (const auto& q : grid) {
              QcStatement phi = QcStatement::production(Expr::app(fn, SymKind::Defined, {a}), t, q);
              if (holds(p, u, phi).derivable()) EXPECT_TRUE(r.interp.contains(phi)) << to_string(phi);
            }
          }
        }
      }
    }
  }
}

TEST(Properties, DownwardClosureAndApproximation) {
  Program p = library();
  QualDomain u = QualDomain::unit();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> qd(0.01, 1.0);
  const char* goals[] = {"guessGenre(%) -> \"Essay\"", "guessGenre(%) -> \"Biography\"",
                         "guessReaderLevel(%) -> intermediate", "guessReaderLevel(%) -> upper"};
  for (int i = 0; i < 24; ++i) {
    std::string g = goals[i % 4];
    g.replace(g.find('%'), 1, kBook4);
    double d = qd(rng);
    auto phi = stmt(p, g + " # " + format_real(d));
    auto r = holds(p, u, phi);
    ASSERT_FALSE(r.unknown());
    if (r.derivable()) {
      EXPECT_TRUE(check_proof(p, u, *r.proof).valid());
      auto lower = stmt(p, g + " # " + format_real(d / 2));
      EXPECT_TRUE(holds(p, u, lower).derivable());
      auto approx = stmt(p, g.substr(0, g.find(" -> ")) + " -> _|_ # " + format_real(d));
      EXPECT_TRUE(holds(p, u, approx).derivable());
    }
  }
}

TEST(Certificate, RoundTripAndRecheck) {
  Program p = library();
  QualDomain u = QualDomain::unit();
  for (const char* s : {"search(\"German\", \"Essay\", upper) -> 4 # 0.65", "member(2, [1,2]) -> true # 1",
                        "getTitle(book(1, \"Tin;tin\", \"H\", \"F\", \"C\", easy, 65)) -> \"Tin;tin\" # 0.5"}) {
    auto r = holds(p, u, stmt(p, s));
    ASSERT_TRUE(r.derivable()) << s;
    std::string cert = write_certificate(*r.proof);
    ProofNode back = read_certificate(cert, p.sig);
    EXPECT_EQ(write_certificate(back), cert);
    EXPECT_TRUE(check_certificate(p, u, cert).valid()) << check_certificate(p, u, cert).reason;
  }
}

TEST(Certificate, PlainProofs) {
  Program p = parse_program_or_throw("f'(X, W) --> g'(X) <== qVal(W), W <= 0.9 * W1\ng'(X) --> X\n",
                                     {SourceKind::Plain});
  auto r = holds(p, QualDomain::unit(), parse_statement("f'(3, 0.5) -> 3", p.sig, {SourceKind::Plain}));
  ASSERT_TRUE(r.derivable());
  std::string cert = write_certificate(*r.proof);
  EXPECT_TRUE(check_certificate(p, QualDomain::unit(), cert).valid()) << cert;
}

TEST(Certificate, MalformedInputIsRejected) {
  Program p = library();
  QualDomain u = QualDomain::unit();
  auto r = holds(p, u, stmt(p, std::string("guessGenre(") + kBook4 + ") -> \"Essay\" # 0.7"));
  ASSERT_TRUE(r.derivable());
  std::string cert = write_certificate(*r.proof);
  EXPECT_TRUE(check_certificate(p, u, "").invalid());
  EXPECT_TRUE(check_certificate(p, u, cert + cert).invalid());
  EXPECT_TRUE(check_certificate(p, u, cert.substr(0, cert.rfind('\n', cert.size() - 2) + 1)).invalid());
  std::string raised = cert;
  raised.replace(raised.find("# 0.7"), 5, "# 0.8");
  EXPECT_TRUE(check_certificate(p, u, raised).invalid());
}

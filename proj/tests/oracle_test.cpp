#include <gtest/gtest.h>

#include "qcflp/oracle.hpp"
#include "test_util.hpp"

using namespace qcflp;

namespace {

Program load(const std::string& name) { return parse_program_or_throw(read_file(program_path(name))); }

const OracleRow* find_row(const OracleReport& r, const std::string& call, const std::string& result) {
  for (const auto& row : r.rows) {
    if (row.call == call && row.result == result) return &row;
  }
  return nullptr;
}

}  // namespace

TEST(Oracle, ConstantPrograms) {
  OracleReport r = oracle_compare(load("tiny_const.qcflp"));
  EXPECT_TRUE(r.ok()) << r.note;
  const OracleRow* f = find_row(r, "f", "true");
  ASSERT_NE(f, nullptr);
  EXPECT_TRUE(f->match);
  EXPECT_DOUBLE_EQ(*f->lfp, 1.0);
  const OracleRow* g = find_row(r, "g", "true");
  ASSERT_NE(g, nullptr);
  EXPECT_TRUE(g->match);
  EXPECT_DOUBLE_EQ(*g->lfp, 0.9);
  EXPECT_EQ(to_string(*g->runtime), "(0, 0.9]");
}

TEST(Oracle, TinyProgramsAgree) {
  for (const char* name : {"tiny_const.qcflp", "tiny_neg.qcflp", "tiny_guard.qcflp"}) {
    Program p = load(name);
    EXPECT_LE(p.rules.size(), 5u);
    OracleReport r = oracle_compare(p);
    EXPECT_LE(default_universe(p).size(), 20u);
    EXPECT_FALSE(r.rows.empty()) << name;
    EXPECT_EQ(r.mismatches, 0u) << name;
    EXPECT_FALSE(r.budget_exceeded) << name << ": " << r.note;
  }
  OracleReport neg = oracle_compare(load("tiny_neg.qcflp"));
  const OracleRow* twice = find_row(neg, "twice(true)", "true");
  ASSERT_NE(twice, nullptr);
  EXPECT_NEAR(*twice->lfp, 0.72, 1e-9);
}

TEST(Oracle, DroppedConditionsAreDetectedUnlessRedundant) {
  for (const char* name : {"tiny_const.qcflp", "tiny_neg.qcflp", "tiny_guard.qcflp"}) {
    Program p = load(name);
    FreshSupply fresh(0);
    Program tp = transform_program(p, QualDomain::unit(), fresh).program;
    std::size_t live = 0;
    for (const auto& site : mutation_sites(tp)) {
      OracleOptions o;
      o.mutation = site;
      OracleReport r = oracle_compare(p, o);
      if (is_redundant_site(tp, site)) {
        EXPECT_EQ(r.mismatches, 0u) << name << " " << site.rule << "." << site.condition;
      } else {
        ++live;
        EXPECT_GT(r.mismatches, 0u) << name << " " << site.rule << "." << site.condition;
      }
    }
    EXPECT_GT(live, 0u);
  }
}

TEST(Oracle, RedundancyClassification) {
  Program p = parse_program_or_throw("g -0.9-> true\nh -0.5-> g\n");
  FreshSupply fresh(0);
  Program tp = transform_program(p, QualDomain::unit(), fresh).program;
  // g'(_W0) --> true <== qVal(_W0), _W0 <= 0.9
  EXPECT_FALSE(is_redundant_site(tp, {0, 0}));
  EXPECT_FALSE(is_redundant_site(tp, {0, 1}));
  // h'(_W1) --> g'(_W2) <== qVal(_W1), qVal(_W2), _W1 <= 0.5 * _W2
  EXPECT_FALSE(is_redundant_site(tp, {1, 0}));
  EXPECT_TRUE(is_redundant_site(tp, {1, 1}));
  EXPECT_FALSE(is_redundant_site(tp, {1, 2}));
}

TEST(Oracle, LimitsAreReportedAsBudget) {
  OracleOptions o;
  o.max_rules = 1;
  OracleReport r = oracle_compare(load("tiny_neg.qcflp"), o);
  EXPECT_TRUE(r.budget_exceeded);
  EXPECT_FALSE(r.ok());

  Program loop = parse_program_or_throw("loop(X) --> loop(X)\nloop(X) -0.5-> X\nk --> 1\n");
  OracleOptions shallow;
  shallow.depth = 3;
  EXPECT_TRUE(oracle_compare(loop, shallow).budget_exceeded);
}

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "qcflp/qual_domain.hpp"

using namespace qcflp;

namespace {

QualValue R(double x) { return QualValue::real(x); }
QualValue P(QualValue a, QualValue b) { return QualValue::pair(std::move(a), std::move(b)); }

QualValue sample(const QualDomain& dom, std::mt19937_64& rng) {
  if (dom.is_unit()) {
    std::uniform_int_distribution<int> pick(0, 9);
    int k = pick(rng);
    if (k == 0) return R(0.0);
    if (k == 1) return R(1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return R(u(rng));
  }
  return P(sample(dom.left(), rng), sample(dom.right(), rng));
}

std::vector<QualDomain> domains() {
  return {QualDomain::unit(), *QualDomain::by_name("uxu"), *QualDomain::by_name("uxuxu")};
}

bool approx_eq(const QualDomain& dom, const QualValue& a, const QualValue& b) {
  return dom.approx_leq(a, b) && dom.approx_leq(b, a);
}

bool strictly_below(const QualDomain& dom, const QualValue& a, const QualValue& b) {
  return dom.leq(a, b) && !(a == b);
}

bool fixes(const QualValue& d, const QualValue& e) {
  if (d.is_real()) return d.value() == 1.0 || e.value() == 0.0;
  return fixes(d.left(), e.left()) && fixes(d.right(), e.right());
}

}  // namespace

TEST(QualDomain, UnitLatticeOperations) {
  auto u = QualDomain::unit();
  EXPECT_DOUBLE_EQ(u.glb(R(0.3), R(0.7)).value(), 0.3);
  EXPECT_DOUBLE_EQ(u.lub(R(0.3), R(0.7)).value(), 0.7);
  EXPECT_DOUBLE_EQ(u.glb_all({}).value(), 1.0);
  std::vector<QualValue> three = {R(0.9), R(0.4), R(0.6)};
  EXPECT_DOUBLE_EQ(u.glb_all(three).value(), 0.4);
  EXPECT_TRUE(u.leq(R(0.2), R(0.2)));
  EXPECT_FALSE(u.leq(R(0.8), R(0.7)));
}

TEST(QualDomain, UnitAttenuation) {
  auto u = QualDomain::unit();
  EXPECT_NEAR(u.attenuate(R(0.9), R(0.8)).value(), 0.72, 1e-12);
  EXPECT_DOUBLE_EQ(u.attenuate(R(0.7), R(1.0)).value(), 0.7);
  EXPECT_DOUBLE_EQ(u.attenuate(R(0.5), R(0.0)).value(), 0.0);
}

TEST(QualDomain, Extremes) {
  auto u = QualDomain::unit();
  EXPECT_EQ(u.bottom(), R(0.0));
  EXPECT_EQ(u.top(), R(1.0));
  auto uu = *QualDomain::by_name("uxu");
  EXPECT_EQ(uu.bottom(), P(R(0), R(0)));
  EXPECT_EQ(uu.top(), P(R(1), R(1)));
  auto u3 = QualDomain::product(QualDomain::unit(), QualDomain::product(QualDomain::unit(), QualDomain::unit()));
  EXPECT_EQ(u3.bottom(), P(R(0), P(R(0), R(0))));
  EXPECT_EQ(u3.top(), P(R(1), P(R(1), R(1))));
  EXPECT_EQ(to_string(u3.top()), "(1,(1,1))");
}

TEST(QualDomain, ProductIsComponentwise) {
  auto uu = *QualDomain::by_name("uxu");
  auto d = P(R(0.9), R(0.5));
  auto e = P(R(0.8), R(0.6));
  EXPECT_TRUE(approx_equal(uu.attenuate(d, e), P(R(0.72), R(0.3))));
  EXPECT_EQ(uu.glb(d, e), P(R(0.8), R(0.5)));
  EXPECT_EQ(uu.lub(d, e), P(R(0.9), R(0.6)));
  EXPECT_FALSE(uu.leq(d, e));
  EXPECT_FALSE(uu.leq(e, d));
}

TEST(QualDomain, ProductStrictDecreaseCounterexample) {
  auto uu = *QualDomain::by_name("uxu");
  auto d = P(R(1.0), R(0.5));
  auto e = P(R(0.3), R(0.0));
  EXPECT_FALSE(uu.is_bottom(d) || uu.is_top(d) || uu.is_bottom(e) || uu.is_top(e));
  EXPECT_EQ(uu.attenuate(d, e), e);
}

TEST(QualDomain, ValidationRejectsBadValues) {
  EXPECT_THROW(QualValue::real(1.5), QualError);
  EXPECT_THROW(QualValue::real(-0.1), QualError);
  auto u = QualDomain::unit();
  EXPECT_THROW(u.glb(R(0.5), P(R(0.1), R(0.2))), QualError);
  EXPECT_FALSE(u.is_strict(R(0.0)));
  EXPECT_TRUE(u.is_strict(R(0.01)));
  EXPECT_FALSE(QualDomain::by_name("v").has_value());
}

TEST(QualDomain, Residual) {
  auto u = QualDomain::unit();
  EXPECT_NEAR(u.residual(R(0.45), R(0.9))->value(), 0.5, 1e-12);
  EXPECT_FALSE(u.residual(R(0.95), R(0.9)).has_value());
  EXPECT_DOUBLE_EQ(u.residual(R(0.0), R(0.3))->value(), 0.0);
}

TEST(QualDomainProperty, AxiomSuite) {
  std::mt19937_64 rng(20240611);
  for (const auto& dom : domains()) {
    for (int i = 0; i < 1000; ++i) {
      auto d = sample(dom, rng), e = sample(dom, rng), f = sample(dom, rng);
      SCOPED_TRACE(dom.name() + " d=" + to_string(d) + " e=" + to_string(e) + " f=" + to_string(f));
      // associative, commutative
      EXPECT_TRUE(approx_eq(dom, dom.attenuate(dom.attenuate(d, e), f), dom.attenuate(d, dom.attenuate(e, f))));
      EXPECT_TRUE(approx_eq(dom, dom.attenuate(d, e), dom.attenuate(e, d)));
      // monotonic
      if (dom.leq(d, e)) EXPECT_TRUE(dom.approx_leq(dom.attenuate(d, f), dom.attenuate(e, f)));
      // top is neutral
      EXPECT_TRUE(approx_eq(dom, dom.attenuate(d, dom.top()), d));
      // strict decrease off the extremes; in products it fails exactly when
      // every component has d_i = 1 or e_i = 0
      bool d_ext = dom.is_bottom(d) || dom.is_top(d);
      bool e_ext = dom.is_bottom(e) || dom.is_top(e);
      if (!d_ext && !e_ext) {
        EXPECT_EQ(strictly_below(dom, dom.attenuate(d, e), e), !fixes(d, e));
        if (dom.is_unit()) EXPECT_TRUE(strictly_below(dom, dom.attenuate(d, e), e));
      }
      // distributes over glb
      EXPECT_TRUE(approx_eq(dom, dom.attenuate(d, dom.glb(e, f)), dom.glb(dom.attenuate(d, e), dom.attenuate(d, f))));
      // consequences
      EXPECT_TRUE(dom.leq(dom.attenuate(d, e), e));
      EXPECT_EQ(dom.attenuate(d, dom.bottom()), dom.bottom());
    }
  }
}

TEST(QualDomainProperty, LatticeLaws) {
  std::mt19937_64 rng(77);
  for (const auto& dom : domains()) {
    for (int i = 0; i < 1000; ++i) {
      auto d = sample(dom, rng), e = sample(dom, rng), f = sample(dom, rng);
      EXPECT_EQ(dom.glb(d, d), d);
      EXPECT_EQ(dom.lub(d, d), d);
      EXPECT_EQ(dom.glb(d, e), dom.glb(e, d));
      EXPECT_EQ(dom.lub(d, e), dom.lub(e, d));
      EXPECT_EQ(dom.glb(dom.glb(d, e), f), dom.glb(d, dom.glb(e, f)));
      EXPECT_EQ(dom.lub(dom.lub(d, e), f), dom.lub(d, dom.lub(e, f)));
      EXPECT_TRUE(dom.leq(dom.glb(d, e), d));
      EXPECT_TRUE(dom.leq(d, dom.lub(d, e)));
      EXPECT_TRUE(dom.leq(dom.bottom(), d));
      EXPECT_TRUE(dom.leq(d, dom.top()));
    }
  }
}

TEST(QualDomainProperty, ResidualIsLeastSolution) {
  std::mt19937_64 rng(5);
  for (const auto& dom : domains()) {
    for (int i = 0; i < 1000; ++i) {
      auto d = sample(dom, rng), a = sample(dom, rng), e = sample(dom, rng);
      if (dom.is_bottom(a)) continue;
      auto r = dom.residual(d, a);
      if (!r) {
        EXPECT_FALSE(dom.approx_leq(d, a));
        continue;
      }
      EXPECT_TRUE(dom.approx_leq(d, dom.attenuate(a, *r)));
      if (dom.leq(d, dom.attenuate(a, e))) EXPECT_TRUE(dom.approx_leq(*r, e));
    }
  }
}

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}

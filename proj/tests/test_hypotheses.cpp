#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "radshoot/errors.hpp"
#include "radshoot/hypotheses.hpp"

using namespace radshoot;

namespace {

constexpr double kAlphaStarRef = 8.6719342999940;

PiecewiseNonlinearity with_power_block(double q, double amp_sq, int n = 4) {
  return compile(BaseModel(2.0, n), {BlockSpec{PowerBlock{q}, amp_sq, kAlphaStarRef + 0.1, 1e-3}});
}

SampleGrid above_beta(const BaseModel& m, int count = 2000) {
  return {m.beta() * (1.0 + 1e-9), 100.0 * m.beta(), count, true};
}

}  // namespace

TEST(BAndBeta, MatchClosedForms) {
  const auto [b2, beta2] = find_b_and_beta(BaseModel(2.0, 4));
  EXPECT_DOUBLE_EQ(b2, 1.0);
  EXPECT_NEAR(beta2, 1.5, 1e-14);
  const auto [b3, beta3] = find_b_and_beta(BaseModel(3.0, 4, Criticality::Unchecked));
  EXPECT_DOUBLE_EQ(b3, 1.0);
  EXPECT_NEAR(beta3, std::sqrt(2.0), 1e-14);
}

TEST(H2, MarginMatchesHandDerivative) {
  // p = 2: F/f = s(2s - 3) / (6(s - 1)), so (F/f)' = (2s^2 - 4s + 3) / (6(s - 1)^2).
  const BaseModel m(2.0, 4);
  for (double s : {1.6, 2.0, 5.0, 40.0}) {
    const double oracle = (2 * s * s - 4 * s + 3) / (6 * (s - 1) * (s - 1));
    EXPECT_NEAR(m.F_over_f_prime(s), oracle, 1e-12 * oracle) << s;
  }
}

TEST(H2, VerdictsForBaseModels) {
  const BaseModel sub(2.0, 4), crit(3.0, 4, Criticality::Unchecked), high(2.0, 10, Criticality::Supercritical);
  EXPECT_EQ(check_H2(sub, above_beta(sub)).verdict, Verdict::Pass);
  const auto c = check_H2(crit, above_beta(crit));
  EXPECT_EQ(c.verdict, Verdict::Inconclusive);
  EXPECT_GT(c.margin, 0.0);
  const auto f = check_H2(high, above_beta(high));
  EXPECT_EQ(f.verdict, Verdict::Fail);
  ASSERT_TRUE(f.witness.has_value());
  EXPECT_LE(high.F_over_f_prime(*f.witness) - 0.4, 0.0);
}

TEST(H2, GenericFormAgreesWithClosedForm) {
  const BaseModel m(2.0, 4);
  const auto g = check_H2([&](double s) { return m.f(s); }, [&](double s) { return m.F(s); }, 4,
                          {1.6, 150.0, 500, true});
  const auto a = check_H2(m, {1.6, 150.0, 500, true});
  EXPECT_EQ(g.verdict, a.verdict);
  EXPECT_NEAR(g.margin, a.margin, 1e-7);
}

TEST(H3, BaseModelsPassAndCounterexampleFails) {
  for (double p : {2.0, 1.5, 3.0}) {
    const BaseModel m(p, 4, Criticality::Unchecked);
    EXPECT_EQ(check_H3(m, {1.0 + 1e-6, 150.0, 2000, true}).verdict, Verdict::Pass) << p;
  }
  // f/(s - 1) = 1/s is decreasing.
  const auto r = check_H3([](double s) { return (s - 1.0) / s; }, 1.0, {1.01, 50.0, 400, true});
  EXPECT_EQ(r.verdict, Verdict::Fail);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_THROW(check_H3(BaseModel(2.0, 4), {0.5, 2.0, 10, true}), SpecError);
}

TEST(H6, PowerTwoPassesAndPowerFiveFails) {
  const auto pass = check_H6(with_power_block(2.0, 100.0));
  EXPECT_EQ(pass.result.verdict, Verdict::Pass) << pass.result.detail;
  EXPECT_GE(pass.rungs.back().s, 1e6);
  const auto fail = check_H6(with_power_block(5.0, 1e4));
  EXPECT_EQ(fail.result.verdict, Verdict::Fail) << fail.result.detail;
  ASSERT_TRUE(fail.result.witness.has_value());
  EXPECT_LT(fail.q_min, 0.0);
}

TEST(H6, StableInThetaAndAmplitude) {
  for (double theta : {0.3, 0.5, 0.9}) {
    H6Options o;
    o.theta = theta;
    for (double a2 : {1.0, 100.0, 1e4}) {
      EXPECT_EQ(check_H6(with_power_block(2.0, a2), o).result.verdict, Verdict::Pass) << theta << ' ' << a2;
      EXPECT_EQ(check_H6(with_power_block(5.0, a2), o).result.verdict, Verdict::Fail) << theta << ' ' << a2;
    }
  }
}

TEST(H6, ShortLadderIsInconclusive) {
  H6Options o;
  o.ladder = {1e2, 1e3, 1e4};
  EXPECT_EQ(check_H6(with_power_block(2.0, 100.0), o).result.verdict, Verdict::Inconclusive);
  o.theta = 1.0;
  EXPECT_THROW(check_H6(with_power_block(2.0, 100.0), o), SpecError);
}

TEST(H6, ValueMatchesHandComputation) {
  // q = 2 block, N = 4: Q = (2/3) A^2 s^3 + lower order, f = A^2 s^2 + lower order.
  H6Options o;
  o.ladder = {1e2, 1e4, 1e6};
  const auto r = check_H6(with_power_block(2.0, 100.0), o);
  const double s = 1e6;
  const double q_lead = (2.0 / 3.0) * 100.0 * std::pow(o.theta * s, 3);
  const double value = q_lead * std::pow(s / (100.0 * s * s), 2);
  EXPECT_NEAR(r.rungs.back().value / value, 1.0, 1e-3);
}

TEST(Verify, BaseModelPassesH1ToH5) {
  const auto rep = verify_hypotheses(compile(BaseModel(2.0, 4), {}));
  for (const char* h : {"H1", "H2", "H3", "H4", "H5"}) {
    ASSERT_NE(rep.find(h), nullptr);
    EXPECT_EQ(rep.find(h)->verdict, Verdict::Pass) << h;
  }
  ASSERT_TRUE(rep.alpha_star.has_value());
  EXPECT_NEAR(rep.alpha_star->first, kAlphaStarRef, 1e-7);
  EXPECT_EQ(rep.find("H6")->verdict, Verdict::Pass);
  EXPECT_EQ(rep.overall(), Verdict::Pass);
}

TEST(Verify, PowerFiveChainFailsOnlyH6) {
  const auto rep = verify_hypotheses(with_power_block(5.0, 1e4));
  for (const char* h : {"H1", "H2", "H3", "H4", "H5"}) EXPECT_EQ(rep.find(h)->verdict, Verdict::Pass) << h;
  EXPECT_EQ(rep.find("H6")->verdict, Verdict::Fail);
  EXPECT_EQ(rep.overall(), Verdict::Fail);
  const std::string js = rep.to_json();
  EXPECT_NE(js.find("\"overall\": \"fail\""), std::string::npos);
  EXPECT_NE(js.find("h6_ladder"), std::string::npos);
}

TEST(Verify, VerdictsIndependentOfGridSize) {
  const auto nl = with_power_block(2.0, 100.0);
  VerifyOptions coarse, fine;
  coarse.grid_samples = 500;
  fine.grid_samples = 8000;
  const auto a = verify_hypotheses(nl, coarse), b = verify_hypotheses(nl, fine);
  ASSERT_EQ(a.results.size(), b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    EXPECT_EQ(a.results[i].verdict, b.results[i].verdict) << a.results[i].name;
  }
}

TEST(Verify, FiniteGammaLeavesH6Inconclusive) {
  const auto rep = verify_hypotheses(compile(BaseModel(2.0, 4), {}, 50.0));
  EXPECT_EQ(rep.find("H6")->verdict, Verdict::Inconclusive);
  EXPECT_EQ(rep.overall(), Verdict::Inconclusive);
}

TEST(H5, NonPositiveBlockFails) {
  // Block 2 is only used on [alpha* + 0.2, 9.3], but its kind dips below zero near 10.
  const auto nl = compile(BaseModel(2.0, 4), {BlockSpec{AffineSineBlock{0.5, 0.0, 1.0}, 1.0, kAlphaStarRef + 0.1, 0.1},
                                              BlockSpec{PowerBlock{2.0}, 1.0, 9.3, 0.1}});
  const auto r = check_H5(nl, kAlphaStarRef, 100.0);
  EXPECT_EQ(r.verdict, Verdict::Fail);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_LE(0.5 + std::sin(*r.witness), 0.0);
}

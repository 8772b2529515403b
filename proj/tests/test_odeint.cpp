#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "radshoot/errors.hpp"
#include "radshoot/odeint.hpp"

using namespace radshoot;

namespace {

const BaseModel kBase(2.0, 4);

// f == c for u above 9.1.
PiecewiseNonlinearity constant_source(double c) {
  return compile(kBase, {BlockSpec{AffineSineBlock{c, 0.0, 0.0}, 1.0, 9.0, 0.1}});
}

// Constant-source solution through (r0, alpha, vbar) in dimension n.
struct ConstantSourceExact {
  int n;
  double c, r0, alpha, vbar;
  double K() const { return std::pow(r0, n - 1) * vbar + c * std::pow(r0, n) / n; }
  double u(double r) const {
    return alpha + K() / (2.0 - n) * (std::pow(r, 2 - n) - std::pow(r0, 2 - n)) -
           c * (r * r - r0 * r0) / (2.0 * n);
  }
  double v(double r) const { return K() * std::pow(r, 1 - n) - c * r / n; }
};

}  // namespace

TEST(Integrate, ConstantSourceFromOriginIsExact) {
  const auto nl = constant_source(2.0);
  IntegrationControls ctl;
  ctl.r_max = 1.0;
  const auto tr = integrate(nl, {0.0, 20.0, 0.0}, {}, ctl);
  EXPECT_EQ(tr.termination(), Termination::RMax);
  EXPECT_DOUBLE_EQ(tr.r_end(), 1.0);
  EXPECT_NEAR(tr.back().u, 20.0 - 2.0 / 8.0, ctl.rel_tol * 20.0);
  EXPECT_NEAR(tr.back().v, -2.0 / 4.0, ctl.rel_tol);
}

TEST(Integrate, ConstantSourceFromInteriorPoint) {
  const auto nl = constant_source(3.0);
  const ConstantSourceExact ex{4, 3.0, 0.1, 20.0, -0.4};
  IntegrationControls ctl;
  ctl.r_max = 1.5;
  const auto tr = integrate(nl, {ex.r0, ex.alpha, ex.vbar}, {}, ctl);
  for (double r : {0.2, 0.5, 1.0, 1.5}) {
    EXPECT_NEAR(tr.at(r).u, ex.u(r), 1e-8);
    EXPECT_NEAR(tr.at(r).v, ex.v(r), 1e-8);
  }
}

TEST(Integrate, ObservedOrderAtLeastFour) {
  const auto nl = constant_source(3.0);
  const ConstantSourceExact ex{4, 3.0, 0.1, 20.0, -0.4};
  std::vector<double> logn, loge;
  for (double tol : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10}) {
    IntegrationControls ctl;
    ctl.rel_tol = tol;
    ctl.abs_tol = tol;
    ctl.r_max = 2.0;
    const auto tr = integrate(nl, {ex.r0, ex.alpha, ex.vbar}, {}, ctl);
    const double err = std::hypot(tr.back().u - ex.u(2.0), tr.back().v - ex.v(2.0));
    logn.push_back(std::log(static_cast<double>(tr.samples().size() - 1)));
    loge.push_back(std::log(err));
  }
  // Least-squares slope of log(err) against log(steps).
  const double n = static_cast<double>(logn.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < logn.size(); ++i) {
    sx += logn[i];
    sy += loge[i];
    sxx += logn[i] * logn[i];
    sxy += logn[i] * loge[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_GE(-slope, 4.0);
  EXPECT_LE(-slope, 6.5);
}

TEST(Integrate, SeriesStartDirectionBelowB) {
  const auto nl = compile(kBase, {});
  IntegrationControls ctl;
  ctl.r_max = 0.5;
  const auto tr = integrate(nl, {0.0, 0.5, 0.0}, {}, ctl);
  for (const auto& s : tr.samples()) {
    if (s.r > 0.0) EXPECT_GT(s.v, 0.0);
  }
}

TEST(Integrate, PohozaevNegativeForAlphaThree) {
  const auto nl = compile(kBase, {});
  const EventSpec stop{EventKind::VCrossesZero, 0.0, Direction::Up, true};
  const auto tr = integrate(nl, {0.0, 3.0, 0.0}, {&stop, 1}, {});
  ASSERT_EQ(tr.termination(), Termination::Event);
  auto E = [&](const RadialState& s) {
    const double r = s.r;
    const double F = s.u * s.u * s.u / 3 - s.u * s.u / 2;
    return r * r * r * r * (s.v * s.v + 2 * F) + 2 * r * r * r * s.v * s.u;
  };
  for (const auto& s : tr.samples()) {
    if (s.r > 0.0) EXPECT_LT(E(s), 0.0) << s.r;
  }
  for (int i = 1; i <= 1000; ++i) {
    const double r = tr.r_end() * i / 1000.0;
    EXPECT_LT(E(tr.at(r)), 0.0) << r;
  }
}

TEST(Integrate, EventResidualsAndOrder) {
  const auto nl = compile(kBase, {});
  const std::vector<EventSpec> ev{
      {EventKind::UCrossesLevel, 5.0, Direction::Down, false},
      {EventKind::UCrossesLevel, 2.0, Direction::Down, false},
      {EventKind::UCrossesZero, 0.0, Direction::Down, true},
  };
  const auto tr = integrate(nl, {0.0, 20.0, 0.0}, ev, {});
  ASSERT_EQ(tr.termination(), Termination::Event);
  ASSERT_EQ(tr.events().size(), 3u);
  for (const auto& e : tr.events()) {
    const double level = e.kind == EventKind::UCrossesZero ? 0.0 : e.level;
    EXPECT_LT(std::abs(e.state.u - level), 1e-10);
    EXPECT_LT(e.state.v, 0.0);
  }
  EXPECT_LT(tr.events()[0].state.r, tr.events()[1].state.r);
  EXPECT_DOUBLE_EQ(tr.r_end(), tr.events()[2].state.r);
  ASSERT_NE(tr.first_event(1), nullptr);
  EXPECT_EQ(tr.first_event(7), nullptr);
}

TEST(Integrate, IdentityAlongDecreasingBranch) {
  const auto nl = compile(kBase, {BlockSpec{PowerBlock{2.0}, 10.0, 9.0, 0.1}});
  const EventSpec stop{EventKind::VCrossesZero, 0.0, Direction::Up, true};
  const EventSpec zero{EventKind::UCrossesZero, 0.0, Direction::Down, true};
  const std::vector<EventSpec> ev{stop, zero};
  const auto tr = integrate(nl, {0.0, 12.0, 0.0}, ev, {});
  const int n = 4;
  const double r0 = 0.05;
  const double m0 = std::pow(r0, n - 1) * std::abs(tr.at(r0).v);
  auto g = [&](double t) { return std::pow(t, n - 1) * nl.f_extended(tr.at(t).u); };
  std::vector<double> knots{r0};
  for (const auto& s : tr.samples())
    if (s.r > r0) knots.push_back(s.r);
  double integral = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    integral += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, knots[i - 1], knots[i]);
    const double r = knots[i];
    const double lhs = std::pow(r, n - 1) * std::abs(tr.at(r).v);
    ASSERT_NEAR(lhs, m0 + integral, 1e-6 * std::max(lhs, 1e-3)) << r;
  }
}

TEST(Integrate, StepsLandOnJunctions) {
  const auto nl = compile(kBase, {BlockSpec{PowerBlock{2.0}, 10.0, 9.0, 0.1}});
  const auto tr = integrate(nl, {0.0, 12.0, 0.0}, {}, IntegrationControls{.r_max = 1.0});
  for (double level : nl.junctions()) {
    if (level > 12.0 || level < tr.back().u) continue;
    double best = 1e9;
    for (const auto& s : tr.samples()) best = std::min(best, std::abs(s.u - level));
    EXPECT_LT(best, 1e-9) << level;
  }
}

TEST(Integrate, Terminations) {
  const auto nl_bounded = compile(kBase, {BlockSpec{PowerBlock{2.0}, 1.0, 9.0, 0.1}}, 15.0);
  // A steep upward start leaves through gamma.
  auto tr = integrate(nl_bounded, {1.0, 14.0, 50.0}, {}, {});
  EXPECT_EQ(tr.termination(), Termination::DomainExit);
  EXPECT_NEAR(tr.back().u, 15.0, 1e-9);

  const auto nl = compile(kBase, {});
  tr = integrate(nl, {0.0, 20.0, 0.0}, {}, {});
  EXPECT_EQ(tr.termination(), Termination::DomainExit);
  EXPECT_NEAR(tr.back().u, 0.0, 1e-12);

  tr = integrate(nl, {0.0, 20.0, 0.0}, {}, IntegrationControls{.max_steps = 5});
  EXPECT_EQ(tr.termination(), Termination::StepFailure);

  IntegrationControls pred;
  pred.stop_when = [](const RadialState& s) { return s.u < 10.0; };
  tr = integrate(nl, {0.0, 20.0, 0.0}, {}, pred);
  EXPECT_EQ(tr.termination(), Termination::Predicate);
  EXPECT_LT(tr.back().u, 10.0);

  EXPECT_THROW(integrate(nl, {0.0, 2.0, 1.0}, {}, {}), SpecError);
  EXPECT_THROW(integrate(nl, {0.0, 2.0, 0.0}, {}, IntegrationControls{.rel_tol = 0.0}), SpecError);
}

TEST(Trajectory, SamplesIncreaseAndCsv) {
  const auto nl = compile(kBase, {});
  const auto tr = integrate(nl, {0.0, 4.0, 0.0}, {}, IntegrationControls{.r_max = 3.0});
  for (std::size_t i = 1; i < tr.samples().size(); ++i) {
    EXPECT_GT(tr.samples()[i].r, tr.samples()[i - 1].r);
  }
  EXPECT_THROW(tr.at(3.5), DomainError);
  EXPECT_THROW(tr.at(-0.1), DomainError);
  std::ostringstream os;
  tr.write_csv(os);
  EXPECT_EQ(os.str().rfind("r,u,v\n", 0), 0u);
  EXPECT_EQ(std::string(to_string(Termination::RMax)), "r_max");
}

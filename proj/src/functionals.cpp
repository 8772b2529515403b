#include "radshoot/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "radshoot/errors.hpp"

namespace radshoot {

namespace {

constexpr double kSlopeFloor = 1e-12;

double root(auto g, double a, double b) {
  const double ga = g(a), gb = g(b);
  if (ga == 0.0) return a;
  if (gb == 0.0) return b;
  boost::uintmax_t iters = 200;
  auto br = boost::math::tools::toms748_solve(g, a, b, ga, gb,
                                              boost::math::tools::eps_tolerance<double>(52), iters);
  return std::abs(g(br.first)) <= std::abs(g(br.second)) ? br.first : br.second;
}

}  // namespace

MonotoneBranch::MonotoneBranch(const Trajectory& tr, double r_begin) : tr_(&tr), r_lo_(r_begin) {
  const auto smp = tr.samples();
  if (smp.size() < 2) throw SpecError("trajectory too short for a monotone branch");
  const RadialState start = tr.at(r_begin);
  if (!(start.v < -kSlopeFloor) && !(r_begin == 0.0 && start.v == 0.0)) {
    throw SpecError("branch must start where u' < 0 (or at r = 0)");
  }
  auto it = std::upper_bound(smp.begin(), smp.end(), r_begin,
                             [](double r, const RadialState& s) { return r < s.r; });
  i_lo_ = static_cast<std::size_t>(it - smp.begin()) - 1;
  i_hi_ = smp.size() - 1;
  r_hi_ = tr.r_end();
  for (std::size_t k = i_lo_ + 1; k < smp.size(); ++k) {
    if (smp[k].v >= -kSlopeFloor) {
      const double a = std::max(r_begin, smp[k - 1].r);
      if (a > 0.0 && tr.at(a).v < -kSlopeFloor) {
        r_hi_ = root([&](double r) { return tr.at(r).v + kSlopeFloor; }, a, smp[k].r);
        // Stay strictly inside the branch.
        while (r_hi_ > a && !(tr.at(r_hi_).v < -kSlopeFloor)) r_hi_ = std::nextafter(r_hi_, a);
      } else {
        r_hi_ = a;
      }
      i_hi_ = k;
      break;
    }
  }
  if (!(r_hi_ > r_lo_)) throw SpecError("empty monotone branch");
  s_max_ = start.u;
  s_min_ = tr.at(r_hi_).u;
}

double MonotoneBranch::r_of(double s) const {
  if (!contains(s)) {
    std::ostringstream os;
    os << "s = " << s << " outside the branch range [" << s_min_ << ", " << s_max_ << "]";
    throw DomainError(os.str(), s);
  }
  if (s == s_max_) return r_lo_;
  if (s == s_min_) return r_hi_;
  const auto smp = tr_->samples();
  // u is decreasing on the branch: first sample at or below s.
  std::size_t lo = i_lo_ + 1, hi = i_hi_;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (smp[mid].u <= s) hi = mid;
    else lo = mid + 1;
  }
  const double a = std::max(r_lo_, smp[lo - 1].r);
  const double b = std::min(r_hi_, smp[lo].r);
  return root([&](double r) { return tr_->at(r).u - s; }, a, b);
}

RadialState MonotoneBranch::state_at(double s) const { return tr_->at(r_of(s)); }

double F_over_f_prime(const PiecewiseNonlinearity& nl, double s) {
  const Segment& seg = nl.segments()[nl.segment_index(s)];
  if (seg.kind == SegmentKind::Base) return nl.base().F_over_f_prime(s);
  const double h = 1e-6 * std::max(1.0, std::abs(s));
  const double lo = std::max(seg.lo, s - h);
  const double hi = std::min(seg.hi, s + h);
  return (nl.F_over_f(hi) - nl.F_over_f(lo)) / (hi - lo);
}

double erbe_tang_P(const PiecewiseNonlinearity& nl, const MonotoneBranch& branch, double s, PForm form) {
  const int n = nl.dimension();
  const double ff = nl.F_over_f(s);
  const RadialState st = branch.state_at(s);
  const double r = st.r;
  const double F = nl.F(s);
  if (r == 0.0) return 0.0;
  const double rn = std::pow(r, n);
  if (form == PForm::Direct) {
    const double rp = 1.0 / st.v;
    return -2.0 * n * ff * std::pow(r, n - 1) / rp - rn / (rp * rp) - 2.0 * rn * F;
  }
  return 2.0 * rn * (n * ff * std::abs(st.v) / r - 0.5 * st.v * st.v - F);
}

double erbe_tang_P_s(const PiecewiseNonlinearity& nl, const MonotoneBranch& branch, double s) {
  const int n = nl.dimension();
  const RadialState st = branch.state_at(s);
  // r^{N-1}/r' = r^{N-1} u'.
  return (n - 2.0 - 2.0 * n * F_over_f_prime(nl, s)) * std::pow(st.r, n - 1) * st.v;
}

double pohozaev_E(const PiecewiseNonlinearity& nl, const RadialState& st) {
  const int n = nl.dimension();
  return std::pow(st.r, n) * (st.v * st.v + 2.0 * nl.F(st.u)) +
         (n - 2.0) * std::pow(st.r, n - 1) * st.v * st.u;
}

double pohozaev_E(const PiecewiseNonlinearity& nl, const Trajectory& tr, double r) {
  return pohozaev_E(nl, tr.at(r));
}

double pohozaev_E_prime(const PiecewiseNonlinearity& nl, const RadialState& st) {
  return std::pow(st.r, nl.dimension() - 1) * nl.Q(st.u);
}

double pohozaev_E_prime(const PiecewiseNonlinearity& nl, const Trajectory& tr, double r) {
  return pohozaev_E_prime(nl, tr.at(r));
}

double w_radicand(const PiecewiseNonlinearity& nl, const MonotoneBranch& branch, double s) {
  const RadialState st = branch.state_at(s);
  return st.v * st.v + 2.0 * nl.F(s);
}

double w_functional(const PiecewiseNonlinearity& nl, const MonotoneBranch& branch, double s) {
  const RadialState st = branch.state_at(s);
  const double rad = st.v * st.v + 2.0 * nl.F(s);
  if (rad < 0.0) {
    std::ostringstream os;
    os << "W radicand " << rad << " < 0 at s = " << s;
    throw NegativeRadicand(os.str(), s, rad);
  }
  return st.r * std::sqrt(rad);
}

double weighted_decay_quantity(const PiecewiseNonlinearity& nl, const RadialState& st) {
  const int n = nl.dimension();
  return std::pow(st.r, 2 * (n - 1)) * st.v * st.v + 2.0 * nl.F(st.u);
}

double singular_constant(int n, double q) {
  if (n < 3 || !(q > static_cast<double>(n) / (n - 2))) {
    throw SpecError("singular solution needs N >= 3 and q > N/(N-2)");
  }
  const double m = 2.0 / (q - 1.0);
  return std::pow(m * (n - 2.0 - m), 1.0 / (q - 1.0));
}

double singular_solution(int n, double q, double a, double r) {
  const double m = 2.0 / (q - 1.0);
  return singular_constant(n, q) * std::pow(a, -m) * std::pow(r, -m);
}

double singular_residual(int n, double q, double a, double r) {
  const double m = 2.0 / (q - 1.0);
  const double v = singular_solution(n, q, a, r);
  const double v1 = -m * v / r;
  const double v2 = m * (m + 1.0) * v / (r * r);
  return v2 + (n - 1.0) / r * v1 + a * a * std::pow(v, q);
}

void write_branch_csv(std::ostream& os, const PiecewiseNonlinearity& nl, const MonotoneBranch& branch,
                      int count) {
  const auto old = os.precision(17);
  os << "s,P,W\n";
  for (int i = 0; i < count; ++i) {
    const double s = branch.s_min() + (branch.s_max() - branch.s_min()) * i / std::max(1, count - 1);
    os << s << ',';
    try {
      os << erbe_tang_P(nl, branch, s);
    } catch (const SingularPoint&) {
    }
    os << ',';
    try {
      os << w_functional(nl, branch, s);
    } catch (const NegativeRadicand&) {
    }
    os << '\n';
  }
  os.precision(old);
}

void write_energy_csv(std::ostream& os, const PiecewiseNonlinearity& nl, const Trajectory& tr, int count) {
  const auto old = os.precision(17);
  os << "r,E,E_prime\n";
  for (int i = 0; i < count; ++i) {
    const double r = tr.r_begin() + (tr.r_end() - tr.r_begin()) * i / std::max(1, count - 1);
    const RadialState st = tr.at(r);
    if (st.u < 0.0) continue;
    os << r << ',' << pohozaev_E(nl, st) << ',' << pohozaev_E_prime(nl, st) << '\n';
  }
  os.precision(old);
}

}  // namespace radshoot

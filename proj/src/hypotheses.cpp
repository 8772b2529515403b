#include "radshoot/hypotheses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include "json.hpp"

#include "radshoot/errors.hpp"

namespace radshoot {

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

std::vector<double> SampleGrid::points() const {
  if (!(hi > lo) || count < 2) throw SpecError("sample grid needs lo < hi and at least two points");
  std::vector<double> pts(static_cast<std::size_t>(count));
  const bool geo = geometric && lo > 0.0;
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    pts[static_cast<std::size_t>(i)] = geo ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
  }
  pts.back() = hi;
  return pts;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

HypothesisResult margin_verdict(std::string name, const std::vector<double>& s, const std::vector<double>& m) {
  HypothesisResult r;
  r.name = std::move(name);
  const auto it = std::min_element(m.begin(), m.end());
  const auto k = static_cast<std::size_t>(it - m.begin());
  r.margin = *it;
  r.witness = s[k];
  r.verdict = *it > 0.0 ? Verdict::Pass : Verdict::Fail;
  return r;
}

}  // namespace

std::pair<double, double> find_b_and_beta(const BaseModel& base) {
  const double b = base.b();
  const double beta = base.beta();
  boost::uintmax_t iters = 200;
  auto F = [&](double s) { return base.F(s); };
  double hi = 2.0 * std::max(beta, b + 1.0);
  while (F(hi) <= 0.0) hi *= 2.0;
  auto br = boost::math::tools::toms748_solve(F, b, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  const double root = 0.5 * (br.first + br.second);
  if (std::abs(root - beta) > 1e-12 * std::max(1.0, beta) || std::abs(F(beta)) > 1e-12) {
    throw Error("closed-form beta disagrees with the bracketed zero of F");
  }
  return {b, beta};
}

HypothesisResult check_H1(const PiecewiseNonlinearity& nl, double s_hi) {
  HypothesisResult r;
  r.name = "H1";
  r.margin = kNaN;
  const double b = nl.b();
  auto fail = [&](double s, std::string why) {
    r.verdict = Verdict::Fail;
    r.witness = s;
    r.detail = std::move(why);
    return r;
  };
  if (nl.f(0.0) != 0.0) return fail(0.0, "f(0) != 0");
  for (double s : SampleGrid{b * 1e-6, b, 2000, true}.points()) {
    if (s < b && !(nl.f(s) < 0.0)) return fail(s, "f >= 0 inside (0, b)");
  }
  double F_prev = nl.F(b);
  int zeros = 0;
  for (double s : SampleGrid{b * (1.0 + 1e-9), std::min(s_hi, std::nextafter(nl.gamma(), 0.0)), 4000, true}.points()) {
    if (!(nl.f(s) > 0.0)) return fail(s, "f <= 0 above b");
    const double Fs = nl.F(s);
    if ((F_prev < 0.0) != (Fs < 0.0)) ++zeros;
    F_prev = Fs;
  }
  if (zeros != 1) return fail(s_hi, "F does not have exactly one zero above b");
  r.verdict = Verdict::Pass;
  r.detail = "b = " + fmt(b) + ", beta = " + fmt(nl.beta());
  return r;
}

HypothesisResult check_H2(const BaseModel& base, const SampleGrid& grid) {
  const auto s = grid.points();
  if (!(s.front() > base.beta())) throw SpecError("H2 grid must lie above beta");
  const int n = base.dimension();
  const double rhs = (n - 2.0) / (2.0 * n);
  std::vector<double> m;
  for (double x : s) m.push_back(base.F_over_f_prime(x) - rhs);
  HypothesisResult r = margin_verdict("H2", s, m);
  // For s^p - s, F/f ~ s/(p+1), so the margin tends to 1/(p+1) - (N-2)/(2N).
  const double tail = 1.0 / (base.p() + 1.0) - rhs;
  r.detail = "tail limit " + fmt(tail);
  if (r.verdict == Verdict::Pass && std::abs(tail) <= 1e-12) {
    r.verdict = Verdict::Inconclusive;
    r.detail += " (critical: the margin vanishes at infinity)";
  }
  return r;
}

HypothesisResult check_H2(const ScalarFn& f, const ScalarFn& F, int dimension, const SampleGrid& grid) {
  const auto s = grid.points();
  const double rhs = (dimension - 2.0) / (2.0 * dimension);
  auto ratio = [&](double x) {
    const double fx = f(x);
    if (fx == 0.0) throw SingularPoint("H2 grid touches a zero of f", x);
    return F(x) / fx;
  };
  std::vector<double> m;
  for (double x : s) {
    const double h = 1e-5 * std::max(1.0, std::abs(x));
    m.push_back((ratio(x + h) - ratio(x - h)) / (2.0 * h) - rhs);
  }
  HypothesisResult r = margin_verdict("H2", s, m);
  r.detail = "finite-difference (F/f)'";
  return r;
}

HypothesisResult check_H3(const BaseModel& base, const SampleGrid& grid) {
  return check_H3([&](double s) { return base.f(s); }, base.b(), grid);
}

HypothesisResult check_H3(const ScalarFn& f, double b, const SampleGrid& grid) {
  const auto s = grid.points();
  if (!(s.front() > b)) throw SpecError("H3 grid must lie above b");
  std::vector<double> g;
  for (double x : s) g.push_back(f(x) / (x - b));
  std::vector<double> m;
  std::vector<double> at;
  for (std::size_t i = 1; i < g.size(); ++i) {
    m.push_back((g[i] - g[i - 1]) / std::max(std::abs(g[i]), 1e-300));
    at.push_back(s[i]);
  }
  HypothesisResult r = margin_verdict("H3", at, m);
  r.detail = "relative increment of f/(s-b) between samples";
  return r;
}

HypothesisResult check_H4(const GroundStateBracket& br) {
  HypothesisResult r;
  r.name = "H4";
  r.margin = br.width();
  r.witness = br.midpoint();
  r.verdict = br.tag_lo != br.tag_hi && br.tag_lo != Tag::Undetermined &&
                      br.tag_hi != Tag::Undetermined
                  ? Verdict::Pass
                  : Verdict::Fail;
  r.detail = "alpha* in [" + fmt(br.alpha_lo) + ", " + fmt(br.alpha_hi) + "]";
  return r;
}

HypothesisResult check_H5(const PiecewiseNonlinearity& nl, double alpha_star, double s_hi) {
  HypothesisResult r;
  r.name = "H5";
  r.verdict = Verdict::Pass;
  r.margin = std::numeric_limits<double>::infinity();
  const auto& blocks = nl.spec().blocks;
  if (blocks.empty()) {
    r.margin = kNaN;
    r.detail = "no upper blocks";
    return r;
  }
  const double top = std::min(s_hi, std::nextafter(nl.gamma(), 0.0));
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    double lo = alpha_star, hi = top;
    if (const auto* t = std::get_if<SampledBlock>(&blocks[j].kind)) {
      lo = std::max(lo, t->s.front());
      hi = std::min(hi, t->s.back());
    }
    if (!(hi > lo)) continue;
    for (double s : SampleGrid{lo, hi, 20000, false}.points()) {
      const double v = eval_kind(blocks[j].kind, s);
      if (v < r.margin) {
        r.margin = v;
        r.witness = s;
      }
      if (!(v > 0.0)) {
        r.verdict = Verdict::Fail;
        r.detail = "block " + std::to_string(j + 2) + " is not positive";
        return r;
      }
    }
  }
  r.detail = "minimum unit-amplitude block value on [alpha*, " + fmt(top) + "]";
  return r;
}

H6Result check_H6(const PiecewiseNonlinearity& nl, const H6Options& opt) {
  if (!(opt.theta > 0.0 && opt.theta < 1.0)) throw SpecError("theta must lie in (0, 1)");
  std::vector<double> ladder = opt.ladder;
  if (ladder.empty()) {
    for (int k = 0; k <= 8; ++k) ladder.push_back(std::pow(10.0, 2.0 + 0.5 * k));
  }
  const int n = nl.dimension();
  H6Result out;
  out.result.name = "H6";
  out.result.margin = kNaN;
  for (double s : ladder) {
    if (!(s < nl.gamma())) throw SpecError("H6 ladder rung beyond gamma");
    double q_min = std::numeric_limits<double>::infinity();
    double f_min = q_min, f_max = -q_min;
    for (double x : SampleGrid{opt.theta * s, s, opt.window_samples, false}.points()) {
      const double fx = nl.f(x);
      if (!(fx > 0.0)) throw SingularPoint("f vanishes inside an H6 window", x);
      q_min = std::min(q_min, nl.Q(x));
      f_min = std::min(f_min, fx);
      f_max = std::max(f_max, fx);
    }
    // inf of a product with a fixed-sign first factor.
    const double ratio = q_min >= 0.0 ? s / f_max : s / f_min;
    out.rungs.push_back({s, q_min * std::pow(ratio, 0.5 * n)});
  }

  // Lower bound of Q on [0, last rung].
  const double s_max = ladder.back();
  out.q_min = 0.0;
  out.q_argmin = 0.0;
  for (double x : SampleGrid{1e-6, s_max, 8000, true}.points()) {
    const double q = nl.Q(x);
    if (q < out.q_min) {
      out.q_min = q;
      out.q_argmin = x;
    }
  }

  HypothesisResult& r = out.result;
  auto set = [&](Verdict v, double w, std::string why) {
    r.verdict = v;
    r.witness = w;
    r.detail = std::move(why);
  };
  if (out.rungs.size() < 3 || s_max < 1e6) {
    set(Verdict::Inconclusive, s_max, "ladder must reach 1e6 with at least three rungs");
    return out;
  }
  const auto& a = out.rungs[out.rungs.size() - 3];
  const auto& b = out.rungs[out.rungs.size() - 2];
  const auto& c = out.rungs.back();
  r.margin = c.value;
  const double q_top = nl.Q(s_max);
  if (out.q_argmin >= opt.theta * s_max && q_top < 0.0 && nl.Q(b.s) > q_top && nl.Q(a.s) > nl.Q(b.s)) {
    set(Verdict::Fail, out.q_argmin, "Q decreases without bound over the ladder");
    return out;
  }
  if (a.value > 0.0 && b.value > 0.0 && c.value > 0.0) {
    const double k1 = std::log(b.value / a.value) / std::log(b.s / a.s);
    const double k2 = std::log(c.value / b.value) / std::log(c.s / b.s);
    const std::string slopes = "log-log slopes " + fmt(k1) + ", " + fmt(k2);
    if (k1 > 0.05 && k2 > 0.05) {
      set(Verdict::Pass, c.s, "increasing; " + slopes);
    } else if (k1 < 0.05 && k2 < 0.05) {
      set(Verdict::Fail, c.s, "tends to a finite limit; " + slopes);
    } else {
      set(Verdict::Inconclusive, c.s, slopes);
    }
    return out;
  }
  if (c.value < 0.0 && c.value < b.value && b.value < a.value) {
    set(Verdict::Fail, c.s, "negative and decreasing");
    return out;
  }
  set(Verdict::Inconclusive, c.s, "no clear trend over the top rungs");
  return out;
}

Verdict HypothesisReport::overall() const noexcept {
  Verdict v = Verdict::Pass;
  for (const auto& r : results) {
    if (r.verdict == Verdict::Fail) return Verdict::Fail;
    if (r.verdict == Verdict::Inconclusive) v = Verdict::Inconclusive;
  }
  return v;
}

const HypothesisResult* HypothesisReport::find(const std::string& name) const noexcept {
  for (const auto& r : results) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::string HypothesisReport::to_json() const {
  using nlohmann::json;
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json j;
  j["b"] = b;
  j["beta"] = beta;
  j["alpha_star"] = alpha_star ? json{{"lo", alpha_star->first}, {"hi", alpha_star->second}} : json(nullptr);
  j["grid"] = {{"hi", grid_hi}, {"samples", grid_samples}};
  j["theta"] = theta;
  j["overall"] = to_string(overall());
  json hs = json::array();
  for (const auto& r : results) {
    hs.push_back({{"name", r.name},
                  {"verdict", to_string(r.verdict)},
                  {"margin", num(r.margin)},
                  {"witness", r.witness ? num(*r.witness) : json(nullptr)},
                  {"detail", r.detail}});
  }
  j["hypotheses"] = hs;
  json rungs = json::array();
  for (const auto& g : h6_rungs) rungs.push_back({{"s", g.s}, {"value", num(g.value)}});
  j["h6_ladder"] = rungs;
  return j.dump(2);
}

HypothesisReport verify_hypotheses(const PiecewiseNonlinearity& nl, const VerifyOptions& opt) {
  HypothesisReport rep;
  const BaseModel& base = nl.base();
  std::tie(rep.b, rep.beta) = find_b_and_beta(base);
  rep.grid_hi = opt.s_hi_factor * rep.beta;
  rep.grid_samples = opt.grid_samples;
  rep.theta = opt.h6.theta;

  rep.results.push_back(check_H1(nl, rep.grid_hi));
  const SampleGrid g2{rep.beta * (1.0 + 1e-9), rep.grid_hi, opt.grid_samples, true};
  rep.results.push_back(check_H2(base, g2));
  const SampleGrid g3{rep.b * (1.0 + 1e-6), rep.grid_hi, opt.grid_samples, true};
  rep.results.push_back(check_H3(base, g3));

  double alpha_star = rep.b;
  try {
    const auto f1 = compile(base, {});
    const auto br = find_alpha_star(f1, opt.alpha_star_tol, opt.shots);
    rep.alpha_star = std::make_pair(br.alpha_lo, br.alpha_hi);
    alpha_star = br.alpha_lo;
    rep.results.push_back(check_H4(br));
  } catch (const Error& e) {
    HypothesisResult r;
    r.name = "H4";
    r.verdict = Verdict::Inconclusive;
    r.margin = kNaN;
    r.detail = e.what();
    rep.results.push_back(r);
  }
  double s5 = rep.grid_hi;
  if (!nl.spec().blocks.empty()) s5 = std::max(s5, nl.spec().blocks.back().breakpoint + 100.0);
  rep.results.push_back(check_H5(nl, alpha_star, s5));

  if (nl.unbounded()) {
    auto h6 = check_H6(nl, opt.h6);
    rep.h6_rungs = h6.rungs;
    rep.results.push_back(h6.result);
  } else {
    HypothesisResult r;
    r.name = "H6";
    r.verdict = Verdict::Inconclusive;
    r.margin = kNaN;
    r.detail = "H6 is a statement at infinity; gamma is finite";
    rep.results.push_back(r);
  }
  return rep;
}

}  // namespace radshoot

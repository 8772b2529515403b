// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "radshoot/errors.hpp"
#include "radshoot/functionals.hpp"
#include "radshoot/hypotheses.hpp"
#include "radshoot/shooting.hpp"
#include "radshoot/tuning.hpp"

using namespace radshoot;

namespace {

const BaseModel kBase(2.0, 4);
constexpr int kN = 4;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[FAILED: " << what << "] ";
    }
  }
};

const PiecewiseNonlinearity& base_only() {
  static const auto nl = compile(kBase, {});
  return nl;
}

double alpha_star() {
  static const double a = find_alpha_star(base_only(), 1e-10).midpoint();
  return a;
}

std::vector<double> interior(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 1; i < n; ++i) g.push_back(lo + (hi - lo) * i / n);
  return g;
}

void uniqueness(Outcome& o) {
  const auto br = find_alpha_star(base_only(), 1e-9);
  const double as = br.midpoint();
  const Shooter sh(base_only());
  int p_to_n = 0, n_to_p = 0, undetermined = 0;
  Tag prev = Tag::Undetermined;
  for (int j = 1; j <= 200; ++j) {
    const double a = 1.0 + j * (2.0 * as - 1.0) / 200.0;
    const Tag t = sh.classify_retry(a).tag;
    if (t == Tag::Undetermined) ++undetermined;
    if (prev == Tag::P && t == Tag::N) ++p_to_n;
    if (prev == Tag::N && t == Tag::P) ++n_to_p;
    prev = t;
  }
  o.detail << "alpha* = " << as << ", width " << br.width() << ", P->N " << p_to_n << ", N->P " << n_to_p << "; ";
  o.require(p_to_n == 1 && n_to_p == 0 && undetermined == 0, "exactly one P->N transition");
  o.require(br.width() <= 1e-8, "bracket width <= 1e-8");
}

void pohozaev_bound(Outcome& o) {
  ShotControls c;
  c.pohozaev_early_stop = false;
  const Shooter sh(base_only(), c);
  const auto cl = sh.classify(3.0);
  const auto br = find_alpha_star(base_only(), 1e-10);
  o.require(cl.tag == Tag::P, "alpha = 3 in P");
  o.require(br.alpha_lo > 3.0, "alpha* bracket above 3");
  const auto tr = sh.shoot(3.0);
  double worst = -1e300;  // max of E / r^4 beyond r = 0.1
  bool negative = true;
  for (double r : interior(0.0, tr.r_end(), 4000)) {
    const double e = pohozaev_E(base_only(), tr, r);
    negative = negative && e < 0.0;
    if (r > 0.1) worst = std::max(worst, e / std::pow(r, 4));
  }
  o.detail << "tag " << to_string(cl.tag) << ", alpha* lo " << br.alpha_lo << ", max E/r^4 (r > 0.1) " << worst
           << " to r = " << tr.r_end() << "; ";
  o.require(negative, "E < 0 for r > 0");
  o.require(worst < -1e-12, "E < -1e-12 r^4 beyond r = 0.1");
}

void example_two(Outcome& o) {
  const auto nl = compile(kBase, {BlockSpec{PowerBlock{2.0}, 100.0, alpha_star() + 0.1, 0.1}});
  ScanOptions opt;
  opt.alpha_max = 30.0;
  opt.expected_count = 3;
  const auto scan = find_ground_states(Shooter(nl), opt);
  double widest = 0.0, highest = 0.0;
  for (const auto& b : scan.brackets) {
    widest = std::max(widest, b.width());
    highest = std::max(highest, b.midpoint());
  }
  o.detail << scan.brackets.size() << " brackets, largest midpoint " << highest << ", widest " << widest << "; ";
  o.require(scan.brackets.size() >= 3, ">= 3 brackets");
  o.require(highest < 30.0, "midpoints < 30");
  o.require(widest <= 1e-8, "widths <= 1e-8");
}

void example_four(Outcome& o) {
  const std::vector<BlockKind> kinds(4, PowerBlock{2.0});
  auto chain = place_breakpoints(kBase, kinds, {10.0, 0.1, 10.0, 0.1}, 0.1, alpha_star() + 0.1);
  const auto nl = chain.compile();
  const Shooter sh(nl);
  bool alternates = true;
  for (const auto& b : chain.blocks) {
    const Tag t = sh.classify_retry(b.alpha).tag;
    alternates = alternates && t == (b.i % 2 == 0 ? Tag::P : Tag::N);
    o.detail << "alpha_" << b.i << " = " << b.alpha << " " << to_string(t) << ", ";
  }
  const auto scan = verify_chain(chain);
  int between = 0;
  for (std::size_t j = 1; j < chain.blocks.size(); ++j) {
    const double lo = chain.blocks[j - 1].alpha, hi = chain.blocks[j].alpha;
    between += std::any_of(scan.brackets.begin(), scan.brackets.end(),
                           [&](const GroundStateBracket& b) { return b.alpha_lo >= lo && b.alpha_hi <= hi; });
  }
  o.detail << between << " alternations bracketed; ";
  o.require(alternates, "tags alternate P even / N odd");
  o.require(between >= 4, ">= 4 brackets between alternations");
}

void tuned_chain(Outcome& o) {
  const std::vector<BlockKind> kinds(3, PowerBlock{2.0});
  const auto chain = tune_chain(kBase, kinds, 4);
  const double as = chain.alpha_star();
  bool bounds = true;
  for (std::size_t j = 0; j < chain.blocks.size(); ++j) {
    const auto& b = chain.blocks[j];
    bounds = bounds && b.alpha <= as + chain.eps0 * std::pow(3.0 * kN, b.i);
    if (j > 0) bounds = bounds && chain.blocks[j - 1].alpha + chain.blocks[j - 1].eps <= b.alpha;
    bounds = bounds && b.eps <= chain.eps0;
  }
  std::string why;
  const bool claim = chain.claim_holds(&why);
  o.detail << "eps0 " << chain.eps0 << ", " << chain.bracket_count << " brackets; ";
  o.require(bounds && claim, "chain bounds " + why);
  o.require(chain.bracket_count >= 4, ">= 4 brackets");
}

void h6_discrimination(Outcome& o) {
  const double a1 = alpha_star() + 0.1;
  const auto q2 = compile(kBase, {BlockSpec{PowerBlock{2.0}, 100.0, a1, 0.1}});
  const auto q5 = compile(kBase, {BlockSpec{PowerBlock{5.0}, 1.0, a1, 0.1}});
  for (double theta : {0.3, 0.5, 0.9}) {
    H6Options opt;
    opt.theta = theta;
    const auto v2 = check_H6(q2, opt).result.verdict;
    const auto v5 = check_H6(q5, opt).result.verdict;
    o.detail << "theta " << theta << ": q=2 " << to_string(v2) << ", q=5 " << to_string(v5) << "; ";
    o.require(v2 == Verdict::Pass, "q = 2 passes");
    o.require(v5 == Verdict::Fail, "q = 5 fails");
  }
}

void functional_invariants(Outcome& o) {
  const auto& nl = base_only();
  const Shooter sh(nl);
  ShotControls tight;
  tight.integration.rel_tol = 1e-12;
  tight.integration.abs_tol = 1e-14;
  const Shooter fine_shooter(nl, tight);
  double p_start = 0.0, worst_drop = 0.0, worst_rel = 0.0;
  for (double a : {1.2, 2.0, 4.0, 8.0, 8.6, 8.8, 12.0, 25.0}) {
    const auto tr = sh.shoot(a);
    const MonotoneBranch br(tr);
    p_start = std::max(p_start, std::abs(erbe_tang_P(nl, br, a)));
    // P is singular at b; each side separately.
    for (auto [lo, hi] : {std::pair{br.s_min(), std::min(1.0, br.s_max())},
                          std::pair{std::max(1.0, br.s_min()), br.s_max()}}) {
      if (hi - lo < 1e-2) continue;
      const auto g = interior(lo + 1e-3, hi - 1e-3, 400);
      double prev = erbe_tang_P(nl, br, g.front());
      for (std::size_t i = 1; i < g.size(); ++i) {
        const double cur = erbe_tang_P(nl, br, g[i]);
        worst_drop = std::max(worst_drop, prev - cur);  // s increases, so P should not fall
        prev = cur;
      }
    }
    // The finite-difference oracle: five-point stencil on a tighter solve.
    const auto fine = fine_shooter.shoot(a);
    auto E = [&](double r) { return pohozaev_E(nl, fine, r); };
    for (double r : interior(0.05, fine.r_end() - 0.05, 40)) {
      const double h = 1e-3;
      const double fd = (E(r - 2 * h) - 8 * E(r - h) + 8 * E(r + h) - E(r + 2 * h)) / (12 * h);
      const double ex = pohozaev_E_prime(nl, fine, r);
      worst_rel = std::max(worst_rel, std::abs(ex - fd) / std::abs(ex));
    }
  }
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(1.01, alpha_star() - 1e-3);
  int respected = 0, total = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto tr = sh.shoot(U(rng));
    const MonotoneBranch br(tr);
    for (double s : interior(br.s_min(), br.s_max(), 100)) {
      ++total;
      const double rad = w_radicand(nl, br, s);
      try {
        const double w = w_functional(nl, br, s);
        respected += rad >= 0.0 && w >= 0.0 && !std::isnan(w);
      } catch (const NegativeRadicand&) {
        respected += rad < 0.0;
      }
    }
  }
  o.detail << "max |P(alpha)| " << p_start << ", worst P drop " << worst_drop << ", worst E' relative error "
           << worst_rel << ", W radicand respected " << respected << "/" << total << "; ";
  o.require(p_start == 0.0, "P(alpha) = 0");
  o.require(worst_drop <= 1e-8, "P nondecreasing within 1e-8");
  o.require(worst_rel <= 1e-6, "E' vs finite differences within 1e-6");
  o.require(respected == total, "W radicand nonnegativity respected");
}

void crossing_sandwich(Outcome& o) {
  const double c = 2.5;
  const auto cnl = compile(kBase, {BlockSpec{AffineSineBlock{c, 0.0, 0.0}, 1.0, 9.0, 0.1}});
  double worst_exact = 0.0;
  for (double delta : {0.01, 0.3, 1.7}) {
    const auto x = crossing_moment(cnl, 12.0, 12.0 - delta);
    worst_exact = std::max(worst_exact, std::abs(x.r / std::sqrt(2.0 * kN * delta / c) - 1.0));
    worst_exact = std::max(worst_exact, std::abs(x.momentum / (2.0 * delta) - 1.0));
  }
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int held = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    BlockSpec blk;
    if (trial % 2 == 0) {
      blk.kind = PowerBlock{0.5 + 2.5 * U(rng)};
    } else {
      blk.kind = AffineSineBlock{1.5 + 2.0 * U(rng), U(rng), 4.0 * U(rng)};
    }
    blk.amplitude_sq = std::pow(10.0, -1.0 + 2.0 * U(rng));
    blk.breakpoint = 9.0;
    blk.bridge_width = 0.1;
    const auto nl = compile(kBase, {blk});
    const double alpha = 9.5 + 10.0 * U(rng);
    const double delta = (alpha - 9.2) * (0.01 + 0.98 * U(rng));
    const double level = alpha - delta;
    double gmin = 1e300, gmax = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      const double g = eval_f(nl, level + delta * i / 4000.0);
      gmin = std::min(gmin, g);
      gmax = std::max(gmax, g);
    }
    const auto x = crossing_moment(nl, alpha, level);
    const double slack = 1e-8;
    held += x.r >= std::sqrt(2.0 * kN * delta / gmax) * (1 - slack) &&
            x.r <= std::sqrt(2.0 * kN * delta / gmin) * (1 + slack) &&
            x.momentum >= 2.0 * delta * gmin / gmax * (1 - slack) &&
            x.momentum <= 2.0 * delta * gmax / gmin * (1 + slack);
  }
  o.detail << "constant block relative error " << worst_exact << ", sandwich held " << held << "/1000; ";
  o.require(worst_exact <= 1e-8, "constant block exact to 1e-8");
  o.require(held == 1000, "both sandwich bounds on 1000 cases");
}

void integrator_order(Outcome& o) {
  // Constant source c above 9.1; exact solution through an interior point
  // (from r = 0 the series start is already exact for constant f).
  const double c = 3.0, r0 = 0.1, alpha = 20.0, vbar = -0.4, r1 = 2.0;
  const auto nl = compile(kBase, {BlockSpec{AffineSineBlock{c, 0.0, 0.0}, 1.0, 9.0, 0.1}});
  const double K = std::pow(r0, kN - 1) * vbar + c * std::pow(r0, kN) / kN;
  const double u1 = alpha + K / (2.0 - kN) * (std::pow(r1, 2 - kN) - std::pow(r0, 2 - kN)) - c * (r1 * r1 - r0 * r0) / (2.0 * kN);
  const double v1 = K * std::pow(r1, 1 - kN) - c * r1 / kN;
  std::vector<double> x, y;
  for (double tol : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10}) {
    IntegrationControls ctl;
    ctl.rel_tol = tol;
    ctl.abs_tol = tol;
    ctl.r_max = r1;
    const auto tr = integrate(nl, {r0, alpha, vbar}, {}, ctl);
    x.push_back(std::log(static_cast<double>(tr.samples().size() - 1)));
    y.push_back(std::log(std::hypot(tr.back().u - u1, tr.back().v - v1)));
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double order = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
  o.detail << "observed order " << order << "; ";
  o.require(order >= 4.0, "order >= 4");
}

void singular_constant_check(Outcome& o) {
  const double c45 = singular_constant(4, 5.0);
  double worst = 0.0;
  for (int j = 0; j <= 200; ++j) {
    const double r = 0.1 * std::pow(100.0, j / 200.0);
    worst = std::max(worst, std::abs(singular_residual(4, 5.0, 1.0, r)));
  }
  o.detail << "C(4,5) = " << c45 << ", max residual " << worst << "; ";
  o.require(c45 == 0.5, "C(4,5) = 0.5");
  o.require(worst < 1e-10, "residual < 1e-10 on [0.1, 10]");
}

struct Criterion {
  int id;
  const char* title;
  double limit_s;  // 0: no runtime limit
  std::function<void(Outcome&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "uniqueness structure of the base model", 30.0, uniqueness},
      {2, "Pohozaev bound at alpha = 3", 0.0, pohozaev_bound},
      {3, "Example 2: three ground states below 30", 120.0, example_two},
      {4, "Example 4: five-block alternation", 300.0, example_four},
      {5, "tuned chain k = 4", 600.0, tuned_chain},
      {6, "H6 discrimination q = 2 / q = 5", 0.0, h6_discrimination},
      {7, "functional invariants", 0.0, functional_invariants},
      {8, "crossing-moment sandwich", 0.0, crossing_sandwich},
      {9, "integrator order", 0.0, integrator_order},
      {10, "singular-solution constant", 0.0, singular_constant_check},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what() << "; ";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0.0 && secs > c.limit_s) {
      o.pass = false;
      o.detail << "[FAILED: runtime limit " << c.limit_s << " s] ";
    }
    failed += !o.pass;
    std::printf("criterion %2d %s  %s  (%s%.2f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.title, o.detail.str().c_str(),
                secs);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

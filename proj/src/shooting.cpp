#include "radshoot/shooting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <sstream>
#include <thread>

#include <boost/math/tools/roots.hpp>

#include "radshoot/errors.hpp"

namespace radshoot {

const char* to_string(Tag t) noexcept {
  switch (t) {
    case Tag::N: return "N";
    case Tag::P: return "P";
    case Tag::Undetermined: return "U";
  }
  return "?";
}

const Crossing* Classification::crossing(double level) const noexcept {
  for (const auto& c : crossings) {
    if (c.level == level) return &c;
  }
  return nullptr;
}

namespace {

constexpr std::size_t kZeroEvent = 0;
constexpr std::size_t kTurnEvent = 1;
constexpr std::size_t kFirstLevel = 2;

double first_q_zero_below(const PiecewiseNonlinearity& nl, double cap) {
  // Q < 0 near 0 for every admissible base model; walk up to the first sign change.
  const int n = 512;
  double prev = cap * 1e-6;
  for (int i = 1; i <= n; ++i) {
    const double s = cap * i / n;
    if (nl.Q(s) >= 0.0) {
      boost::uintmax_t iters = 100;
      auto r = boost::math::tools::toms748_solve([&](double x) { return nl.Q(x); }, prev, s,
                                                 boost::math::tools::eps_tolerance<double>(50), iters);
      return r.first;
    }
    prev = s;
  }
  return cap;
}

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next++) < count;) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

Shooter::Shooter(const PiecewiseNonlinearity& nl, ShotControls controls)
    : nl_(&nl), controls_(std::move(controls)) {
  ceiling_ = first_q_zero_below(nl, std::min(nl.beta(), nl.gamma()));
}

std::vector<EventSpec> Shooter::events(const ShotControls& c) const {
  std::vector<EventSpec> ev;
  ev.push_back({EventKind::UCrossesZero, 0.0, Direction::Down, true});
  ev.push_back({EventKind::VCrossesZero, 0.0, Direction::Up, true});
  for (double level : c.levels) ev.push_back({EventKind::UCrossesLevel, level, Direction::Down, false});
  return ev;
}

Classification Shooter::run(const RadialState& start, double alpha, const ShotControls& c) const {
  const int n = nl_->dimension();
  IntegrationControls ic = c.integration;
  const double ceiling = ceiling_;
  const auto& nl = *nl_;
  ic.stop_when = [&](const RadialState& s) {
    if (!(s.u > 0.0)) return false;
    if (s.u < c.decay_floor && s.r >= c.r_decay) return true;
    if (c.pohozaev_early_stop && s.u < ceiling && s.v < 0.0 && s.r > 0.0) {
      const double E = std::pow(s.r, n) * (s.v * s.v + 2.0 * nl.F(s.u)) +
                       (n - 2.0) * std::pow(s.r, n - 1) * s.v * s.u;
      return E < 0.0;
    }
    return false;
  };
  const auto ev = events(c);
  const Trajectory tr = integrate(nl, start, ev, ic);

  Classification cl;
  cl.alpha = alpha;
  cl.termination = tr.termination();
  cl.terminal = tr.back();
  cl.R = tr.r_end();
  for (std::size_t i = 0; i < c.levels.size(); ++i) {
    Crossing x;
    x.level = c.levels[i];
    if (const auto* e = tr.first_event(kFirstLevel + i)) {
      x.reached = true;
      x.r = e->state.r;
      x.momentum = e->state.r * std::abs(e->state.v);
    }
    cl.crossings.push_back(x);
  }

  const RadialState& s = cl.terminal;
  const double tie = 1e-9 * (1.0 + std::abs(s.u));
  switch (tr.termination()) {
    case Termination::Event: {
      const auto& last = tr.events().back();
      if (last.index == kZeroEvent) {
        if (s.v < -tie) {
          cl.tag = Tag::N;
          cl.reason = "zero-crossing";
        } else {
          cl.reason = "tie";
        }
      } else if (last.index == kTurnEvent) {
        if (s.u > 0.0) {
          cl.tag = Tag::P;
          cl.reason = "turning-point";
        } else {
          cl.reason = "tie";
        }
      }
      break;
    }
    case Termination::Predicate:
      cl.tag = Tag::P;
      cl.reason = s.u < c.decay_floor ? "decay" : "pohozaev";
      break;
    default:
      cl.reason = to_string(tr.termination());
      break;
  }
  return cl;
}

Classification Shooter::classify(double alpha) const {
  if (!(alpha > nl_->b())) {
    std::ostringstream os;
    os << "classification needs alpha > b = " << nl_->b() << ", got " << alpha;
    throw SpecError(os.str());
  }
  return run({0.0, alpha, 0.0}, alpha, controls_);
}

Classification Shooter::classify_from(const RadialState& start) const {
  if (!(start.u > 0.0)) throw SpecError("restart state needs u > 0");
  return run(start, start.u, controls_);
}

Classification Shooter::classify_retry(double alpha) const {
  Classification cl = classify(alpha);
  if (cl.tag != Tag::Undetermined) return cl;
  ShotControls wide = controls_;
  wide.integration.r_max *= 10.0;
  wide.integration.max_steps *= 10;
  return run({0.0, alpha, 0.0}, alpha, wide);
}

Trajectory Shooter::shoot(double alpha) const {
  const auto ev = events(controls_);
  return integrate(*nl_, {0.0, alpha, 0.0}, ev, controls_.integration);
}

Crossing Shooter::crossing_moment(double alpha, double level) const {
  if (!(alpha > level)) throw SpecError("crossing level must lie below alpha");
  const std::vector<EventSpec> ev{
      {EventKind::UCrossesLevel, level, Direction::Down, true},
      {EventKind::VCrossesZero, 0.0, Direction::Up, true},
  };
  const Trajectory tr = integrate(*nl_, {0.0, alpha, 0.0}, ev, controls_.integration);
  const auto* hit = tr.first_event(0);
  if (!hit) {
    std::ostringstream os;
    os << "shot from alpha = " << alpha << " never reaches level " << level << " ("
       << to_string(tr.termination()) << ")";
    throw LevelNotReached(os.str());
  }
  return {level, true, hit->state.r, hit->state.r * std::abs(hit->state.v)};
}

Classification classify(const PiecewiseNonlinearity& nl, double alpha, const ShotControls& controls) {
  return Shooter(nl, controls).classify(alpha);
}

Crossing crossing_moment(const PiecewiseNonlinearity& nl, double alpha, double level,
                         const ShotControls& controls) {
  return Shooter(nl, controls).crossing_moment(alpha, level);
}

GroundStateBracket bisect_boundary(const Shooter& shooter, double a, double b, double tol) {
  if (!(a < b)) throw SpecError("bisection needs a < b");
  if (!(tol > 0.0)) throw SpecError("bisection tolerance must be positive");
  GroundStateBracket br;
  br.alpha_lo = a;
  br.alpha_hi = b;
  br.shot_lo = shooter.classify_retry(a);
  br.shot_hi = shooter.classify_retry(b);
  for (const auto* s : {&br.shot_lo, &br.shot_hi}) {
    if (s->tag == Tag::Undetermined) throw UndeterminedShot("undetermined bisection seed", s->alpha);
  }
  if (br.shot_lo.tag == br.shot_hi.tag) throw SpecError("bisection seeds have the same tag");
  while (br.alpha_hi - br.alpha_lo >= tol) {
    const double mid = 0.5 * (br.alpha_lo + br.alpha_hi);
    if (mid <= br.alpha_lo || mid >= br.alpha_hi) break;
    Classification cl = shooter.classify_retry(mid);
    if (cl.tag == Tag::Undetermined) {
      std::ostringstream os;
      os << "undetermined shot at alpha = " << mid << " (" << cl.reason << ")";
      throw UndeterminedShot(os.str(), mid);
    }
    if (cl.tag == br.shot_lo.tag) {
      br.alpha_lo = mid;
      br.shot_lo = std::move(cl);
    } else {
      br.alpha_hi = mid;
      br.shot_hi = std::move(cl);
    }
  }
  br.tag_lo = br.shot_lo.tag;
  br.tag_hi = br.shot_hi.tag;
  return br;
}

GroundStateBracket find_alpha_star(const PiecewiseNonlinearity& nl, double seed_p, double seed_n,
                                   double tol, const ShotControls& controls) {
  const Shooter shooter(nl, controls);
  const Tag tp = shooter.classify_retry(seed_p).tag;
  const Tag tn = shooter.classify_retry(seed_n).tag;
  if (tp != Tag::P || tn != Tag::N) {
    std::ostringstream os;
    os << "alpha* seeds classify as " << to_string(tp) << " and " << to_string(tn)
       << ", expected P and N";
    throw SpecError(os.str());
  }
  return bisect_boundary(shooter, std::min(seed_p, seed_n), std::max(seed_p, seed_n), tol);
}

GroundStateBracket find_alpha_star(const PiecewiseNonlinearity& nl, double tol,
                                   const ShotControls& controls) {
  const Shooter shooter(nl, controls);
  const double seed_p = 0.5 * (nl.b() + nl.beta());
  double seed_n = 2.0 * nl.beta();
  for (int i = 0; i < 60 && seed_n < nl.gamma(); ++i, seed_n *= 2.0) {
    if (shooter.classify_retry(seed_n).tag == Tag::N) {
      return find_alpha_star(nl, seed_p, seed_n, tol, controls);
    }
  }
  throw SpecError("no N seed found below gamma");
}

ScanResult find_ground_states(const Shooter& shooter, const ScanOptions& opt) {
  const PiecewiseNonlinearity& nl = shooter.nonlinearity();
  const double b = nl.b();
  if (!(opt.alpha_max > b)) throw SpecError("scan range must extend above b");
  if (!(opt.alpha_max < nl.gamma())) throw SpecError("scan range must stay below gamma");
  double step = opt.step > 0.0 ? opt.step : (opt.alpha_max - b) / 400.0;

  ScanResult result;
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> grid;
    const auto n = static_cast<std::size_t>(std::floor((opt.alpha_max - b) / step + 1e-9));
    for (std::size_t j = 1; j <= n; ++j) grid.push_back(b + static_cast<double>(j) * step);
    if (grid.empty() || grid.back() < opt.alpha_max) grid.push_back(opt.alpha_max);
    for (double a : opt.anchors) {
      if (a > b && a <= opt.alpha_max) grid.push_back(a);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    result.points.assign(grid.size(), {});
    parallel_for(grid.size(), opt.threads, [&](std::size_t i) {
      result.points[i] = {grid[i], shooter.classify_retry(grid[i])};
    });

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t prev = grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (result.points[i].shot.tag == Tag::Undetermined) continue;
      if (prev < grid.size() && result.points[prev].shot.tag != result.points[i].shot.tag) {
        pairs.emplace_back(prev, i);
      }
      prev = i;
    }
    result.brackets.assign(pairs.size(), {});
    parallel_for(pairs.size(), opt.threads, [&](std::size_t k) {
      result.brackets[k] =
          bisect_boundary(shooter, grid[pairs[k].first], grid[pairs[k].second], opt.tol);
    });

    if (pass == 0 && opt.expected_count && result.brackets.size() < *opt.expected_count) {
      step *= 0.5;
      result.rescanned = true;
      continue;
    }
    break;
  }
  return result;
}

void write_scan_csv(std::ostream& os, const ScanResult& scan) {
  const auto old = os.precision(17);
  os << "alpha,tag,R,r_star,momentum\n";
  for (const auto& p : scan.points) {
    os << p.alpha << ',' << to_string(p.shot.tag) << ',' << p.shot.R << ',';
    if (!p.shot.crossings.empty() && p.shot.crossings.front().reached) {
      os << p.shot.crossings.front().r << ',' << p.shot.crossings.front().momentum;
    } else {
      os << ',';
    }
    os << '\n';
  }
  os.precision(old);
}

}  // namespace radshoot

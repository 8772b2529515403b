#include "radshoot/odeint.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "radshoot/errors.hpp"

namespace radshoot {

const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::Event: return "event";
    case Termination::RMax: return "r_max";
    case Termination::StepFailure: return "step-failure";
    case Termination::DomainExit: return "domain-exit";
    case Termination::Predicate: return "early-stop";
  }
  return "?";
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

using Vec = std::array<double, 2>;

struct Rhs {
  const PiecewiseNonlinearity& nl;
  double nm1;
  Vec operator()(double r, const Vec& y) const noexcept {
    return {y[1], -nm1 / r * y[1] - nl.f_extended(y[0])};
  }
};

double event_value(const EventSpec& e, const RadialState& s) noexcept {
  switch (e.kind) {
    case EventKind::UCrossesLevel: return s.u - e.level;
    case EventKind::VCrossesZero: return s.v;
    case EventKind::UCrossesZero: return s.u;
  }
  return 0.0;
}

bool crosses(Direction d, double g0, double g1) noexcept {
  const bool up = g0 < 0.0 && g1 >= 0.0;
  const bool down = g0 > 0.0 && g1 <= 0.0;
  switch (d) {
    case Direction::Up: return up;
    case Direction::Down: return down;
    case Direction::Any: return up || down;
  }
  return false;
}

// Root of g on [a, b] given g(a), g(b) of opposite sign (or g(b) == 0).
template <class G>
double locate(G g, double a, double b, double ga, double gb) {
  if (gb == 0.0) return b;
  if (ga == 0.0) return a;
  boost::uintmax_t iters = 200;
  const auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 2);
  auto br = boost::math::tools::toms748_solve(g, a, b, ga, gb, tol, iters);
  const double fa = std::abs(g(br.first));
  const double fb = std::abs(g(br.second));
  return fa <= fb ? br.first : br.second;
}

}  // namespace

RadialState Trajectory::eval_piece(std::size_t i, double r) const noexcept {
  const Piece& p = pieces_[i];
  if (p.series) {
    return {r, p.c[0][0] + p.c[0][1] * r * r, p.c[1][1] * r};
  }
  const double th = (r - p.r0) / p.h;
  const double th1 = 1.0 - th;
  double y[2];
  for (int k = 0; k < 2; ++k) {
    const double* c = p.c[k];
    y[k] = c[0] + th * (c[1] + th1 * (c[2] + th * (c[3] + th1 * c[4])));
  }
  return {r, y[0], y[1]};
}

RadialState Trajectory::at(double r) const {
  if (samples_.empty() || r < r_begin() || r > r_end()) {
    std::ostringstream os;
    os << "r = " << r << " outside trajectory range";
    throw DomainError(os.str(), r);
  }
  if (pieces_.empty()) return samples_.front();
  auto it = std::upper_bound(samples_.begin(), samples_.end(), r,
                             [](double v, const RadialState& s) { return v < s.r; });
  std::size_t i = it == samples_.begin() ? 0 : static_cast<std::size_t>(it - samples_.begin()) - 1;
  if (i >= pieces_.size()) return samples_.back();
  if (r == samples_[i].r) return samples_[i];
  return eval_piece(i, r);
}

const ResolvedEvent* Trajectory::first_event(std::size_t index) const noexcept {
  for (const auto& e : events_) {
    if (e.index == index) return &e;
  }
  return nullptr;
}

void Trajectory::write_csv(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "r,u,v\n";
  for (const auto& s : samples_) os << s.r << ',' << s.u << ',' << s.v << '\n';
  os.precision(old);
}

Trajectory integrate(const PiecewiseNonlinearity& nl, RadialState start,
                     std::span<const EventSpec> events, const IntegrationControls& ctl) {
  if (!(ctl.rel_tol > 0.0) || !(ctl.abs_tol > 0.0)) throw SpecError("tolerances must be positive");
  if (!(start.r >= 0.0) || !std::isfinite(start.r) || !std::isfinite(start.u) ||
      !std::isfinite(start.v)) {
    throw SpecError("start state must be finite with r >= 0");
  }
  if (start.r == 0.0 && start.v != 0.0) throw SpecError("a start at r = 0 requires u'(0) = 0");

  const int n = nl.dimension();
  const Rhs rhs{nl, static_cast<double>(n - 1)};
  const double gamma = nl.gamma();
  Trajectory tr;
  tr.samples_.push_back(start);

  double h = 0.0;
  if (start.r == 0.0) {
    const double fa = nl.f_extended(start.u);
    double h0 = 1e-3;
    if (fa != 0.0) h0 = std::min(h0, std::sqrt(2.0 * n * ctl.abs_tol / std::abs(fa)));
    h0 = std::min(h0, ctl.r_max);
    Trajectory::Piece piece;
    piece.series = true;
    piece.h = h0;
    piece.c[0][0] = start.u;
    piece.c[0][1] = -fa / (2.0 * n);
    piece.c[1][1] = -fa / n;
    tr.pieces_.push_back(piece);
    tr.samples_.push_back(tr.eval_piece(0, h0));
    h = h0;
  } else {
    h = std::min(1e-3 * std::max(1.0, start.r), ctl.r_max - start.r);
  }

  // Event and exit bookkeeping for the piece ending at samples_.back().
  auto finish_piece = [&](std::size_t pi) -> bool {
    const RadialState a = tr.samples_[pi];
    const RadialState b = tr.samples_[pi + 1];
    struct Hit {
      double r;
      std::size_t idx;
    };
    std::vector<Hit> hits;
    for (std::size_t k = 0; k < events.size(); ++k) {
      const EventSpec& e = events[k];
      const double g0 = event_value(e, a);
      const double g1 = event_value(e, b);
      if (!crosses(e.direction, g0, g1)) continue;
      auto g = [&](double r) { return event_value(e, tr.eval_piece(pi, r)); };
      hits.push_back({locate(g, a.r, b.r, g0, g1), k});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& x, const Hit& y) { return x.r < y.r; });
    for (const Hit& hit : hits) {
      const EventSpec& e = events[hit.idx];
      RadialState st = hit.r == b.r ? b : tr.eval_piece(pi, hit.r);
      tr.events_.push_back({hit.idx, e.kind, e.level, st});
      if (e.terminal) {
        tr.samples_.back() = st;
        tr.termination_ = Termination::Event;
        return true;
      }
    }
    // Leaving [0, gamma).
    if (b.u < 0.0 || b.u >= gamma) {
      const double edge = b.u < 0.0 ? 0.0 : gamma;
      auto g = [&](double r) { return tr.eval_piece(pi, r).u - edge; };
      const double re = locate(g, a.r, b.r, a.u - edge, b.u - edge);
      tr.samples_.back() = tr.eval_piece(pi, re);
      tr.termination_ = Termination::DomainExit;
      return true;
    }
    if (ctl.stop_when && ctl.stop_when(b)) {
      tr.termination_ = Termination::Predicate;
      return true;
    }
    return false;
  };

  if (tr.pieces_.size() == 1 && finish_piece(0)) return tr;

  const auto junctions = nl.junctions();
  Vec y{tr.samples_.back().u, tr.samples_.back().v};
  double r = tr.samples_.back().r;
  Vec k1 = rhs(r, y);
  double facmax = 10.0;
  bool snapped = false;
  std::size_t steps = 0;

  while (true) {
    if (r >= ctl.r_max) {
      tr.termination_ = Termination::RMax;
      return tr;
    }
    if (++steps > ctl.max_steps) {
      tr.termination_ = Termination::StepFailure;
      return tr;
    }
    h = std::min(h, ctl.r_max - r);
    if (!(h > 1e-14 * r) || !std::isfinite(h)) {
      tr.termination_ = Termination::StepFailure;
      return tr;
    }

    Vec y2, y3, y4, y5, y6, y7, k2, k3, k4, k5, k6, k7;
    for (int i = 0; i < 2; ++i) y2[i] = y[i] + h * a21 * k1[i];
    k2 = rhs(r + c2 * h, y2);
    for (int i = 0; i < 2; ++i) y3[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    k3 = rhs(r + c3 * h, y3);
    for (int i = 0; i < 2; ++i) y4[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    k4 = rhs(r + c4 * h, y4);
    for (int i = 0; i < 2; ++i)
      y5[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    k5 = rhs(r + c5 * h, y5);
    for (int i = 0; i < 2; ++i)
      y6[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    k6 = rhs(r + h, y6);
    for (int i = 0; i < 2; ++i)
      y7[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    k7 = rhs(r + h, y7);

    double err = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double e =
          h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = ctl.abs_tol + ctl.rel_tol * std::max(std::abs(y[i]), std::abs(y7[i]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(0.5 * err);
    if (!std::isfinite(err)) err = 1e10;

    if (err > 1.0) {
      ++tr.rejected_;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      facmax = 1.0;
      continue;
    }

    Trajectory::Piece piece;
    piece.r0 = r;
    piece.h = h;
    for (int i = 0; i < 2; ++i) {
      const double dy = y7[i] - y[i];
      const double bspl = h * k1[i] - dy;
      piece.c[i][0] = y[i];
      piece.c[i][1] = dy;
      piece.c[i][2] = bspl;
      piece.c[i][3] = dy - h * k7[i] - bspl;
      piece.c[i][4] =
          h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }

    // Shorten the step so that it ends on the first junction crossed.
    if (ctl.snap_to_junctions && !snapped) {
      double r_snap = std::numeric_limits<double>::infinity();
      for (double lvl : junctions) {
        const double g0 = y[0] - lvl;
        const double g1 = y7[0] - lvl;
        if (!(g0 * g1 < 0.0) || std::abs(g0) <= 1e-12 * (1.0 + std::abs(lvl))) continue;
        auto g = [&](double rr) {
          const double th = (rr - piece.r0) / piece.h, th1 = 1.0 - th;
          const double* c = piece.c[0];
          return c[0] + th * (c[1] + th1 * (c[2] + th * (c[3] + th1 * c[4]))) - lvl;
        };
        r_snap = std::min(r_snap, locate(g, r, r + h, g0, g1));
      }
      if (r_snap < r + h && r_snap - r > 1e-6 * h) {
        h = r_snap - r;
        snapped = true;
        continue;
      }
    }
    snapped = false;

    const double h_used = h;
    h = h_used * std::min(facmax, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
    facmax = 10.0;

    r += h_used;
    y = y7;
    k1 = k7;
    tr.pieces_.push_back(piece);
    tr.samples_.push_back({r, y[0], y[1]});
    if (finish_piece(tr.pieces_.size() - 1)) return tr;
  }
}

}  // namespace radshoot

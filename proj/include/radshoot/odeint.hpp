#pragma once

// Adaptive integration of the radial IVP
//   u'' + (N-1)/r u' + f(u) = 0,  u(r0) = alpha,  u'(r0) = alpha_bar
// with a series start at r = 0, dense output and event location.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "radshoot/nonlinearity.hpp"

namespace radshoot {

struct RadialState {
  double r = 0.0;
  double u = 0.0;
  double v = 0.0;  // u'(r)
};

enum class EventKind { UCrossesLevel, VCrossesZero, UCrossesZero };
enum class Direction { Down, Up, Any };

struct EventSpec {
  EventKind kind = EventKind::UCrossesZero;
  double level = 0.0;  // only used by UCrossesLevel
  Direction direction = Direction::Any;
  bool terminal = false;  // member of the first-stop set
};

struct IntegrationControls {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double r_max = 1e3;
  std::size_t max_steps = 2'000'000;
  /// Force a step endpoint at every junction level of f.
  bool snap_to_junctions = true;
  /// Checked after every accepted step; returning true stops integration.
  std::function<bool(const RadialState&)> stop_when;
};

enum class Termination { Event, RMax, StepFailure, DomainExit, Predicate };

const char* to_string(Termination t) noexcept;

struct ResolvedEvent {
  std::size_t index = 0;  // position in the event list passed to integrate
  EventKind kind = EventKind::UCrossesZero;
  double level = 0.0;
  RadialState state;
};

/// Accepted step endpoints plus the per-step dense interpolants.
class Trajectory {
 public:
  std::span<const RadialState> samples() const noexcept { return samples_; }
  std::span<const ResolvedEvent> events() const noexcept { return events_; }
  Termination termination() const noexcept { return termination_; }
  std::size_t rejected_steps() const noexcept { return rejected_; }

  double r_begin() const noexcept { return samples_.front().r; }
  double r_end() const noexcept { return samples_.back().r; }
  const RadialState& back() const noexcept { return samples_.back(); }

  /// Interpolated state; throws DomainError outside [r_begin, r_end].
  RadialState at(double r) const;
  /// First resolved event with the given list index, or nullptr.
  const ResolvedEvent* first_event(std::size_t index) const noexcept;

  /// CSV with header "r,u,v", one row per sample.
  void write_csv(std::ostream& os) const;

 private:
  friend Trajectory integrate(const PiecewiseNonlinearity&, RadialState, std::span<const EventSpec>,
                              const IntegrationControls&);

  struct Piece {
    bool series = false;
    double r0 = 0.0;
    double h = 0.0;
    // series: u = c[0][0] + c[0][1] r^2, v = c[1][1] r
    // dense:  y(theta) = c0 + theta (c1 + (1-theta)(c2 + theta (c3 + (1-theta) c4)))
    double c[2][5] = {};
  };

  RadialState eval_piece(std::size_t piece, double r) const noexcept;

  std::vector<RadialState> samples_;
  std::vector<Piece> pieces_;  // pieces_[i] spans samples_[i] .. samples_[i+1]
  std::vector<ResolvedEvent> events_;
  Termination termination_ = Termination::RMax;
  std::size_t rejected_ = 0;
};

/// Integrates from `start`. When start.r == 0 the regular condition
/// start.v == 0 is required and the first step uses the series
/// u = alpha - f(alpha) r^2/(2N), v = -f(alpha) r / N.
Trajectory integrate(const PiecewiseNonlinearity& nl, RadialState start,
                     std::span<const EventSpec> events, const IntegrationControls& controls);

}  // namespace radshoot

#pragma once

// Classification of initial values into the sets N and P, the exit radius
// R(alpha), crossing diagnostics, and bisection for ground states.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "radshoot/nonlinearity.hpp"
#include "radshoot/odeint.hpp"

namespace radshoot {

enum class Tag { N, P, Undetermined };

const char* to_string(Tag t) noexcept;

struct ShotControls {
  IntegrationControls integration;
  /// P by decay: 0 < u < decay_floor with r >= r_decay.
  double decay_floor = 1e-8;
  double r_decay = 50.0;
  /// P early when 0 < u < min(beta, first zero of Q), u' < 0 and E(r) < 0.
  bool pohozaev_early_stop = true;
  /// Levels whose first down-crossing is recorded (for instance alpha*).
  std::vector<double> levels;
};

struct Crossing {
  double level = 0.0;
  bool reached = false;
  double r = 0.0;
  double momentum = 0.0;  // r |u'(r)|
};

struct Classification {
  Tag tag = Tag::Undetermined;
  double alpha = 0.0;
  double R = 0.0;  // first stop radius
  RadialState terminal;
  Termination termination = Termination::RMax;
  /// "zero-crossing", "turning-point", "pohozaev", "decay", "tie" or the
  /// termination name for undetermined shots.
  const char* reason = "";
  std::vector<Crossing> crossings;  // parallel to ShotControls::levels

  const Crossing* crossing(double level) const noexcept;
};

struct GroundStateBracket {
  double alpha_lo = 0.0;
  double alpha_hi = 0.0;
  Tag tag_lo = Tag::P;
  Tag tag_hi = Tag::N;
  Classification shot_lo;
  Classification shot_hi;

  double width() const noexcept { return alpha_hi - alpha_lo; }
  double midpoint() const noexcept { return 0.5 * (alpha_lo + alpha_hi); }
};

struct ScanOptions {
  double alpha_max = 30.0;
  /// 0 selects (alpha_max - b) / 400.
  double step = 0.0;
  double tol = 1e-9;
  /// Optional expected bracket count; a shortfall triggers one half-step rescan.
  std::optional<std::size_t> expected_count;
  /// Extra alpha values merged into the uniform grid.
  std::vector<double> anchors;
  /// 0 selects std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct ScanPoint {
  double alpha = 0.0;
  Classification shot;
};

struct ScanResult {
  std::vector<ScanPoint> points;
  std::vector<GroundStateBracket> brackets;
  bool rescanned = false;
};

/// Shot classifier bound to one nonlinearity. Thread-safe (const methods only).
class Shooter {
 public:
  Shooter(const PiecewiseNonlinearity& nl, ShotControls controls = {});
  /// The shooter keeps a pointer; the nonlinearity must outlive it.
  Shooter(PiecewiseNonlinearity&&, ShotControls = {}) = delete;

  /// Shot from (0, alpha, 0); requires alpha > b.
  Classification classify(double alpha) const;
  /// Shot from an arbitrary state with u > 0, used by restart probes.
  Classification classify_from(const RadialState& start) const;
  /// classify with one retry at 10x r_max when the first shot is undetermined.
  Classification classify_retry(double alpha) const;

  /// First down-crossing of `level` and r |u'| there; throws LevelNotReached
  /// when the shot turns around above it.
  Crossing crossing_moment(double alpha, double level) const;

  /// The trajectory of a classify shot, kept for plotting and functionals.
  Trajectory shoot(double alpha) const;

  const PiecewiseNonlinearity& nonlinearity() const noexcept { return *nl_; }
  const ShotControls& controls() const noexcept { return controls_; }
  /// min(beta, first positive zero of Q).
  double pohozaev_ceiling() const noexcept { return ceiling_; }

 private:
  Classification run(const RadialState& start, double alpha, const ShotControls& c) const;
  std::vector<EventSpec> events(const ShotControls& c) const;

  const PiecewiseNonlinearity* nl_;
  ShotControls controls_;
  double ceiling_;
};

Classification classify(const PiecewiseNonlinearity& nl, double alpha, const ShotControls& controls = {});

Crossing crossing_moment(const PiecewiseNonlinearity& nl, double alpha, double level,
                         const ShotControls& controls = {});

/// Bisection between two shots of opposite tag until alpha_hi - alpha_lo < tol.
GroundStateBracket bisect_boundary(const Shooter& shooter, double a, double b, double tol);

/// Bisection from a P seed and an N seed; throws SpecError when the seed tags
/// do not differ and UndeterminedShot for an unresolved shot in the loop.
GroundStateBracket find_alpha_star(const PiecewiseNonlinearity& nl, double seed_p, double seed_n,
                                   double tol, const ShotControls& controls = {});

/// find_alpha_star with automatic seeds: (b + beta)/2 for P, doubling for N.
GroundStateBracket find_alpha_star(const PiecewiseNonlinearity& nl, double tol,
                                   const ShotControls& controls = {});

ScanResult find_ground_states(const Shooter& shooter, const ScanOptions& options);

/// CSV columns alpha, tag, R, r_star, momentum (first recorded level).
void write_scan_csv(std::ostream& os, const ScanResult& scan);

}  // namespace radshoot

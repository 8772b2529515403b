#pragma once

// Piecewise nonlinearities f built from a base model f1(s) = s^p - s and a
// chain of amplified upper blocks A_i^2 f_i glued by affine bridges.

#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace radshoot {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Unchecked skips the exponent range test (hypothesis probes at the critical p).
enum class Criticality { Subcritical, Supercritical, Unchecked };

/// f1(s) = s^p - s in dimension N. b = 1 is its positive zero and
/// beta = ((p+1)/2)^(1/(p-1)) the positive zero of its primitive.
class BaseModel {
 public:
  BaseModel(double p, int dimension, Criticality criticality = Criticality::Subcritical);

  double p() const noexcept { return p_; }
  int dimension() const noexcept { return n_; }
  Criticality criticality() const noexcept { return criticality_; }
  double critical_exponent() const noexcept { return (n_ + 2.0) / (n_ - 2.0); }
  double b() const noexcept { return 1.0; }
  double beta() const noexcept { return beta_; }

  double f(double s) const noexcept;
  double F(double s) const noexcept;
  /// F/f written so that it has no cancellation near s = 0 (limit 0 there).
  double F_over_f(double s) const;
  /// (F/f)'(s) in closed form.
  double F_over_f_prime(double s) const;

 private:
  double p_;
  int n_;
  Criticality criticality_;
  double beta_;
};

/// A_i^2 s^q.
struct PowerBlock {
  double q = 2.0;
};

/// c0 + c1 s + sin(omega s). omega = 0 gives an affine (or constant) block.
struct AffineSineBlock {
  double c0 = 2.0;
  double c1 = 0.0;
  double omega = 1.0;
};

/// Monotone cubic interpolation through (s, value) samples. Experimental.
struct SampledBlock {
  std::vector<double> s;
  std::vector<double> value;
};

using BlockKind = std::variant<PowerBlock, AffineSineBlock, SampledBlock>;

/// Unit-amplitude value of a block kind; throws DomainError when a sampled
/// table does not cover s.
double eval_kind(const BlockKind& kind, double s);
std::string kind_name(const BlockKind& kind);

/// One upper block: the bridge starts at `breakpoint` (alpha_i), has width
/// `bridge_width` (eps_i), and the block A^2 f proper starts at alpha_i + eps_i.
struct BlockSpec {
  BlockKind kind;
  double amplitude_sq = 1.0;
  double breakpoint = 0.0;
  double bridge_width = 0.1;
};

struct NonlinearitySpec {
  BaseModel base{2.0, 4};
  std::vector<BlockSpec> blocks;
  double gamma = kUnbounded;
};

enum class SegmentKind { Base, Bridge, Block };

struct Segment {
  SegmentKind kind = SegmentKind::Base;
  int block = -1;  // index into the block list (the block a bridge leads into)
  double lo = 0.0;
  double hi = kUnbounded;
  double y_lo = 0.0;  // bridge endpoint values
  double y_hi = 0.0;
  double F_lo = 0.0;  // cumulative primitive at lo
};

class SampledCurve;

/// Immutable compiled evaluator for f, F = int_0^s f and
/// Q = 2N F - (N-2) s f. Safe to share between threads.
class PiecewiseNonlinearity {
 public:
  static PiecewiseNonlinearity compile(const NonlinearitySpec& spec);

  double f(double s) const;
  double F(double s) const;
  double Q(double s) const;

  /// f extended outside [0, gamma) for integrator stage evaluations: odd
  /// extension of the base model below zero, last segment formula above gamma.
  double f_extended(double s) const noexcept;

  /// F/f, using the base model's cancellation-free form on the base segment.
  double F_over_f(double s) const;

  const NonlinearitySpec& spec() const noexcept { return spec_; }
  const BaseModel& base() const noexcept { return spec_.base; }
  int dimension() const noexcept { return spec_.base.dimension(); }
  double gamma() const noexcept { return spec_.gamma; }
  bool unbounded() const noexcept { return spec_.gamma == kUnbounded; }
  double b() const noexcept { return spec_.base.b(); }
  /// Positive zero of the full F (equals the base beta unless the first
  /// breakpoint lies below it).
  double beta() const noexcept { return beta_; }

  std::span<const Segment> segments() const noexcept { return segments_; }
  std::size_t segment_index(double s) const noexcept;
  /// Sorted u-levels where f loses smoothness, plus b and beta.
  std::span<const double> junctions() const noexcept { return junctions_; }

 private:
  double segment_f(const Segment& seg, double s) const;
  double segment_F(const Segment& seg, double s) const;
  double block_value(int block, double s) const;
  void check_domain(double s) const;

  NonlinearitySpec spec_;
  std::vector<Segment> segments_;
  std::vector<std::shared_ptr<const SampledCurve>> curves_;  // per block, may be null
  std::vector<double> junctions_;
  double beta_ = 0.0;
};

PiecewiseNonlinearity compile(const BaseModel& base, std::vector<BlockSpec> blocks,
                              double gamma = kUnbounded);
double eval_f(const PiecewiseNonlinearity& nl, double s);
double eval_F(const PiecewiseNonlinearity& nl, double s);
double eval_Q(const PiecewiseNonlinearity& nl, double s);

}  // namespace radshoot

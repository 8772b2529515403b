#pragma once

// Search for chain constants (alpha_i, eps_i, A_i) that force alternating
// tags P (even i) / N (odd i), and hence at least k ground states.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "radshoot/nonlinearity.hpp"
#include "radshoot/shooting.hpp"

namespace radshoot {

struct EscapeOptions {
  /// Probe momenta r |u'| span [a_bar, b_bar]; 0 selects (N-2)/4 and
  /// (alpha* - b)(N-2)/2.
  double a_bar = 0.0;
  double b_bar = 0.0;
  int momenta = 5;
  std::vector<double> growth = {1.0, 2.0, 4.0};
  double safety = 2.0;
  double k_start = 0.01;
  /// Relative width at which the bisection on K-hat stops.
  double rel_tol = 1e-3;
  ShotControls shots;
};

struct EscapeRadiusEstimate {
  double K = 0.0;      // safety * K_hat
  double K_hat = 0.0;  // smallest probed radius with all probes N
  double safety = 2.0;
  std::size_t probes = 0;
  double a_bar = 0.0;
  double b_bar = 0.0;
};

struct TuningOptions {
  int max_doublings = 60;
  int max_halvings = 60;
  double eps_floor = 1e-12;
  /// Even-block window lower end at r*; 0 selects 2(N-2)((3N)^{i-1}+1) eps0.
  double a_bar = 0.0;
  /// Overrides the continuity start A_i^2 = A_{i-1}^2 max f_{i-1} / max f_i.
  std::optional<double> initial_amplitude_sq;
  /// Grid for the alpha0 search on (alpha*, 2 alpha*].
  int alpha0_grid = 4096;
  /// Re-estimates of K (safety factor doubled) after an odd-block disagreement.
  int k_retries = 3;
  double scan_tol = 1e-9;
  double alpha_star_tol = 1e-10;
  unsigned threads = 0;
  ShotControls shots;
  EscapeOptions escape;
};

struct BlockTuning {
  int i = 0;
  double alpha = 0.0;         // alpha_i
  double eps = 0.0;           // eps_i, the bridge above alpha_i (0 for the last block)
  double amplitude_sq = 1.0;  // A_i^2 (1 for the base, i = 1)
  Tag verified_tag = Tag::Undetermined;
  int iterations = 0;  // doublings or halvings used

  // Even blocks: the alpha* crossing of the accepted shot.
  double r_star = 0.0;
  double momentum_star = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  bool window_ok = false;
  bool monotone_response = false;
  // Even blocks: r_i |u'(r_i)| at level alpha_{i-1} + eps_{i-1} against both
  // forms of the lower bound.
  double momentum_i = 0.0;
  double step1_bound = 0.0;
  double step1_bound_eps = 0.0;

  // Odd blocks: crossing of level alpha_{i-1} + eps0.
  double r_i = 0.0;
  double r_i_lower_bound = 0.0;  // sqrt(2N eps0 / (A_i^2 max f_i))
};

struct ChainTuning {
  BaseModel base{2.0, 4};
  std::vector<BlockKind> kinds;  // kinds[j] is f_{j+2}
  int k = 0;
  double alpha_star_lo = 0.0;
  double alpha_star_hi = 0.0;
  double alpha0 = 0.0;
  double eps0 = 0.0;
  std::optional<EscapeRadiusEstimate> escape;
  /// Records for i = 1 ... (tuned so far); blocks[0] is the base record.
  std::vector<BlockTuning> blocks;
  /// Set by fixed-amplitude placement, which is not bound by alpha_i <= alpha* + eps0 (3N)^i.
  bool placed = false;
  std::size_t bracket_count = 0;
  std::vector<GroundStateBracket> brackets;

  double alpha_star() const noexcept { return 0.5 * (alpha_star_lo + alpha_star_hi); }
  /// Blocks 2 ... upto from the stored records.
  NonlinearitySpec spec(int upto = -1) const;
  PiecewiseNonlinearity compile(int upto = -1) const;
  /// alpha_{i-1} + eps_{i-1} <= alpha_i <= alpha* + eps0 (3N)^i, eps_i <= eps0
  /// and tag alternation; the first violation is written to `why`.
  bool claim_holds(std::string* why = nullptr) const;

  std::string to_json() const;
  static ChainTuning from_json(const std::string& text);
};

/// Largest grid alpha0 in (alpha*, 2 alpha*] with max/min <= 3/2 for every
/// kind on [alpha*, alpha0], and eps0 = min(alpha0 - alpha*, (alpha* - b)(N-2)/6) / (3N)^k.
std::pair<double, double> pick_alpha0_and_eps0(const BaseModel& base, std::span<const BlockKind> kinds, int k,
                                               double alpha_star, int grid = 4096);

EscapeRadiusEstimate estimate_escape_radius(const BaseModel& base, double alpha_star,
                                            const EscapeOptions& options = {});

/// alpha*, alpha0, eps0 and the base record; no blocks tuned yet.
ChainTuning start_chain(const BaseModel& base, std::vector<BlockKind> kinds, int k,
                        const TuningOptions& options = {});

void tune_even_block(ChainTuning& chain, int i, const TuningOptions& options = {});
void tune_odd_block(ChainTuning& chain, int i, const TuningOptions& options = {});

ChainTuning tune_chain(const BaseModel& base, std::vector<BlockKind> kinds, int k,
                       const TuningOptions& options = {});

/// Alpha values that separate every alternation of a tuned chain, for scans.
std::vector<double> chain_anchors(const ChainTuning& chain);

/// Fixed amplitudes and bridge width: alpha_1 is given and each later alpha_i is
/// the first point of a step eps/2 upward scan where two consecutive shots
/// carry the wanted tag.
ChainTuning place_breakpoints(const BaseModel& base, std::vector<BlockKind> kinds,
                              std::vector<double> amplitudes_sq, double eps, double alpha1,
                              const TuningOptions& options = {});

/// Final verification scan over (b, alpha_k + 3 eps0] with the chain anchors.
ScanResult verify_chain(ChainTuning& chain, const TuningOptions& options = {});

}  // namespace radshoot

#pragma once

// Sampled certification of the structural hypotheses H1-H6 for a compiled
// nonlinearity.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "radshoot/nonlinearity.hpp"
#include "radshoot/shooting.hpp"

namespace radshoot {

enum class Verdict { Pass, Fail, Inconclusive };

const char* to_string(Verdict v) noexcept;

using ScalarFn = std::function<double(double)>;

struct HypothesisResult {
  std::string name;
  Verdict verdict = Verdict::Inconclusive;
  /// Worst sampled margin (positive means satisfied); NaN when not applicable.
  double margin = 0.0;
  /// Sample point realising the margin. Always set for a fail verdict.
  std::optional<double> witness;
  std::string detail;
};

/// Sample points on [lo, hi], geometric when lo > 0.
struct SampleGrid {
  double lo = 0.0;
  double hi = 0.0;
  int count = 2000;
  bool geometric = true;

  std::vector<double> points() const;
};

/// (b, beta) in closed form, cross-checked by a bracketing root of F.
std::pair<double, double> find_b_and_beta(const BaseModel& base);

HypothesisResult check_H1(const PiecewiseNonlinearity& nl, double s_hi);

/// (F/f)'(s) > (N-2)/(2N) on the grid (which must lie above beta).
HypothesisResult check_H2(const BaseModel& base, const SampleGrid& grid);
/// Generic form: (F/f)' by centered differences of F/f.
HypothesisResult check_H2(const ScalarFn& f, const ScalarFn& F, int dimension, const SampleGrid& grid);

/// f/(s - b) increasing on the grid (which must lie above b).
HypothesisResult check_H3(const BaseModel& base, const SampleGrid& grid);
HypothesisResult check_H3(const ScalarFn& f, double b, const SampleGrid& grid);

/// Records the alpha* bracket as the witness.
HypothesisResult check_H4(const GroundStateBracket& alpha_star);

/// Every block kind is positive on [alpha_star, s_hi] (sampled tables: on
/// their own range).
HypothesisResult check_H5(const PiecewiseNonlinearity& nl, double alpha_star, double s_hi);

struct H6Options {
  double theta = 0.5;
  /// Geometric ladder; empty selects 1e2 ... 1e6 in half decades.
  std::vector<double> ladder;
  int window_samples = 2001;
};

struct H6Rung {
  double s = 0.0;
  double value = 0.0;  // inf over [theta s, s]^2 of Q(s2) (s / f(s1))^{N/2}
};

struct H6Result {
  HypothesisResult result;
  std::vector<H6Rung> rungs;
  double q_min = 0.0;  // min of Q sampled on [0, last rung]
  double q_argmin = 0.0;
};

H6Result check_H6(const PiecewiseNonlinearity& nl, const H6Options& options = {});

struct VerifyOptions {
  int grid_samples = 2000;
  /// H2/H3 grids reach s_hi_factor * beta.
  double s_hi_factor = 100.0;
  H6Options h6;
  double alpha_star_tol = 1e-10;
  ShotControls shots;
};

struct HypothesisReport {
  double b = 0.0;
  double beta = 0.0;
  std::optional<std::pair<double, double>> alpha_star;
  double grid_hi = 0.0;
  int grid_samples = 0;
  std::vector<HypothesisResult> results;  // H1 ... H6
  std::vector<H6Rung> h6_rungs;
  double theta = 0.5;

  Verdict overall() const noexcept;
  const HypothesisResult* find(const std::string& name) const noexcept;
  std::string to_json() const;
};

HypothesisReport verify_hypotheses(const PiecewiseNonlinearity& nl, const VerifyOptions& options = {});

}  // namespace radshoot

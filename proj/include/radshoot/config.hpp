#pragma once

// Experiment configuration: an INI document with sections [nonlinearity],
// [block_2] ... [block_k], [solver], [scan], [tuning], [sweep], [output].

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "radshoot/nonlinearity.hpp"
#include "radshoot/shooting.hpp"

namespace radshoot {

/// Where a block's bridge starts: a number, alpha* plus an offset, or "auto"
/// (placed by scanning for the wanted tag above the previous block).
struct Breakpoint {
  enum class Kind { Absolute, AlphaStar, Auto };
  Kind kind = Kind::Absolute;
  double value = 0.0;  // the number, or the offset from alpha*

  static Breakpoint parse(const std::string& text);
  std::string str() const;
};

struct BlockEntry {
  BlockKind kind = PowerBlock{2.0};
  double amplitude_sq = 1.0;
  Breakpoint breakpoint;
  double bridge_width = 0.1;
};

struct SolverSection {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double r_max = 1e3;
};

struct ScanSection {
  double alpha_max = 30.0;
  double step = 0.0;  // 0: (alpha_max - b) / 400
  double tol = 1e-9;
};

struct TuningSection {
  int k = 4;
  double theta = 0.5;
  int max_doublings = 60;
  int max_halvings = 60;
};

/// Phase map over (A, eps) for block 2 placed at alpha* + eps; the probe is
/// alpha_1 + probe_factor * eps.
struct SweepSection {
  std::vector<double> amplitudes;  // A, not A^2
  std::vector<double> eps;
  double probe_factor = 2.0;
};

struct OutputSection {
  std::string directory = "out";
  bool csv = true;
  bool json = true;
  bool svg = true;
};

struct ExperimentConfig {
  std::string name;
  double p = 2.0;
  int dimension = 4;
  bool supercritical = false;
  double gamma = kUnbounded;
  std::vector<BlockEntry> blocks;  // blocks[j] is block j + 2
  SolverSection solver;
  ScanSection scan;
  TuningSection tuning;
  SweepSection sweep;
  OutputSection output;

  /// Throws ConfigError with the offending section and key.
  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig parse_string(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string emit() const;

  /// Range checks; throws ConfigError.
  void validate() const;

  BaseModel base() const;
  ShotControls shot_controls() const;
  bool needs_alpha_star() const;
  /// Resolves alpha*-relative and auto breakpoints. `alpha_star` is computed
  /// on demand when not given.
  NonlinearitySpec resolve(std::optional<double> alpha_star = std::nullopt) const;
};

/// Shortest decimal text that parses back to the same double ("inf" for +inf).
std::string format_number(double x);

/// Built-in configurations for the worked examples 2, 3 and 4, and 1 for the
/// base model alone.
std::string builtin_example_text(int example);
ExperimentConfig builtin_example(int example);

}  // namespace radshoot

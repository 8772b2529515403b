#pragma once

// Command implementations behind the CLI. Each command reads an
// ExperimentConfig, writes its files under config.output.directory, prints a
// human summary to `log`, and returns a process exit code.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "radshoot/config.hpp"
#include "radshoot/shooting.hpp"
#include "radshoot/tuning.hpp"

namespace radshoot {

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,  // an exception escaped; the message went to stderr
  kExitFail = 2,
  kExitInconclusive = 3,
};

/// Exit 0 when every hypothesis passes, 2 on any fail, 3 otherwise.
int cmd_verify(const ExperimentConfig& config, std::ostream& log);

/// Exit 3 when the shot is undetermined.
int cmd_classify(const ExperimentConfig& config, double alpha, std::ostream& log);

struct GroundStatesRun {
  NonlinearitySpec spec;
  std::optional<double> alpha_star;  // set when the config needed it
  ScanResult scan;
  std::vector<double> undetermined;  // alphas left unresolved after the retry
};

GroundStatesRun run_ground_states(const ExperimentConfig& config);
int cmd_ground_states(const ExperimentConfig& config, std::ostream& log);

/// Block kinds come from the config's blocks (the last one repeats), or are
/// power q = 2 when the config has none. Exit 2 when the chain bounds fail.
ChainTuning run_tune(const ExperimentConfig& config, int k);
int cmd_tune(const ExperimentConfig& config, int k, std::ostream& log);

struct ReproCheck {
  std::string name;
  std::string expected;
  std::string actual;
  bool ok = false;
};

/// Checks for worked examples 2, 3 and 4; `solver` overrides the built-in
/// solver section.
std::vector<ReproCheck> reproduce_checks(int example, const SolverSection& solver);
/// Re-verifies a stored ChainTuning: chain bounds, stored tags against fresh
/// shots, and the bracket count of a new scan.
std::vector<ReproCheck> recheck_chain(const ChainTuning& chain, const SolverSection& solver);
void write_report(std::ostream& os, const std::string& title, const std::vector<ReproCheck>& checks);

/// `config` supplies the solver overrides and the output directory.
int cmd_reproduce(int example, const ExperimentConfig& config, std::ostream& log);
int cmd_recheck_chain(const std::filesystem::path& chain_json, const ExperimentConfig& config, std::ostream& log);

struct SweepRow {
  double amplitude = 0.0;  // A
  double eps = 0.0;
  double alpha1 = 0.0;  // alpha* + eps
  double probe = 0.0;   // alpha1 + probe_factor * eps
  Tag tag = Tag::Undetermined;
  double R = 0.0;
  std::string reason;
  std::string error;  // non-empty when the point failed
};

/// Block 2 of the config (its kind only) at A^2 and alpha* + eps, for every
/// grid point. Throws ConfigError when some eps is not below (gamma - alpha*)/4.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
int cmd_sweep(const ExperimentConfig& config, std::ostream& log);

/// Writes example-1.ini ... example-4.ini into `dir`.
int cmd_init_examples(const std::filesystem::path& dir, std::ostream& log);

void write_brackets_csv(std::ostream& os, const std::vector<GroundStateBracket>& brackets);

}  // namespace radshoot

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "radshoot/config.hpp"
#include "radshoot/errors.hpp"
#include "radshoot/experiments.hpp"

using namespace radshoot;

namespace {

struct Globals {
  std::string config_path;
  std::string out;
  std::optional<double> rel_tol;
  std::optional<double> abs_tol;
  std::optional<double> r_max;
};

ExperimentConfig load(const Globals& g, int fallback_example) {
  ExperimentConfig c = g.config_path.empty() ? builtin_example(fallback_example) : ExperimentConfig::load(g.config_path);
  if (!g.out.empty()) c.output.directory = g.out;
  if (g.rel_tol) c.solver.rel_tol = *g.rel_tol;
  if (g.abs_tol) c.solver.abs_tol = *g.abs_tol;
  if (g.r_max) c.solver.r_max = *g.r_max;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shooting lab for radial ground states of u'' + (N-1)/r u' + f(u) = 0"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (INI); defaults to built-in example 1")
      ->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory (overrides [output] directory)");
  app.add_option("--rel-tol", g.rel_tol, "Integrator relative tolerance");
  app.add_option("--abs-tol", g.abs_tol, "Integrator absolute tolerance");
  app.add_option("--r-max", g.r_max, "Largest integration radius");

  auto* verify = app.add_subcommand("verify", "Check (H1)-(H6); exit 0 pass, 2 fail, 3 inconclusive");
  auto* classify_cmd = app.add_subcommand("classify", "Classify one initial value");
  double alpha = 0.0;
  classify_cmd->add_option("--alpha", alpha, "Initial value u(0)")->required();
  auto* gs = app.add_subcommand("ground-states", "Scan for ground-state brackets");
  auto* tune = app.add_subcommand("tune", "Tune an alternating k-block chain");
  int k = 4;
  tune->add_option("--k", k, "Number of ground states to construct")->check(CLI::Range(2, 64));
  auto* repro = app.add_subcommand("reproduce", "Re-run a worked example, or re-verify a stored chain");
  int example = 0;
  std::string chain_file;
  auto* ex_opt = repro->add_option("--example", example, "Worked example 2, 3 or 4")->check(CLI::IsMember({2, 3, 4}));
  repro->add_option("--chain", chain_file, "ChainTuning JSON written by tune")
      ->check(CLI::ExistingFile)
      ->excludes(ex_opt);
  auto* sweep = app.add_subcommand("sweep", "Tag map over the [sweep] grid of (A, eps)");
  auto* init = app.add_subcommand("init-examples", "Write the built-in example configs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init) return cmd_init_examples(g.out.empty() ? "." : g.out, std::cout);
    if (*repro) {
      if (example == 0 && chain_file.empty()) throw ConfigError("reproduce needs --example or --chain");
      ExperimentConfig c = load(g, 1);
      if (!chain_file.empty()) return cmd_recheck_chain(chain_file, c, std::cout);
      return cmd_reproduce(example, c, std::cout);
    }
    const ExperimentConfig c = load(g, 1);
    if (*verify) return cmd_verify(c, std::cout);
    if (*classify_cmd) return cmd_classify(c, alpha, std::cout);
    if (*gs) return cmd_ground_states(c, std::cout);
    if (*tune) return cmd_tune(c, k, std::cout);
    if (*sweep) return cmd_sweep(c, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

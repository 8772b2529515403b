#include "radshoot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "radshoot/errors.hpp"
#include "radshoot/functionals.hpp"
#include "radshoot/hypotheses.hpp"
#include "radshoot/svg.hpp"

namespace radshoot {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string num(double x) { return format_number(x); }

std::string prefix(const ExperimentConfig& c) { return c.name.empty() ? "run" : c.name; }

fs::path output_file(const ExperimentConfig& c, const std::string& suffix) {
  const fs::path dir(c.output.directory);
  fs::create_directories(dir);
  return dir / (prefix(c) + "-" + suffix);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  return os;
}

double base_alpha_star(const BaseModel& base, const ShotControls& shots) {
  const auto f1 = compile(base, {});
  return find_alpha_star(f1, 1e-10, shots).midpoint();
}

VerifyOptions verify_options(const ExperimentConfig& c) {
  VerifyOptions o;
  o.shots = c.shot_controls();
  o.h6.theta = c.tuning.theta;
  return o;
}

TuningOptions tuning_options(const ExperimentConfig& c) {
  TuningOptions o;
  o.max_doublings = c.tuning.max_doublings;
  o.max_halvings = c.tuning.max_halvings;
  o.scan_tol = c.scan.tol;
  o.shots = c.shot_controls();
  return o;
}

ExperimentConfig with_solver(ExperimentConfig c, const SolverSection& solver) {
  c.solver = solver;
  c.validate();
  return c;
}

ReproCheck check(std::string name, std::string expected, std::string actual, bool ok) {
  return {std::move(name), std::move(expected), std::move(actual), ok};
}

void add_verdicts(std::vector<ReproCheck>& out, const HypothesisReport& report,
                  const std::vector<std::pair<std::string, Verdict>>& wanted) {
  for (const auto& [name, v] : wanted) {
    const auto* r = report.find(name);
    const std::string got = r ? to_string(r->verdict) : "missing";
    out.push_back(check(name + " verdict", to_string(v), got, r && r->verdict == v));
  }
}

void plot_trajectory(SvgPlot& plot, const Trajectory& tr, const std::string& label, std::size_t i) {
  PlotSeries s;
  s.label = label;
  s.color = SvgPlot::color(i);
  for (const auto& st : tr.samples()) {
    s.x.push_back(st.r);
    s.y.push_back(st.u);
  }
  plot.add(std::move(s));
}

}  // namespace

int cmd_verify(const ExperimentConfig& config, std::ostream& log) {
  const auto nl = PiecewiseNonlinearity::compile(config.resolve());
  const auto report = verify_hypotheses(nl, verify_options(config));
  for (const auto& r : report.results) {
    log << r.name << "  " << to_string(r.verdict);
    if (!r.detail.empty()) log << "  " << r.detail;
    log << '\n';
  }
  log << "overall  " << to_string(report.overall()) << '\n';
  if (config.output.json) {
    const auto path = output_file(config, "verify.json");
    open_out(path) << report.to_json() << '\n';
    log << "wrote " << path.string() << '\n';
  }
  switch (report.overall()) {
    case Verdict::Pass: return kExitOk;
    case Verdict::Fail: return kExitFail;
    case Verdict::Inconclusive: break;
  }
  return kExitInconclusive;
}

int cmd_classify(const ExperimentConfig& config, double alpha, std::ostream& log) {
  auto shots = config.shot_controls();
  // alpha* is a diagnostic here unless a breakpoint depends on it.
  std::optional<double> as;
  try {
    as = base_alpha_star(config.base(), shots);
  } catch (const Error&) {
    if (config.needs_alpha_star()) throw;
  }
  const auto nl = PiecewiseNonlinearity::compile(config.resolve(as));
  if (as) shots.levels = {*as};
  const Shooter sh(nl, shots);
  const auto c = sh.classify_retry(alpha);
  log << "alpha " << num(alpha) << "  tag " << to_string(c.tag) << "  reason " << c.reason << "  R " << num(c.R)
      << "  u(R) " << num(c.terminal.u) << "  u'(R) " << num(c.terminal.v) << '\n';
  if (const auto* x = as ? c.crossing(*as) : nullptr; x && x->reached) {
    log << "level alpha* " << num(*as) << "  r " << num(x->r) << "  r|u'| " << num(x->momentum) << '\n';
  }
  const auto tr = sh.shoot(alpha);
  if (config.output.csv) {
    const auto path = output_file(config, "classify.csv");
    auto os = open_out(path);
    tr.write_csv(os);
    log << "wrote " << path.string() << '\n';
  }
  if (config.output.svg) {
    SvgPlot plot("u(r) from alpha = " + num(alpha), "r", "u");
    plot_trajectory(plot, tr, std::string("tag ") + to_string(c.tag), 0);
    const auto path = output_file(config, "classify.svg");
    auto os = open_out(path);
    plot.write(os);
    log << "wrote " << path.string() << '\n';
  }
  return c.tag == Tag::Undetermined ? kExitInconclusive : kExitOk;
}

void write_brackets_csv(std::ostream& os, const std::vector<GroundStateBracket>& brackets) {
  os << "index,alpha_lo,alpha_hi,midpoint,width,tag_lo,tag_hi\n";
  for (std::size_t i = 0; i < brackets.size(); ++i) {
    const auto& b = brackets[i];
    os << i + 1 << ',' << num(b.alpha_lo) << ',' << num(b.alpha_hi) << ',' << num(b.midpoint()) << ','
       << num(b.width()) << ',' << to_string(b.tag_lo) << ',' << to_string(b.tag_hi) << '\n';
  }
}

GroundStatesRun run_ground_states(const ExperimentConfig& config) {
  GroundStatesRun run;
  const auto shots = config.shot_controls();
  if (config.needs_alpha_star()) run.alpha_star = base_alpha_star(config.base(), shots);
  run.spec = config.resolve(run.alpha_star);
  const auto nl = PiecewiseNonlinearity::compile(run.spec);
  ScanOptions o;
  o.alpha_max = config.scan.alpha_max;
  o.step = config.scan.step;
  o.tol = config.scan.tol;
  for (const auto& b : run.spec.blocks) {
    for (double a : {b.breakpoint, b.breakpoint + b.bridge_width}) {
      if (a > nl.b() && a < o.alpha_max) o.anchors.push_back(a);
    }
  }
  run.scan = find_ground_states(Shooter(nl, shots), o);
  for (const auto& p : run.scan.points) {
    if (p.shot.tag == Tag::Undetermined) run.undetermined.push_back(p.alpha);
  }
  return run;
}

int cmd_ground_states(const ExperimentConfig& config, std::ostream& log) {
  const auto run = run_ground_states(config);
  const auto& br = run.scan.brackets;
  log << br.size() << " ground-state bracket(s) in (" << num(run.spec.base.b()) << ", " << num(config.scan.alpha_max)
      << "] from " << run.scan.points.size() << " shots\n";
  for (std::size_t i = 0; i < br.size(); ++i) {
    log << "  " << i + 1 << "  alpha " << num(br[i].midpoint()) << "  width " << num(br[i].width()) << '\n';
  }
  if (!run.undetermined.empty()) log << run.undetermined.size() << " undetermined shot(s), see the sidecar\n";

  std::vector<fs::path> written;
  if (config.output.csv) {
    written.push_back(output_file(config, "ground-states.csv"));
    auto b = open_out(written.back());
    write_brackets_csv(b, br);
    written.push_back(output_file(config, "scan.csv"));
    auto s = open_out(written.back());
    write_scan_csv(s, run.scan);
    written.push_back(output_file(config, "undetermined.csv"));
    auto u = open_out(written.back());
    u << "alpha,reason\n";
    for (const auto& p : run.scan.points) {
      if (p.shot.tag == Tag::Undetermined) u << num(p.alpha) << ',' << p.shot.reason << '\n';
    }
  }
  if (config.output.json) {
    ordered_json j;
    j["name"] = config.name;
    j["alpha_star"] = run.alpha_star ? ordered_json(*run.alpha_star) : ordered_json(nullptr);
    j["alpha_max"] = config.scan.alpha_max;
    j["shots"] = run.scan.points.size();
    j["rescanned"] = run.scan.rescanned;
    j["brackets"] = ordered_json::array();
    for (const auto& b : br) {
      j["brackets"].push_back({{"alpha_lo", b.alpha_lo},
                               {"alpha_hi", b.alpha_hi},
                               {"midpoint", b.midpoint()},
                               {"width", b.width()},
                               {"tag_lo", to_string(b.tag_lo)},
                               {"tag_hi", to_string(b.tag_hi)}});
    }
    j["undetermined"] = run.undetermined;
    written.push_back(output_file(config, "ground-states.json"));
    open_out(written.back()) << j.dump(2) << '\n';
  }
  if (config.output.svg) {
    const auto nl = PiecewiseNonlinearity::compile(run.spec);
    const Shooter sh(nl, config.shot_controls());
    SvgPlot plot("ground states", "r", "u");
    for (std::size_t i = 0; i < br.size(); ++i) {
      plot_trajectory(plot, sh.shoot(br[i].midpoint()), "alpha = " + num(br[i].midpoint()), i);
    }
    written.push_back(output_file(config, "ground-states.svg"));
    auto os = open_out(written.back());
    plot.write(os);
  }
  for (const auto& p : written) log << "wrote " << p.string() << '\n';
  return kExitOk;
}

ChainTuning run_tune(const ExperimentConfig& config, int k) {
  if (k < 2) throw ConfigError("tune needs k >= 2");
  std::vector<BlockKind> kinds;
  for (int j = 0; j + 2 <= k; ++j) {
    if (config.blocks.empty()) {
      kinds.push_back(PowerBlock{2.0});
    } else {
      kinds.push_back(config.blocks[std::min<std::size_t>(j, config.blocks.size() - 1)].kind);
    }
  }
  return tune_chain(config.base(), std::move(kinds), k, tuning_options(config));
}

int cmd_tune(const ExperimentConfig& config, int k, std::ostream& log) {
  const auto chain = run_tune(config, k);
  log << "alpha* " << num(chain.alpha_star()) << "  alpha0 " << num(chain.alpha0) << "  eps0 " << num(chain.eps0);
  if (chain.escape) log << "  K " << num(chain.escape->K);
  log << '\n';
  const double as = chain.alpha_star();
  const double step = 3.0 * chain.base.dimension();
  for (const auto& b : chain.blocks) {
    log << "  i " << b.i << "  alpha " << num(b.alpha) << "  bound " << num(as + chain.eps0 * std::pow(step, b.i))
        << "  A^2 " << num(b.amplitude_sq) << "  eps " << num(b.eps) << "  tag " << to_string(b.verified_tag) << '\n';
  }
  std::string why;
  const bool ok = chain.claim_holds(&why) && chain.bracket_count >= static_cast<std::size_t>(k);
  log << chain.bracket_count << " bracket(s) in the verification scan\n";
  if (!why.empty()) log << "claim: " << why << '\n';
  if (config.output.json) {
    const auto path = output_file(config, "tune-k" + std::to_string(k) + ".json");
    open_out(path) << chain.to_json() << '\n';
    log << "wrote " << path.string() << '\n';
  }
  return ok ? kExitOk : kExitFail;
}

std::vector<ReproCheck> reproduce_checks(int example, const SolverSection& solver) {
  const auto config = with_solver(builtin_example(example), solver);
  const auto shots = config.shot_controls();
  const BaseModel base = config.base();
  const auto f1 = compile(base, {});
  const auto star = find_alpha_star(f1, 1e-10, shots);
  const double as = star.midpoint();
  std::vector<ReproCheck> out;

  if (example == 2) {
    const auto nl = PiecewiseNonlinearity::compile(config.resolve(as));
    ScanOptions o;
    o.alpha_max = 30.0;
    o.tol = config.scan.tol;
    o.expected_count = 3;
    const auto scan = find_ground_states(Shooter(nl, shots), o);
    const auto& br = scan.brackets;
    out.push_back(check("ground-state brackets below 30", ">= 3", std::to_string(br.size()), br.size() >= 3));
    double widest = 0.0, highest = 0.0;
    for (const auto& b : br) {
      widest = std::max(widest, b.width());
      highest = std::max(highest, b.midpoint());
    }
    out.push_back(check("largest midpoint", "< 30", num(highest), highest < 30.0));
    out.push_back(check("widest bracket", "<= 1e-08", num(widest), widest <= 1e-8));
    const auto report = verify_hypotheses(nl, verify_options(config));
    add_verdicts(out, report,
                 {{"H1", Verdict::Pass}, {"H2", Verdict::Pass}, {"H3", Verdict::Pass}, {"H4", Verdict::Pass},
                  {"H5", Verdict::Pass}, {"H6", Verdict::Pass}});
    return out;
  }

  if (example == 3) {
    const auto three = classify(f1, 3.0, shots);
    out.push_back(check("tag at alpha = 3", "P", to_string(three.tag), three.tag == Tag::P));
    out.push_back(check("alpha* lower bracket end", "> 3", num(star.alpha_lo), star.alpha_lo > 3.0));
    const double c45 = singular_constant(4, 5.0);
    out.push_back(check("C(4,5)", "0.5", num(c45), c45 == 0.5));
    double worst = 0.0;
    for (int j = 0; j <= 200; ++j) {
      const double r = 0.1 * std::pow(100.0, j / 200.0);
      worst = std::max(worst, std::abs(singular_residual(4, 5.0, 1.0, r)));
    }
    out.push_back(check("singular residual q=5 A=1 on [0.1,10]", "< 1e-10", num(worst), worst < 1e-10));

    // Grow A^2 by 4 (A doubles) until alpha = 100 is in P, then test the ladder.
    auto spec = config.resolve(as);
    double a_sq = spec.blocks.at(0).amplitude_sq;
    int doublings = 0;
    Tag tag = Tag::Undetermined;
    for (; doublings <= 30; ++doublings) {
      spec.blocks[0].amplitude_sq = a_sq;
      const auto trial = PiecewiseNonlinearity::compile(spec);
      tag = Shooter(trial, shots).classify_retry(100.0).tag;
      if (tag == Tag::P) break;
      a_sq *= 4.0;
    }
    out.push_back(check("A^2 making alpha = 100 P", "found within 30 doublings",
                        tag == Tag::P ? num(a_sq) + " after " + std::to_string(doublings) : "not found",
                        tag == Tag::P));
    const auto nl = PiecewiseNonlinearity::compile(spec);
    const Shooter sh(nl, shots);
    for (double a : {1e2, 1e3, 1e4}) {
      const auto c = sh.classify_retry(a);
      out.push_back(check("tag at alpha = " + num(a), "P", to_string(c.tag), c.tag == Tag::P));
    }
    const auto report = verify_hypotheses(nl, verify_options(config));
    add_verdicts(out, report,
                 {{"H1", Verdict::Pass}, {"H2", Verdict::Pass}, {"H3", Verdict::Pass}, {"H4", Verdict::Pass},
                  {"H5", Verdict::Pass}, {"H6", Verdict::Fail}});
    return out;
  }

  if (example == 4) {
    std::vector<BlockKind> kinds;
    std::vector<double> amps;
    for (const auto& b : config.blocks) {
      kinds.push_back(b.kind);
      amps.push_back(b.amplitude_sq);
    }
    const double a1 = as + config.blocks.at(0).breakpoint.value;
    auto opt = tuning_options(config);
    auto chain = place_breakpoints(base, kinds, amps, config.blocks[0].bridge_width, a1, opt);
    const auto nl = chain.compile();
    const Shooter sh(nl, shots);
    for (const auto& b : chain.blocks) {
      const Tag want = b.i % 2 == 0 ? Tag::P : Tag::N;
      const Tag got = sh.classify_retry(b.alpha).tag;
      out.push_back(check("tag at alpha_" + std::to_string(b.i) + " = " + num(b.alpha), to_string(want),
                          to_string(got), got == want));
    }
    const auto scan = verify_chain(chain, opt);
    int covered = 0;
    for (std::size_t j = 1; j < chain.blocks.size(); ++j) {
      const double lo = chain.blocks[j - 1].alpha, hi = chain.blocks[j].alpha;
      covered += std::any_of(scan.brackets.begin(), scan.brackets.end(),
                             [&](const GroundStateBracket& b) { return b.alpha_lo >= lo && b.alpha_hi <= hi; });
    }
    out.push_back(check("alternations holding a bracket", ">= 4", std::to_string(covered), covered >= 4));
    out.push_back(check("ground-state brackets", ">= 5", std::to_string(scan.brackets.size()),
                        scan.brackets.size() >= 5));
    return out;
  }
  throw ConfigError("reproduce supports examples 2, 3 and 4");
}

std::vector<ReproCheck> recheck_chain(const ChainTuning& stored, const SolverSection& solver) {
  ExperimentConfig c;
  c.solver = solver;
  auto opt = tuning_options(c);
  std::vector<ReproCheck> out;
  std::string why;
  const bool claim = stored.claim_holds(&why);
  out.push_back(check("stored claim bounds", "hold", claim ? "hold" : why, claim));
  ChainTuning chain = stored;
  const auto nl = chain.compile();
  const Shooter sh(nl, opt.shots);
  for (const auto& b : chain.blocks) {
    const Tag got = sh.classify_retry(b.alpha).tag;
    out.push_back(check("tag at alpha_" + std::to_string(b.i), to_string(b.verified_tag), to_string(got),
                        got == b.verified_tag));
  }
  const auto scan = verify_chain(chain, opt);
  out.push_back(check("ground-state brackets", ">= " + std::to_string(chain.k), std::to_string(scan.brackets.size()),
                      scan.brackets.size() >= static_cast<std::size_t>(chain.k)));
  return out;
}

void write_report(std::ostream& os, const std::string& title, const std::vector<ReproCheck>& checks) {
  std::size_t failed = 0;
  os << title << '\n';
  for (const auto& c : checks) {
    if (c.ok) {
      os << "  ok    " << c.name << ": " << c.actual << '\n';
    } else {
      ++failed;
      os << "  FAIL  " << c.name << '\n' << "- " << c.expected << '\n' << "+ " << c.actual << '\n';
    }
  }
  os << (failed == 0 ? "all " + std::to_string(checks.size()) + " checks passed"
                     : std::to_string(failed) + " of " + std::to_string(checks.size()) + " checks failed")
     << '\n';
}

namespace {

int finish_report(const ExperimentConfig& config, const std::string& file, const std::string& title,
                  const std::vector<ReproCheck>& checks, std::ostream& log) {
  write_report(log, title, checks);
  const fs::path dir(config.output.directory);
  fs::create_directories(dir);
  auto os = open_out(dir / file);
  write_report(os, title, checks);
  log << "wrote " << (dir / file).string() << '\n';
  const bool ok = std::all_of(checks.begin(), checks.end(), [](const ReproCheck& c) { return c.ok; });
  return ok ? kExitOk : kExitFail;
}

}  // namespace

int cmd_reproduce(int example, const ExperimentConfig& config, std::ostream& log) {
  const auto checks = reproduce_checks(example, config.solver);
  const std::string n = std::to_string(example);
  return finish_report(config, "reproduce-example-" + n + ".txt", "example " + n, checks, log);
}

int cmd_recheck_chain(const fs::path& chain_json, const ExperimentConfig& config, std::ostream& log) {
  std::ifstream in(chain_json);
  if (!in) throw ConfigError("cannot open '" + chain_json.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto chain = ChainTuning::from_json(buf.str());
  const auto checks = recheck_chain(chain, config.solver);
  return finish_report(config, "recheck-" + chain_json.stem().string() + ".txt", "stored chain " + chain_json.string(),
                       checks, log);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config) {
  if (config.blocks.empty()) throw ConfigError("[sweep] needs a [block_2] section for the block kind");
  if (config.sweep.amplitudes.empty() || config.sweep.eps.empty()) {
    throw ConfigError("[sweep] amplitudes and eps must both be non-empty");
  }
  const auto shots = config.shot_controls();
  const double as = base_alpha_star(config.base(), shots);
  for (double e : config.sweep.eps) {
    if (std::isfinite(config.gamma) && !(e < (config.gamma - as) / 4.0)) {
      throw ConfigError("[sweep] eps = " + num(e) + " is not below (gamma - alpha*)/4 = " +
                        num((config.gamma - as) / 4.0));
    }
  }
  std::vector<SweepRow> rows;
  for (double a : config.sweep.amplitudes) {
    for (double e : config.sweep.eps) {
      SweepRow row;
      row.amplitude = a;
      row.eps = e;
      row.alpha1 = as + e;
      row.probe = row.alpha1 + config.sweep.probe_factor * e;
      try {
        NonlinearitySpec spec;
        spec.base = config.base();
        spec.gamma = config.gamma;
        spec.blocks.push_back(BlockSpec{config.blocks[0].kind, a * a, row.alpha1, e});
        const auto nl = PiecewiseNonlinearity::compile(spec);
        const auto c = Shooter(nl, shots).classify_retry(row.probe);
        row.tag = c.tag;
        row.R = c.R;
        row.reason = c.reason;
      } catch (const Error& err) {
        row.error = err.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "A,eps,alpha1,probe_alpha,tag,R,reason,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    os << num(r.amplitude) << ',' << num(r.eps) << ',' << num(r.alpha1) << ',' << num(r.probe) << ','
       << (r.error.empty() ? to_string(r.tag) : "") << ',' << (r.error.empty() ? num(r.R) : "") << ',' << r.reason
       << ',' << (err.empty() ? "" : "\"" + err + "\"") << '\n';
  }
}

int cmd_sweep(const ExperimentConfig& config, std::ostream& log) {
  const auto rows = run_sweep(config);
  std::size_t n = 0, p = 0, other = 0;
  for (const auto& r : rows) {
    if (!r.error.empty() || r.tag == Tag::Undetermined) ++other;
    else if (r.tag == Tag::P) ++p;
    else ++n;
  }
  log << rows.size() << " grid point(s): " << p << " P, " << n << " N, " << other << " undetermined or failed\n";
  if (config.output.csv) {
    const auto path = output_file(config, "sweep.csv");
    auto os = open_out(path);
    write_sweep_csv(os, rows);
    log << "wrote " << path.string() << '\n';
  }
  if (config.output.svg) {
    SvgPlot plot("tag at the probe alpha", "A", "eps");
    PlotSeries sp{"P", {}, {}, "#1f77b4", true}, sn{"N", {}, {}, "#d62728", true}, su{"undetermined", {}, {}, "#999999", true};
    for (const auto& r : rows) {
      auto& s = !r.error.empty() || r.tag == Tag::Undetermined ? su : (r.tag == Tag::P ? sp : sn);
      s.x.push_back(r.amplitude);
      s.y.push_back(r.eps);
    }
    for (auto* s : {&sp, &sn, &su}) {
      if (!s->x.empty()) plot.add(*s);
    }
    const auto path = output_file(config, "sweep.svg");
    auto os = open_out(path);
    plot.write(os);
    log << "wrote " << path.string() << '\n';
  }
  return other == 0 ? kExitOk : kExitInconclusive;
}

int cmd_init_examples(const fs::path& dir, std::ostream& log) {
  fs::create_directories(dir);
  for (int ex = 1; ex <= 4; ++ex) {
    const auto path = dir / ("example-" + std::to_string(ex) + ".ini");
    open_out(path) << builtin_example_text(ex);
    log << "wrote " << path.string() << '\n';
  }
  return kExitOk;
}

}  // namespace radshoot

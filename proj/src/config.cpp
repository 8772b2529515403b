#include "radshoot/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "radshoot/errors.hpp"
#include "radshoot/tuning.hpp"

namespace radshoot {

namespace {

namespace pt = boost::property_tree;

std::string num(double x) { return format_number(x); }

std::string list(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + num(xs[i]);
  return s;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  if (s == "inf" || s == "+inf") return kUnbounded;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(where + ": '" + raw + "' is not a number");
  }
  return v;
}

int parse_int(const std::string& raw, const std::string& where) {
  const double v = parse_double(raw, where);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(where + ": '" + raw + "' is not an integer");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(where + ": '" + raw + "' is not a boolean");
}

std::vector<double> parse_list(const std::string& raw, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(item, where));
  }
  return out;
}

/// Reads one section, rejecting keys that are not consumed.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!tree_) return std::nullopt;
    const auto it = tree_->find(key);
    if (it == tree_->not_found()) return std::nullopt;
    return it->second.data();
  }
  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  void get(const std::string& key, double& v) {
    if (auto r = raw(key)) v = parse_double(*r, where(key));
  }
  void get(const std::string& key, int& v) {
    if (auto r = raw(key)) v = parse_int(*r, where(key));
  }
  void get(const std::string& key, bool& v) {
    if (auto r = raw(key)) v = parse_bool(*r, where(key));
  }
  void get(const std::string& key, std::string& v) {
    if (auto r = raw(key)) v = trim(*r);
  }
  void get(const std::string& key, std::vector<double>& v) {
    if (auto r = raw(key)) v = parse_list(*r, where(key));
  }
  double need(const std::string& key) {
    auto r = raw(key);
    if (!r) throw ConfigError(where(key) + " is required");
    return parse_double(*r, where(key));
  }

  void finish() const {
    if (!tree_) return;
    for (const auto& kv : *tree_) {
      if (!used_.count(kv.first)) throw ConfigError("[" + name_ + "] unknown key '" + kv.first + "'");
    }
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> used_;
};

const pt::ptree* child(const pt::ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return it == root.not_found() ? nullptr : &it->second;
}

BlockEntry parse_block(const pt::ptree& tree, const std::string& name) {
  Section s(&tree, name);
  BlockEntry b;
  std::string kind = "power";
  s.get("kind", kind);
  if (kind == "power") {
    PowerBlock k;
    s.get("q", k.q);
    b.kind = k;
  } else if (kind == "affine-sine") {
    AffineSineBlock k;
    s.get("c0", k.c0);
    s.get("c1", k.c1);
    s.get("omega", k.omega);
    b.kind = k;
  } else if (kind == "sampled") {
    SampledBlock k;
    s.get("s", k.s);
    s.get("value", k.value);
    b.kind = k;
  } else {
    throw ConfigError(s.where("kind") + ": unknown block kind '" + kind + "'");
  }
  b.amplitude_sq = s.need("amplitude_sq");
  std::string bp;
  s.get("breakpoint", bp);
  if (bp.empty()) throw ConfigError(s.where("breakpoint") + " is required");
  try {
    b.breakpoint = Breakpoint::parse(bp);
  } catch (const ConfigError& e) {
    throw ConfigError(s.where("breakpoint") + ": " + e.what());
  }
  s.get("bridge_width", b.bridge_width);
  s.finish();
  return b;
}

void emit_kind(std::ostream& os, const BlockKind& kind) {
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, PowerBlock>) {
          os << "kind = power\nq = " << num(k.q) << '\n';
        } else if constexpr (std::is_same_v<T, AffineSineBlock>) {
          os << "kind = affine-sine\nc0 = " << num(k.c0) << "\nc1 = " << num(k.c1) << "\nomega = " << num(k.omega)
             << '\n';
        } else {
          os << "kind = sampled\ns = " << list(k.s) << "\nvalue = " << list(k.value) << '\n';
        }
      },
      kind);
}

}  // namespace

std::string format_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Breakpoint Breakpoint::parse(const std::string& text) {
  const std::string s = trim(text);
  if (s == "auto") return {Kind::Auto, 0.0};
  const std::string star = "alpha_star";
  if (s.rfind(star, 0) == 0) {
    std::string rest = trim(s.substr(star.size()));
    if (rest.empty()) return {Kind::AlphaStar, 0.0};
    const char sign = rest[0];
    if (sign != '+' && sign != '-') throw ConfigError("expected alpha_star+<offset> in '" + text + "'");
    const double off = parse_double(rest.substr(1), "breakpoint");
    return {Kind::AlphaStar, sign == '+' ? off : -off};
  }
  return {Kind::Absolute, parse_double(s, "breakpoint")};
}

std::string Breakpoint::str() const {
  switch (kind) {
    case Kind::Auto: return "auto";
    case Kind::AlphaStar:
      if (value == 0.0) return "alpha_star";
      return value > 0.0 ? "alpha_star+" + num(value) : "alpha_star-" + num(-value);
    case Kind::Absolute: break;
  }
  return num(value);
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  ExperimentConfig c;
  std::map<int, const pt::ptree*> blocks;
  for (const auto& kv : root) {
    const std::string& name = kv.first;
    if (name.rfind("block_", 0) == 0) {
      const int idx = parse_int(name.substr(6), "[" + name + "]");
      blocks[idx] = &kv.second;
    } else if (name != "nonlinearity" && name != "solver" && name != "scan" && name != "tuning" && name != "sweep" &&
               name != "output" && name != "experiment") {
      throw ConfigError("unknown section [" + name + "]");
    }
  }

  Section ex(child(root, "experiment"), "experiment");
  ex.get("name", c.name);
  ex.finish();

  Section nl(child(root, "nonlinearity"), "nonlinearity");
  nl.get("p", c.p);
  nl.get("N", c.dimension);
  nl.get("supercritical", c.supercritical);
  nl.get("gamma", c.gamma);
  nl.finish();

  int expect = 2;
  for (const auto& [idx, tree] : blocks) {
    if (idx != expect) throw ConfigError("block sections must be numbered 2, 3, ... without gaps");
    c.blocks.push_back(parse_block(*tree, "block_" + std::to_string(idx)));
    ++expect;
  }

  Section so(child(root, "solver"), "solver");
  so.get("rel_tol", c.solver.rel_tol);
  so.get("abs_tol", c.solver.abs_tol);
  so.get("r_max", c.solver.r_max);
  so.finish();

  Section sc(child(root, "scan"), "scan");
  sc.get("alpha_max", c.scan.alpha_max);
  sc.get("step", c.scan.step);
  sc.get("tol", c.scan.tol);
  sc.finish();

  Section tu(child(root, "tuning"), "tuning");
  tu.get("k", c.tuning.k);
  tu.get("theta", c.tuning.theta);
  tu.get("max_doublings", c.tuning.max_doublings);
  tu.get("max_halvings", c.tuning.max_halvings);
  tu.finish();

  Section sw(child(root, "sweep"), "sweep");
  sw.get("amplitudes", c.sweep.amplitudes);
  sw.get("eps", c.sweep.eps);
  sw.get("probe_factor", c.sweep.probe_factor);
  sw.finish();

  Section out(child(root, "output"), "output");
  out.get("directory", c.output.directory);
  std::string formats;
  out.get("formats", formats);
  if (!formats.empty()) {
    c.output.csv = c.output.json = c.output.svg = false;
    std::stringstream ss(formats);
    std::string f;
    while (std::getline(ss, f, ',')) {
      f = trim(f);
      if (f == "csv") c.output.csv = true;
      else if (f == "json") c.output.json = true;
      else if (f == "svg") c.output.svg = true;
      else if (!f.empty()) throw ConfigError("[output] formats: unknown format '" + f + "'");
    }
  }
  out.finish();

  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse(in);
}

std::string ExperimentConfig::emit() const {
  std::ostringstream os;
  if (!name.empty()) os << "[experiment]\nname = " << name << "\n\n";
  os << "[nonlinearity]\np = " << num(p) << "\nN = " << dimension
     << "\nsupercritical = " << (supercritical ? "true" : "false") << "\ngamma = " << num(gamma) << "\n";
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    os << "\n[block_" << j + 2 << "]\n";
    emit_kind(os, b.kind);
    os << "amplitude_sq = " << num(b.amplitude_sq) << "\nbreakpoint = " << b.breakpoint.str()
       << "\nbridge_width = " << num(b.bridge_width) << '\n';
  }
  os << "\n[solver]\nrel_tol = " << num(solver.rel_tol) << "\nabs_tol = " << num(solver.abs_tol)
     << "\nr_max = " << num(solver.r_max) << '\n';
  os << "\n[scan]\nalpha_max = " << num(scan.alpha_max) << "\nstep = " << num(scan.step) << "\ntol = " << num(scan.tol)
     << '\n';
  os << "\n[tuning]\nk = " << tuning.k << "\ntheta = " << num(tuning.theta) << "\nmax_doublings = " << tuning.max_doublings
     << "\nmax_halvings = " << tuning.max_halvings << '\n';
  os << "\n[sweep]\namplitudes = " << list(sweep.amplitudes) << "\neps = " << list(sweep.eps)
     << "\nprobe_factor = " << num(sweep.probe_factor) << '\n';
  std::string formats;
  for (auto [on, nm] : {std::pair{output.csv, "csv"}, {output.json, "json"}, {output.svg, "svg"}}) {
    if (on) formats += (formats.empty() ? "" : ",") + std::string(nm);
  }
  os << "\n[output]\ndirectory = " << output.directory << "\nformats = " << formats << '\n';
  return os.str();
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& what) { throw ConfigError(what); };
  try {
    (void)base();
  } catch (const SpecError& e) {
    bad(std::string("[nonlinearity] ") + e.what());
  }
  if (!(gamma > 1.0)) bad("[nonlinearity] gamma must exceed b = 1");
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const std::string at = "[block_" + std::to_string(j + 2) + "] ";
    const auto& b = blocks[j];
    if (!(b.amplitude_sq > 0.0) || !std::isfinite(b.amplitude_sq)) bad(at + "amplitude_sq must be positive and finite");
    if (!(b.bridge_width > 0.0) || !std::isfinite(b.bridge_width)) bad(at + "bridge_width must be positive and finite");
    if (!std::isfinite(b.breakpoint.value)) bad(at + "breakpoint must be finite");
    if (j == 0 && b.breakpoint.kind == Breakpoint::Kind::Auto) bad(at + "the first block cannot be placed automatically");
    if (j > 0 && blocks[j - 1].breakpoint.kind == Breakpoint::Kind::Auto && b.breakpoint.kind != Breakpoint::Kind::Auto) {
      bad(at + "automatic placement must continue to the last block");
    }
    if (b.breakpoint.kind == Breakpoint::Kind::Auto && b.bridge_width != blocks[0].bridge_width) {
      bad(at + "automatic placement needs one common bridge_width");
    }
  }
  if (!(solver.rel_tol > 0.0 && solver.rel_tol < 1.0)) bad("[solver] rel_tol must lie in (0, 1)");
  if (!(solver.abs_tol > 0.0 && solver.abs_tol < 1.0)) bad("[solver] abs_tol must lie in (0, 1)");
  if (!(solver.r_max > 0.0) || !std::isfinite(solver.r_max)) bad("[solver] r_max must be positive and finite");
  if (!(scan.alpha_max > 1.0) || !std::isfinite(scan.alpha_max)) bad("[scan] alpha_max must exceed b = 1");
  if (!(scan.step >= 0.0) || !std::isfinite(scan.step)) bad("[scan] step must be nonnegative");
  if (!(scan.tol > 0.0)) bad("[scan] tol must be positive");
  if (tuning.k < 2) bad("[tuning] k must be at least 2");
  if (!(tuning.theta > 0.0 && tuning.theta < 1.0)) bad("[tuning] theta must lie in (0, 1)");
  if (tuning.max_doublings < 0 || tuning.max_halvings < 0) bad("[tuning] caps must be nonnegative");
  for (double a : sweep.amplitudes) {
    if (!(a > 0.0) || !std::isfinite(a)) bad("[sweep] amplitudes must be positive");
  }
  for (double e : sweep.eps) {
    if (!(e > 0.0) || !std::isfinite(e)) bad("[sweep] eps must be positive");
  }
  if (!(sweep.probe_factor > 1.0) || !std::isfinite(sweep.probe_factor)) bad("[sweep] probe_factor must exceed 1");
  if (output.directory.empty()) bad("[output] directory must not be empty");
}

BaseModel ExperimentConfig::base() const {
  return BaseModel(p, dimension, supercritical ? Criticality::Supercritical : Criticality::Subcritical);
}

ShotControls ExperimentConfig::shot_controls() const {
  ShotControls c;
  c.integration.rel_tol = solver.rel_tol;
  c.integration.abs_tol = solver.abs_tol;
  c.integration.r_max = solver.r_max;
  return c;
}

bool ExperimentConfig::needs_alpha_star() const {
  for (const auto& b : blocks) {
    if (b.breakpoint.kind != Breakpoint::Kind::Absolute) return true;
  }
  return false;
}

NonlinearitySpec ExperimentConfig::resolve(std::optional<double> alpha_star) const {
  const BaseModel bm = base();
  if (!alpha_star && needs_alpha_star()) {
    const auto f1 = compile(bm, {});
    alpha_star = find_alpha_star(f1, 1e-10, shot_controls()).midpoint();
  }
  NonlinearitySpec spec;
  spec.base = bm;
  spec.gamma = gamma;
  const bool placed = blocks.size() > 1 && blocks[1].breakpoint.kind == Breakpoint::Kind::Auto;
  if (placed) {
    std::vector<BlockKind> kinds;
    std::vector<double> amps;
    for (const auto& b : blocks) {
      kinds.push_back(b.kind);
      amps.push_back(b.amplitude_sq);
    }
    const auto& first = blocks[0].breakpoint;
    const double a1 = first.kind == Breakpoint::Kind::AlphaStar ? *alpha_star + first.value : first.value;
    TuningOptions opt;
    opt.shots = shot_controls();
    spec = place_breakpoints(bm, kinds, amps, blocks[0].bridge_width, a1, opt).spec();
    spec.gamma = gamma;
    return spec;
  }
  for (const auto& b : blocks) {
    const double bp = b.breakpoint.kind == Breakpoint::Kind::AlphaStar ? *alpha_star + b.breakpoint.value
                                                                       : b.breakpoint.value;
    spec.blocks.push_back(BlockSpec{b.kind, b.amplitude_sq, bp, b.bridge_width});
  }
  return spec;
}

std::string builtin_example_text(int example) {
  switch (example) {
    case 1:
      return R"(# Base model s^2 - s in dimension 4: a single ground state.
[experiment]
name = base

[nonlinearity]
p = 2
N = 4

[scan]
alpha_max = 30
)";
    case 2:
      return R"(# Two-block nonlinearity, p = q = 2, A_2 = 10, eps_1 = 0.1.
[experiment]
name = example-2

[nonlinearity]
p = 2
N = 4

[block_2]
kind = power
q = 2
amplitude_sq = 100
breakpoint = alpha_star+0.1
bridge_width = 0.1

[scan]
alpha_max = 30

[sweep]
amplitudes = 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20
eps = 0.1
probe_factor = 2
)";
    case 3:
      return R"(# Supercritical tail q = 5 over the base p = 2; eps_1 below 2^4 (alpha* + 1)^-5.
[experiment]
name = example-3

[nonlinearity]
p = 2
N = 4

[block_2]
kind = power
q = 5
amplitude_sq = 1
breakpoint = alpha_star+0.0001
bridge_width = 0.0001

[scan]
alpha_max = 100
)";
    case 4:
      return R"(# Five-block chain: eps_i = 0.1, A_2^2 = A_4^2 = 10, A_3^2 = A_5^2 = 0.1.
[experiment]
name = example-4

[nonlinearity]
p = 2
N = 4

[block_2]
kind = power
q = 2
amplitude_sq = 10
breakpoint = alpha_star+0.1
bridge_width = 0.1

[block_3]
kind = power
q = 2
amplitude_sq = 0.1
breakpoint = auto
bridge_width = 0.1

[block_4]
kind = power
q = 2
amplitude_sq = 10
breakpoint = auto
bridge_width = 0.1

[block_5]
kind = power
q = 2
amplitude_sq = 0.1
breakpoint = auto
bridge_width = 0.1

[scan]
alpha_max = 12

[tuning]
k = 5
)";
    default: break;
  }
  throw ConfigError("no built-in example " + std::to_string(example) + " (choose 1, 2, 3 or 4)");
}

ExperimentConfig builtin_example(int example) { return ExperimentConfig::parse_string(builtin_example_text(example)); }

}  // namespace radshoot

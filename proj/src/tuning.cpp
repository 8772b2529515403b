#include "radshoot/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "radshoot/errors.hpp"

namespace radshoot {

namespace {

using nlohmann::json;

struct Range {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
};

Range kind_range(const BlockKind& kind, double lo, double hi, int n = 257) {
  Range r;
  for (int j = 0; j < n; ++j) {
    const double s = j + 1 == n ? hi : lo + (hi - lo) * j / (n - 1);
    const double v = std::abs(eval_kind(kind, s));
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
  }
  return r;
}

double pow3n(int n, int i) { return std::pow(3.0 * n, i); }

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

Tag tag_from(const std::string& s) {
  if (s == "N") return Tag::N;
  if (s == "P") return Tag::P;
  return Tag::Undetermined;
}

json kind_to_json(const BlockKind& kind) {
  return std::visit(
      [](const auto& k) -> json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, PowerBlock>) {
          return {{"kind", "power"}, {"q", k.q}};
        } else if constexpr (std::is_same_v<T, AffineSineBlock>) {
          return {{"kind", "affine-sine"}, {"c0", k.c0}, {"c1", k.c1}, {"omega", k.omega}};
        } else {
          return {{"kind", "sampled"}, {"s", k.s}, {"value", k.value}};
        }
      },
      kind);
}

BlockKind kind_from_json(const json& j) {
  const std::string name = j.at("kind").get<std::string>();
  if (name == "power") return PowerBlock{j.at("q").get<double>()};
  if (name == "affine-sine") {
    return AffineSineBlock{j.at("c0").get<double>(), j.at("c1").get<double>(), j.at("omega").get<double>()};
  }
  if (name == "sampled") {
    return SampledBlock{j.at("s").get<std::vector<double>>(), j.at("value").get<std::vector<double>>()};
  }
  throw ConfigError("unknown block kind '" + name + "'");
}

/// ||f_j||_+ on the domain of block j (j = 1 is the base on [b, alpha_1]).
double block_max(const ChainTuning& c, int j) {
  if (j == 1) return c.base.f(c.blocks[0].alpha);
  const auto& lo = c.blocks[static_cast<std::size_t>(j - 2)];
  const auto& hi = c.blocks[static_cast<std::size_t>(j - 1)];
  return kind_range(c.kinds[static_cast<std::size_t>(j - 2)], lo.alpha + lo.eps, hi.alpha).max;
}

void require_next(const ChainTuning& c, int i) {
  if (i < 2 || i > c.k) throw SpecError("block index must lie in [2, k]");
  if (c.blocks.size() != static_cast<std::size_t>(i - 1)) {
    throw SpecError("blocks must be tuned in order (expected block " + std::to_string(c.blocks.size() + 1) + ")");
  }
}

ShotControls with_levels(ShotControls c, std::vector<double> levels) {
  c.levels = std::move(levels);
  return c;
}

}  // namespace

NonlinearitySpec ChainTuning::spec(int upto) const {
  if (upto < 0) upto = blocks.empty() ? 1 : blocks.back().i;
  if (upto > static_cast<int>(blocks.size()) || upto - 1 > static_cast<int>(kinds.size())) {
    throw SpecError("chain has fewer records than requested");
  }
  NonlinearitySpec s;
  s.base = base;
  for (int i = 2; i <= upto; ++i) {
    const auto& below = blocks[static_cast<std::size_t>(i - 2)];
    s.blocks.push_back(BlockSpec{kinds[static_cast<std::size_t>(i - 2)],
                                 blocks[static_cast<std::size_t>(i - 1)].amplitude_sq, below.alpha, below.eps});
  }
  return s;
}

PiecewiseNonlinearity ChainTuning::compile(int upto) const { return PiecewiseNonlinearity::compile(spec(upto)); }

bool ChainTuning::claim_holds(std::string* why) const {
  auto fail = [&](std::string msg) {
    if (why) *why = std::move(msg);
    return false;
  };
  const double as = alpha_star();
  const int n = base.dimension();
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    const std::string at = "block " + std::to_string(b.i) + ": ";
    const Tag want = b.i % 2 == 0 ? Tag::P : Tag::N;
    if (b.verified_tag != want) return fail(at + "tag " + to_string(b.verified_tag) + " breaks the alternation");
    if (j > 0) {
      const auto& lo = blocks[j - 1];
      if (!(lo.alpha + lo.eps <= b.alpha)) return fail(at + "alpha_{i-1} + eps_{i-1} > alpha_i");
    }
    if (placed) continue;
    if (!(b.alpha <= as + eps0 * pow3n(n, b.i))) return fail(at + "alpha_i > alpha* + eps0 (3N)^i");
    if (!(b.eps <= eps0)) return fail(at + "eps_i > eps0");
  }
  return true;
}

std::pair<double, double> pick_alpha0_and_eps0(const BaseModel& base, std::span<const BlockKind> kinds, int k,
                                               double alpha_star, int grid) {
  if (k < 2) throw SpecError("chain tuning needs k >= 2");
  if (grid < 2) throw SpecError("alpha0 grid needs at least two points");
  std::vector<Range> seen(kinds.size());
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    const double v = std::abs(eval_kind(kinds[j], alpha_star));
    seen[j] = {v, v};
  }
  double alpha0 = alpha_star;
  double prev = alpha_star;
  for (int g = 1; g <= grid; ++g) {
    const double a = alpha_star * (1.0 + static_cast<double>(g) / grid);
    bool ok = true;
    for (std::size_t j = 0; j < kinds.size(); ++j) {
      const Range r = kind_range(kinds[j], prev, a, 9);
      seen[j].min = std::min(seen[j].min, r.min);
      seen[j].max = std::max(seen[j].max, r.max);
      ok = ok && seen[j].min > 0.0 && seen[j].max <= 1.5 * seen[j].min;
    }
    if (!ok) break;
    alpha0 = a;
    prev = a;
  }
  if (!(alpha0 > alpha_star)) throw TuningError("no alpha0 > alpha* keeps every block ratio within 3/2", 0);
  const int n = base.dimension();
  const double eps0 = std::min(alpha0 - alpha_star, (alpha_star - base.b()) * (n - 2) / 6.0) / pow3n(n, k);
  return {alpha0, eps0};
}

EscapeRadiusEstimate estimate_escape_radius(const BaseModel& base, double alpha_star, const EscapeOptions& opt) {
  const int n = base.dimension();
  EscapeRadiusEstimate est;
  est.safety = opt.safety;
  est.a_bar = opt.a_bar > 0.0 ? opt.a_bar : (n - 2) / 4.0;
  est.b_bar = opt.b_bar > 0.0 ? opt.b_bar : (alpha_star - base.b()) * (n - 2) / 2.0;
  if (!(est.b_bar > est.a_bar) || opt.momenta < 1 || opt.growth.empty()) {
    throw SpecError("escape probes need a_bar < b_bar, momenta and growth factors");
  }
  const auto f1 = compile(base, {});
  const Shooter shooter(f1, opt.shots);
  std::vector<double> momenta;
  for (int j = 0; j < opt.momenta; ++j) {
    momenta.push_back(opt.momenta == 1 ? est.a_bar
                                       : est.a_bar + (est.b_bar - est.a_bar) * j / (opt.momenta - 1));
  }
  auto all_n = [&](double kh) {
    for (double g : opt.growth) {
      for (double m : momenta) {
        ++est.probes;
        const double r0 = kh * g;
        if (shooter.classify_from({r0, alpha_star, -m / r0}).tag != Tag::N) return false;
      }
    }
    return true;
  };
  const double r_cap = opt.shots.integration.r_max;
  double lo = 0.0, hi = opt.k_start;
  while (!all_n(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > r_cap) throw TuningError("no escape radius found below r_max", 0);
  }
  while (hi - lo > opt.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (all_n(mid)) hi = mid;
    else lo = mid;
  }
  est.K_hat = hi;
  est.K = opt.safety * hi;
  return est;
}

ChainTuning start_chain(const BaseModel& base, std::vector<BlockKind> kinds, int k, const TuningOptions& opt) {
  if (k < 2) throw SpecError("chain tuning starts at i = 2 (k >= 2)");
  if (kinds.size() + 1 < static_cast<std::size_t>(k)) throw SpecError("need k - 1 block kinds");
  ChainTuning c;
  c.base = base;
  c.kinds = std::move(kinds);
  c.kinds.resize(static_cast<std::size_t>(k - 1));
  c.k = k;
  const auto f1 = compile(base, {});
  const auto br = find_alpha_star(f1, opt.alpha_star_tol, opt.shots);
  c.alpha_star_lo = br.alpha_lo;
  c.alpha_star_hi = br.alpha_hi;
  std::tie(c.alpha0, c.eps0) = pick_alpha0_and_eps0(base, c.kinds, k, c.alpha_star(), opt.alpha0_grid);
  BlockTuning first;
  first.i = 1;
  first.alpha = c.alpha_star() + c.eps0;
  first.eps = c.eps0;
  first.verified_tag = Shooter(f1, opt.shots).classify_retry(first.alpha).tag;
  if (first.verified_tag != Tag::N) throw TuningError("alpha* + eps0 does not classify N", 1);
  c.blocks.push_back(first);
  return c;
}

void tune_even_block(ChainTuning& c, int i, const TuningOptions& opt) {
  require_next(c, i);
  if (i % 2 != 0) throw SpecError("tune_even_block needs an even index");
  const int n = c.base.dimension();
  const double as = c.alpha_star();
  BlockTuning rec;
  rec.i = i;
  rec.alpha = as + c.eps0 * pow3n(n, i);
  rec.window_lo = opt.a_bar > 0.0 ? opt.a_bar : 2.0 * (n - 2) * (pow3n(n, i - 1) + 1.0) * c.eps0;
  rec.window_hi = (as - c.base.b()) * (n - 2) / 2.0;
  const std::size_t ib = c.blocks.size() - 1;  // c.blocks grows below; index, not reference
  const double start =
      opt.initial_amplitude_sq.value_or(c.blocks[ib].amplitude_sq * block_max(c, i - 1) /
                                        kind_range(c.kinds[static_cast<std::size_t>(i - 2)], c.blocks[ib].alpha, rec.alpha).max);

  std::string trace;
  for (double eps = c.eps0; eps >= opt.eps_floor; eps *= 0.5) {
    c.blocks[ib].eps = eps;
    const double below_alpha = c.blocks[ib].alpha;
    const double level_i = below_alpha + eps;
    trace.clear();
    rec.amplitude_sq = start;
    for (int d = 0; d <= opt.max_doublings; ++d, rec.amplitude_sq *= 4.0) {
      c.blocks.push_back(rec);
      const auto nl = c.compile(i);
      c.blocks.pop_back();
      const Shooter sh(nl, with_levels(opt.shots, {as, level_i}));
      const Classification cls = sh.classify_retry(rec.alpha);
      const Crossing& star = cls.crossings[0];
      trace += (trace.empty() ? "" : " ") + fmt(star.reached ? star.momentum : 0.0);
      if (cls.tag != Tag::P) continue;

      rec.verified_tag = Tag::P;
      rec.iterations = d;
      rec.r_star = star.r;
      rec.momentum_star = star.momentum;
      rec.window_ok = star.reached && star.r < cls.R && rec.window_lo <= star.momentum &&
                      star.momentum <= rec.window_hi;
      rec.momentum_i = cls.crossings[1].momentum;
      rec.step1_bound = 4.0 * (n - 2) * (below_alpha + c.eps0 - as);
      rec.step1_bound_eps = rec.step1_bound * c.eps0;

      BlockTuning twice = rec;
      twice.amplitude_sq *= 4.0;
      c.blocks.push_back(twice);
      const auto nl2 = c.compile(i);
      c.blocks.pop_back();
      rec.monotone_response = Shooter(nl2, opt.shots).classify_retry(rec.alpha).tag == Tag::P;
      c.blocks.push_back(rec);
      return;
    }
  }
  throw TuningError("block " + std::to_string(i) + ": doubling cap reached for every eps down to " +
                        fmt(opt.eps_floor) + " (alpha* momentum trace: " + trace + ")",
                    i);
}

void tune_odd_block(ChainTuning& c, int i, const TuningOptions& opt) {
  require_next(c, i);
  if (i % 2 == 0) throw SpecError("tune_odd_block needs an odd index");
  if (!c.escape) throw SpecError("odd blocks need an escape radius estimate");
  const int n = c.base.dimension();
  const double K = c.escape->K;
  c.blocks.back().eps = c.eps0;
  const double below_alpha = c.blocks.back().alpha;
  BlockTuning rec;
  rec.i = i;
  rec.alpha = below_alpha + 2.5 * c.eps0;
  const double level = below_alpha + c.eps0;
  const double fmax = kind_range(c.kinds[static_cast<std::size_t>(i - 2)], below_alpha, rec.alpha).max;
  // Below this amplitude the crossing-radius lower bound already exceeds K.
  rec.amplitude_sq = opt.initial_amplitude_sq.value_or(std::min(1.0, 0.999 * 2.0 * n * c.eps0 / (K * K * fmax)));

  for (int h = 0; h <= opt.max_halvings; ++h, rec.amplitude_sq *= 0.25) {
    c.blocks.push_back(rec);
    const auto nl = c.compile(i);
    c.blocks.pop_back();
    const Shooter sh(nl, with_levels(opt.shots, {level}));
    const Classification cls = sh.classify_retry(rec.alpha);
    const Crossing& x = cls.crossings[0];
    if (!x.reached || !(x.r > K)) continue;
    rec.iterations = h;
    rec.r_i = x.r;
    rec.r_i_lower_bound = std::sqrt(2.0 * n * c.eps0 / (rec.amplitude_sq * fmax));
    rec.verified_tag = cls.tag;
    if (cls.tag != Tag::N) {
      throw TuningError("block " + std::to_string(i) + ": crossing radius " + fmt(x.r) + " > K = " + fmt(K) +
                            " but the shot classifies " + to_string(cls.tag) + "; K is too small",
                        i);
    }
    c.blocks.push_back(rec);
    return;
  }
  throw TuningError("block " + std::to_string(i) + ": halving cap reached before the crossing radius exceeded K", i);
}

std::vector<double> chain_anchors(const ChainTuning& c) {
  std::vector<double> a;
  const double as = c.alpha_star();
  const double e = c.placed ? c.blocks.front().eps : c.eps0;
  a.push_back(c.alpha_star_lo - e);
  a.push_back(as + 0.5 * std::min(e, c.blocks.front().alpha - as));
  for (const auto& b : c.blocks) a.push_back(b.alpha);
  return a;
}

ScanResult verify_chain(ChainTuning& c, const TuningOptions& opt) {
  const auto nl = c.compile();
  const Shooter sh(nl, opt.shots);
  ScanOptions so;
  const double e = c.placed ? c.blocks.front().eps : c.eps0;
  so.alpha_max = c.blocks.back().alpha + 3.0 * e;
  so.tol = opt.scan_tol;
  so.anchors = chain_anchors(c);
  so.expected_count = static_cast<std::size_t>(c.k);
  so.threads = opt.threads;
  ScanResult res = find_ground_states(sh, so);
  c.brackets = res.brackets;
  c.bracket_count = res.brackets.size();
  return res;
}

ChainTuning tune_chain(const BaseModel& base, std::vector<BlockKind> kinds, int k, const TuningOptions& opt) {
  ChainTuning c = start_chain(base, std::move(kinds), k, opt);
  EscapeOptions eo = opt.escape;
  eo.shots = opt.shots;
  c.escape = estimate_escape_radius(base, c.alpha_star(), eo);
  for (int i = 2; i <= k; ++i) {
    if (i % 2 == 0) {
      tune_even_block(c, i, opt);
      continue;
    }
    for (int attempt = 0;; ++attempt) {
      try {
        tune_odd_block(c, i, opt);
        break;
      } catch (const TuningError& e) {
        if (attempt >= opt.k_retries || std::string(e.what()).find("K is too small") == std::string::npos) throw;
        eo.safety *= 2.0;
        c.escape = estimate_escape_radius(base, c.alpha_star(), eo);
      }
    }
  }
  c.blocks.back().eps = 0.0;
  verify_chain(c, opt);
  if (c.bracket_count < static_cast<std::size_t>(k)) {
    throw TuningError("verification scan found " + std::to_string(c.bracket_count) + " brackets, expected " +
                          std::to_string(k),
                      k);
  }
  std::string why;
  if (!c.claim_holds(&why)) throw TuningError("tuned chain violates its bounds: " + why, k);
  return c;
}

ChainTuning place_breakpoints(const BaseModel& base, std::vector<BlockKind> kinds, std::vector<double> amplitudes_sq,
                              double eps, double alpha1, const TuningOptions& opt) {
  if (kinds.empty() || kinds.size() != amplitudes_sq.size()) {
    throw SpecError("placement needs one amplitude per block kind");
  }
  if (!(eps > 0.0)) throw SpecError("bridge width must be positive");
  ChainTuning c;
  c.base = base;
  c.kinds = std::move(kinds);
  c.k = static_cast<int>(c.kinds.size()) + 1;
  c.placed = true;
  c.eps0 = eps;
  const auto f1 = compile(base, {});
  const auto br = find_alpha_star(f1, opt.alpha_star_tol, opt.shots);
  c.alpha_star_lo = br.alpha_lo;
  c.alpha_star_hi = br.alpha_hi;
  if (!(alpha1 > c.alpha_star_hi)) throw SpecError("alpha_1 must lie above alpha*");
  BlockTuning first;
  first.i = 1;
  first.alpha = alpha1;
  first.eps = eps;
  first.verified_tag = Shooter(f1, opt.shots).classify_retry(alpha1).tag;
  c.blocks.push_back(first);

  constexpr int kMaxSteps = 2000;
  for (int i = 2; i <= c.k; ++i) {
    const Tag want = i % 2 == 0 ? Tag::P : Tag::N;
    BlockTuning rec;
    rec.i = i;
    rec.amplitude_sq = amplitudes_sq[static_cast<std::size_t>(i - 2)];
    c.blocks.push_back(rec);
    const auto nl = c.compile(i);
    const Shooter sh(nl, opt.shots);
    const double from = c.blocks[static_cast<std::size_t>(i - 2)].alpha + eps;
    Tag prev = Tag::Undetermined;
    bool found = false;
    for (int j = 1; j <= kMaxSteps; ++j) {
      const double a = from + 0.5 * eps * j;
      const Tag t = sh.classify_retry(a).tag;
      if (t == want && prev == want) {
        c.blocks.back().alpha = a - 0.5 * eps;
        c.blocks.back().iterations = j - 1;
        c.blocks.back().verified_tag = want;
        found = true;
        break;
      }
      prev = t;
    }
    if (!found) throw TuningError("no alpha with tag " + std::string(to_string(want)) + " above the bridge", i);
    c.blocks.back().eps = i < c.k ? eps : 0.0;
  }
  return c;
}

std::string ChainTuning::to_json() const {
  json j;
  j["base"] = {{"p", base.p()},
               {"N", base.dimension()},
               {"supercritical", base.criticality() == Criticality::Supercritical}};
  json ks = json::array();
  for (const auto& kd : kinds) ks.push_back(kind_to_json(kd));
  j["kinds"] = ks;
  j["k"] = k;
  j["alpha_star"] = {{"lo", alpha_star_lo}, {"hi", alpha_star_hi}};
  j["alpha0"] = alpha0;
  j["eps0"] = eps0;
  j["placed"] = placed;
  if (escape) {
    j["escape"] = {{"K", escape->K},         {"K_hat", escape->K_hat}, {"safety", escape->safety},
                   {"probes", escape->probes}, {"a_bar", escape->a_bar}, {"b_bar", escape->b_bar}};
  } else {
    j["escape"] = nullptr;
  }
  json bs = json::array();
  for (const auto& b : blocks) {
    bs.push_back({{"i", b.i},
                  {"alpha", b.alpha},
                  {"eps", b.eps},
                  {"amplitude_sq", b.amplitude_sq},
                  {"verified_tag", to_string(b.verified_tag)},
                  {"iterations", b.iterations},
                  {"r_star", b.r_star},
                  {"momentum_star", b.momentum_star},
                  {"window", {b.window_lo, b.window_hi}},
                  {"window_ok", b.window_ok},
                  {"monotone_response", b.monotone_response},
                  {"momentum_i", b.momentum_i},
                  {"step1_bound", b.step1_bound},
                  {"step1_bound_eps", b.step1_bound_eps},
                  {"r_i", b.r_i},
                  {"r_i_lower_bound", b.r_i_lower_bound}});
  }
  j["blocks"] = bs;
  json brs = json::array();
  for (const auto& b : brackets) {
    brs.push_back({{"lo", b.alpha_lo}, {"hi", b.alpha_hi}, {"tag_lo", to_string(b.tag_lo)},
                   {"tag_hi", to_string(b.tag_hi)}});
  }
  j["brackets"] = brs;
  return j.dump(2);
}

ChainTuning ChainTuning::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ChainTuning c;
    const auto& b = j.at("base");
    c.base = BaseModel(b.at("p").get<double>(), b.at("N").get<int>(),
                       b.value("supercritical", false) ? Criticality::Supercritical : Criticality::Subcritical);
    for (const auto& kd : j.at("kinds")) c.kinds.push_back(kind_from_json(kd));
    c.k = j.at("k").get<int>();
    c.alpha_star_lo = j.at("alpha_star").at("lo").get<double>();
    c.alpha_star_hi = j.at("alpha_star").at("hi").get<double>();
    c.alpha0 = j.at("alpha0").get<double>();
    c.eps0 = j.at("eps0").get<double>();
    c.placed = j.value("placed", false);
    if (!j.at("escape").is_null()) {
      const auto& e = j.at("escape");
      c.escape = EscapeRadiusEstimate{e.at("K").get<double>(),       e.at("K_hat").get<double>(),
                                      e.at("safety").get<double>(),  e.at("probes").get<std::size_t>(),
                                      e.at("a_bar").get<double>(),   e.at("b_bar").get<double>()};
    }
    for (const auto& r : j.at("blocks")) {
      BlockTuning t;
      t.i = r.at("i").get<int>();
      t.alpha = r.at("alpha").get<double>();
      t.eps = r.at("eps").get<double>();
      t.amplitude_sq = r.at("amplitude_sq").get<double>();
      t.verified_tag = tag_from(r.at("verified_tag").get<std::string>());
      t.iterations = r.value("iterations", 0);
      t.r_star = r.value("r_star", 0.0);
      t.momentum_star = r.value("momentum_star", 0.0);
      if (r.contains("window")) {
        t.window_lo = r["window"].at(0).get<double>();
        t.window_hi = r["window"].at(1).get<double>();
      }
      t.window_ok = r.value("window_ok", false);
      t.monotone_response = r.value("monotone_response", false);
      t.momentum_i = r.value("momentum_i", 0.0);
      t.step1_bound = r.value("step1_bound", 0.0);
      t.step1_bound_eps = r.value("step1_bound_eps", 0.0);
      t.r_i = r.value("r_i", 0.0);
      t.r_i_lower_bound = r.value("r_i_lower_bound", 0.0);
      c.blocks.push_back(t);
    }
    for (const auto& r : j.value("brackets", json::array())) {
      GroundStateBracket g;
      g.alpha_lo = r.at("lo").get<double>();
      g.alpha_hi = r.at("hi").get<double>();
      g.tag_lo = tag_from(r.at("tag_lo").get<std::string>());
      g.tag_hi = tag_from(r.at("tag_hi").get<std::string>());
      c.brackets.push_back(g);
    }
    c.bracket_count = c.brackets.size();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed chain tuning JSON: ") + e.what());
  }
}

}  // namespace radshoot

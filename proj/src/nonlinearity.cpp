#include "radshoot/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

// pchip.hpp in Boost 1.74 calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "radshoot/errors.hpp"

namespace radshoot {

// ---------------------------------------------------------------- BaseModel

BaseModel::BaseModel(double p, int dimension, Criticality criticality)
    : p_(p), n_(dimension), criticality_(criticality) {
  if (n_ < 3) throw SpecError("dimension N must be >= 3");
  if (!(p_ > 1.0) || !std::isfinite(p_)) throw SpecError("exponent p must be finite and > 1");
  const double pc = critical_exponent();
  if (criticality_ == Criticality::Subcritical && !(p_ < pc)) {
    std::ostringstream os;
    os << "p = " << p_ << " is not subcritical for N = " << n_ << " (needs p < " << pc << ")";
    throw SpecError(os.str());
  }
  if (criticality_ == Criticality::Supercritical && !(p_ > pc)) {
    throw SpecError("base model marked supercritical but p <= (N+2)/(N-2)");
  }
  beta_ = std::pow((p_ + 1.0) / 2.0, 1.0 / (p_ - 1.0));
}

double BaseModel::f(double s) const noexcept { return std::pow(s, p_) - s; }

double BaseModel::F(double s) const noexcept {
  return std::pow(s, p_ + 1.0) / (p_ + 1.0) - 0.5 * s * s;
}

double BaseModel::F_over_f(double s) const {
  if (s == 0.0) return 0.0;
  const double t = std::pow(s, p_ - 1.0);
  const double den = t - 1.0;
  if (den == 0.0) throw SingularPoint("F/f is singular at s = b", s);
  return s * (t / (p_ + 1.0) - 0.5) / den;
}

double BaseModel::F_over_f_prime(double s) const {
  if (s == 0.0) return 0.5;
  const double fv = f(s);
  if (fv == 0.0) throw SingularPoint("(F/f)' is singular at s = b", s);
  const double fp = p_ * std::pow(s, p_ - 1.0) - 1.0;
  return 1.0 - F(s) * fp / (fv * fv);
}

// --------------------------------------------------------------- block kinds

class SampledCurve {
 public:
  explicit SampledCurve(const SampledBlock& block)
      : lo_(block.s.front()), hi_(block.s.back()),
        interp_(std::vector<double>(block.s), std::vector<double>(block.value)) {}

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double operator()(double s) const { return interp_(std::clamp(s, lo_, hi_)); }
  bool covers(double s) const noexcept { return s >= lo_ && s <= hi_; }

 private:
  double lo_;
  double hi_;
  boost::math::interpolators::pchip<std::vector<double>> interp_;
};

namespace {

void validate_table(const SampledBlock& t) {
  if (t.s.size() != t.value.size() || t.s.size() < 4) {
    throw SpecError("sampled block needs at least four (s, value) pairs of equal length");
  }
  for (std::size_t i = 1; i < t.s.size(); ++i) {
    if (!(t.s[i] > t.s[i - 1])) throw SpecError("sampled block abscissae must increase strictly");
  }
}

double affine_sine(const AffineSineBlock& k, double s) noexcept {
  return k.c0 + k.c1 * s + std::sin(k.omega * s);
}

}  // namespace

double eval_kind(const BlockKind& kind, double s) {
  return std::visit(
      [s](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, PowerBlock>) {
          return std::pow(s, k.q);
        } else if constexpr (std::is_same_v<T, AffineSineBlock>) {
          return affine_sine(k, s);
        } else {
          validate_table(k);
          SampledCurve curve(k);
          if (!curve.covers(s)) throw DomainError("sampled block evaluated outside its table", s);
          return curve(s);
        }
      },
      kind);
}

std::string kind_name(const BlockKind& kind) {
  switch (kind.index()) {
    case 0: return "power";
    case 1: return "affine-sine";
    default: return "sampled";
  }
}

// ------------------------------------------------------ PiecewiseNonlinearity

namespace {

double gk_integrate(const auto& g, double a, double b) {
  if (b <= a) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, b, 12, 1e-13, &err);
}

std::string at(std::size_t j) {
  return "block " + std::to_string(j + 2);
}

}  // namespace

double PiecewiseNonlinearity::block_value(int block, double s) const {
  const BlockSpec& blk = spec_.blocks[static_cast<std::size_t>(block)];
  if (const auto& curve = curves_[static_cast<std::size_t>(block)]) {
    return blk.amplitude_sq * (*curve)(s);
  }
  if (const auto* pw = std::get_if<PowerBlock>(&blk.kind)) {
    return blk.amplitude_sq * std::pow(s, pw->q);
  }
  return blk.amplitude_sq * affine_sine(std::get<AffineSineBlock>(blk.kind), s);
}

PiecewiseNonlinearity PiecewiseNonlinearity::compile(const NonlinearitySpec& spec) {
  PiecewiseNonlinearity nl;
  nl.spec_ = spec;
  const BaseModel& base = spec.base;
  const auto& blocks = spec.blocks;
  if (!(spec.gamma > 0.0)) throw SpecError("gamma must be positive");

  nl.curves_.resize(blocks.size());
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const BlockSpec& blk = blocks[j];
    if (!(blk.amplitude_sq > 0.0) || !std::isfinite(blk.amplitude_sq)) {
      throw SpecError(at(j) + ": amplitude_sq must be positive");
    }
    if (!(blk.bridge_width > 0.0) || !std::isfinite(blk.bridge_width)) {
      throw SpecError(at(j) + ": bridge width must be positive");
    }
    if (!std::isfinite(blk.breakpoint)) throw SpecError(at(j) + ": breakpoint must be finite");
    if (j == 0 && !(blk.breakpoint > base.b())) {
      throw SpecError(at(j) + ": first breakpoint must exceed b so that f > 0 on the bridge");
    }
    if (j > 0) {
      const BlockSpec& prev = blocks[j - 1];
      if (!(prev.breakpoint + prev.bridge_width < blk.breakpoint)) {
        throw SpecError(at(j) + ": segments overlap (alpha_{i-1} + eps_{i-1} >= alpha_i)");
      }
    }
    if (const auto* t = std::get_if<SampledBlock>(&blk.kind)) {
      validate_table(*t);
      nl.curves_[j] = std::make_shared<const SampledCurve>(*t);
    }
  }
  if (!blocks.empty() && !(blocks.back().breakpoint + blocks.back().bridge_width < spec.gamma)) {
    throw SpecError("last block starts beyond gamma");
  }

  // Segment table.
  std::vector<Segment>& segs = nl.segments_;
  Segment s0;
  s0.kind = SegmentKind::Base;
  s0.lo = 0.0;
  s0.hi = blocks.empty() ? spec.gamma : blocks.front().breakpoint;
  segs.push_back(s0);
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const BlockSpec& blk = blocks[j];
    Segment bridge;
    bridge.kind = SegmentKind::Bridge;
    bridge.block = static_cast<int>(j);
    bridge.lo = blk.breakpoint;
    bridge.hi = blk.breakpoint + blk.bridge_width;
    Segment body;
    body.kind = SegmentKind::Block;
    body.block = static_cast<int>(j);
    body.lo = bridge.hi;
    body.hi = j + 1 < blocks.size() ? blocks[j + 1].breakpoint : spec.gamma;
    segs.push_back(bridge);
    segs.push_back(body);
  }

  // Positivity of each block on its own segment, and table coverage.
  for (const Segment& seg : segs) {
    if (seg.kind != SegmentKind::Block) continue;
    const auto j = static_cast<std::size_t>(seg.block);
    const BlockSpec& blk = blocks[j];
    if (const auto* pw = std::get_if<PowerBlock>(&blk.kind)) {
      if (!(seg.lo > 0.0) || !std::isfinite(pw->q)) {
        throw SpecError(at(j) + ": power block must start at s > 0");
      }
    } else if (const auto* as = std::get_if<AffineSineBlock>(&blk.kind)) {
      const double hi = std::min(seg.hi, seg.lo + 1e3);
      if (seg.hi == kUnbounded) {
        if (as->c1 < 0.0 || (as->c1 == 0.0 && as->omega != 0.0 && as->c0 <= 1.0)) {
          throw SpecError(at(j) + ": affine-sine block is not positive on an unbounded segment");
        }
      }
      const double dstep = as->omega == 0.0 ? (hi - seg.lo) : std::numbers::pi / (16.0 * std::abs(as->omega));
      const auto n = static_cast<std::size_t>(std::clamp(std::ceil((hi - seg.lo) / dstep), 64.0, 1e6));
      for (std::size_t i = 0; i <= n; ++i) {
        const double s = seg.lo + (hi - seg.lo) * static_cast<double>(i) / static_cast<double>(n);
        if (!(affine_sine(*as, s) > 0.0)) {
          std::ostringstream os;
          os << at(j) << ": block function <= 0 at s = " << s;
          throw SpecError(os.str());
        }
      }
    } else {
      const auto& t = std::get<SampledBlock>(blk.kind);
      for (double v : t.value) {
        if (!(v > 0.0)) throw SpecError(at(j) + ": sampled block has a non-positive value");
      }
      const SampledCurve& c = *nl.curves_[j];
      if (!c.covers(seg.lo) || (seg.hi != kUnbounded && !c.covers(seg.hi))) {
        throw SpecError(at(j) + ": sampled table does not cover its segment and bridge");
      }
    }
  }

  // Bridge endpoints are always recomputed from the neighbouring segments.
  for (std::size_t k = 1; k < segs.size(); k += 2) {
    Segment& bridge = segs[k];
    const auto j = static_cast<std::size_t>(bridge.block);
    bridge.y_lo = j == 0 ? base.f(bridge.lo) : nl.block_value(static_cast<int>(j - 1), bridge.lo);
    bridge.y_hi = nl.block_value(static_cast<int>(j), bridge.hi);
    if (!(bridge.y_lo > 0.0) || !(bridge.y_hi > 0.0)) {
      throw SpecError(at(j) + ": bridge endpoint value is not positive");
    }
  }

  // Cumulative primitive at every segment start.
  segs[0].F_lo = 0.0;
  for (std::size_t k = 1; k < segs.size(); ++k) {
    segs[k].F_lo = nl.segment_F(segs[k - 1], segs[k].lo);
  }

  // Junctions and beta.
  for (const BlockSpec& blk : blocks) {
    nl.junctions_.push_back(blk.breakpoint);
    nl.junctions_.push_back(blk.breakpoint + blk.bridge_width);
  }
  nl.beta_ = base.beta();
  if (!blocks.empty() && blocks.front().breakpoint < base.beta()) {
    // F(beta_base) is no longer zero; find the sign change of the full F.
    double hi = blocks.front().breakpoint;
    while (nl.F(hi) <= 0.0 && hi * 2.0 < spec.gamma) hi *= 2.0;
    if (nl.F(hi) > 0.0) {
      boost::uintmax_t iters = 200;
      auto r = boost::math::tools::toms748_solve([&](double s) { return nl.F(s); }, base.b(), hi,
                                                 boost::math::tools::eps_tolerance<double>(50), iters);
      nl.beta_ = 0.5 * (r.first + r.second);
    } else {
      nl.beta_ = spec.gamma;
    }
  }
  nl.junctions_.push_back(base.b());
  if (nl.beta_ < spec.gamma) nl.junctions_.push_back(nl.beta_);
  std::sort(nl.junctions_.begin(), nl.junctions_.end());
  nl.junctions_.erase(std::unique(nl.junctions_.begin(), nl.junctions_.end()), nl.junctions_.end());
  return nl;
}

std::size_t PiecewiseNonlinearity::segment_index(double s) const noexcept {
  auto it = std::upper_bound(segments_.begin(), segments_.end(), s,
                             [](double v, const Segment& seg) { return v < seg.lo; });
  if (it == segments_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(segments_.begin(), it) - 1);
}

void PiecewiseNonlinearity::check_domain(double s) const {
  if (!(s >= 0.0) || !(s < spec_.gamma)) {
    std::ostringstream os;
    os << "s = " << s << " outside the nonlinearity domain [0, " << spec_.gamma << ")";
    throw DomainError(os.str(), s);
  }
  if (!segments_.empty()) {
    const Segment& last = segments_.back();
    if (last.kind == SegmentKind::Block && curves_[static_cast<std::size_t>(last.block)] &&
        s > curves_[static_cast<std::size_t>(last.block)]->hi()) {
      throw DomainError("s beyond the sampled table of the last block", s);
    }
  }
}

double PiecewiseNonlinearity::segment_f(const Segment& seg, double s) const {
  switch (seg.kind) {
    case SegmentKind::Base:
      return spec_.base.f(s);
    case SegmentKind::Bridge: {
      const double t = (s - seg.lo) / (seg.hi - seg.lo);
      return (1.0 - t) * seg.y_lo + t * seg.y_hi;
    }
    case SegmentKind::Block:
      return block_value(seg.block, s);
  }
  return 0.0;
}

double PiecewiseNonlinearity::segment_F(const Segment& seg, double s) const {
  switch (seg.kind) {
    case SegmentKind::Base:
      return spec_.base.F(s);
    case SegmentKind::Bridge:
      // Exact for the affine integrand.
      return seg.F_lo + 0.5 * (s - seg.lo) * (seg.y_lo + segment_f(seg, s));
    case SegmentKind::Block: {
      const BlockSpec& blk = spec_.blocks[static_cast<std::size_t>(seg.block)];
      if (const auto* pw = std::get_if<PowerBlock>(&blk.kind)) {
        const double q1 = pw->q + 1.0;
        if (q1 == 0.0) return seg.F_lo + blk.amplitude_sq * std::log(s / seg.lo);
        return seg.F_lo + blk.amplitude_sq * (std::pow(s, q1) - std::pow(seg.lo, q1)) / q1;
      }
      return seg.F_lo + gk_integrate([&](double t) { return block_value(seg.block, t); }, seg.lo, s);
    }
  }
  return 0.0;
}

double PiecewiseNonlinearity::f(double s) const {
  check_domain(s);
  return segment_f(segments_[segment_index(s)], s);
}

double PiecewiseNonlinearity::F(double s) const {
  check_domain(s);
  return segment_F(segments_[segment_index(s)], s);
}

double PiecewiseNonlinearity::Q(double s) const {
  const int n = dimension();
  return 2.0 * n * F(s) - (n - 2.0) * s * f(s);
}

double PiecewiseNonlinearity::f_extended(double s) const noexcept {
  if (s < 0.0) {
    // Odd extension of the base model; C^1 at zero since p > 1.
    return -spec_.base.f(-s);
  }
  return segment_f(segments_[segment_index(s)], s);
}

double PiecewiseNonlinearity::F_over_f(double s) const {
  check_domain(s);
  const Segment& seg = segments_[segment_index(s)];
  if (seg.kind == SegmentKind::Base) return spec_.base.F_over_f(s);
  const double fv = segment_f(seg, s);
  if (std::abs(fv) < 1e-6) throw SingularPoint("F/f requested too close to a zero of f", s);
  return segment_F(seg, s) / fv;
}

PiecewiseNonlinearity compile(const BaseModel& base, std::vector<BlockSpec> blocks, double gamma) {
  NonlinearitySpec spec{base, std::move(blocks), gamma};
  return PiecewiseNonlinearity::compile(spec);
}

double eval_f(const PiecewiseNonlinearity& nl, double s) { return nl.f(s); }
double eval_F(const PiecewiseNonlinearity& nl, double s) { return nl.F(s); }
double eval_Q(const PiecewiseNonlinearity& nl, double s) { return nl.Q(s); }

}  // namespace radshoot

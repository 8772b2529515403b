#pragma once

// Monitors evaluated on dense output: the Erbe-Tang functional P(s), the
// comparison functional W(s), the Pohozaev energy E(r), and the explicit
// singular solution of the pure-power equation.

#include <iosfwd>

#include "radshoot/nonlinearity.hpp"
#include "radshoot/odeint.hpp"

namespace radshoot {

/// Part of a trajectory on which u is strictly decreasing, with the inverse
/// map s -> r(s). The branch may start at r = 0 where u' = 0.
class MonotoneBranch {
 public:
  /// Starts at r_begin and extends while u' < -1e-12. Holds a reference to `tr`.
  MonotoneBranch(const Trajectory& tr, double r_begin = 0.0);

  double r_lo() const noexcept { return r_lo_; }
  double r_hi() const noexcept { return r_hi_; }
  /// u(r_hi) and u(r_lo).
  double s_min() const noexcept { return s_min_; }
  double s_max() const noexcept { return s_max_; }
  bool contains(double s) const noexcept { return s >= s_min_ && s <= s_max_; }

  /// r(s); throws DomainError outside [s_min, s_max].
  double r_of(double s) const;
  RadialState state_at(double s) const;
  const Trajectory& trajectory() const noexcept { return *tr_; }

 private:
  const Trajectory* tr_;
  double r_lo_;
  double r_hi_;
  double s_min_;
  double s_max_;
  std::size_t i_lo_;  // sample indices bounding the branch
  std::size_t i_hi_;
};

enum class PForm {
  Direct,    // -2N (F/f) r^{N-1}/r' - r^N/r'^2 - 2 r^N F
  Factored,  // 2 r^N (N (F/f) |u'|/r - u'^2/2 - F)
};

/// P(s) along the branch. Throws SingularPoint at zeros of f.
double erbe_tang_P(const PiecewiseNonlinearity& nl, const MonotoneBranch& branch, double s,
                   PForm form = PForm::Direct);

/// dP/ds = (N - 2 - 2N (F/f)'(s)) r^{N-1} / r'.
double erbe_tang_P_s(const PiecewiseNonlinearity& nl, const MonotoneBranch& branch, double s);

/// (F/f)'(s): closed form on the base segment, centered differences elsewhere.
double F_over_f_prime(const PiecewiseNonlinearity& nl, double s);

/// E(r) = r^N (u'^2 + 2F(u)) + (N-2) r^{N-1} u' u.
double pohozaev_E(const PiecewiseNonlinearity& nl, const RadialState& st);
double pohozaev_E(const PiecewiseNonlinearity& nl, const Trajectory& tr, double r);
/// E'(r) = r^{N-1} (2N F(u) - (N-2) f(u) u) = r^{N-1} Q(u).
double pohozaev_E_prime(const PiecewiseNonlinearity& nl, const RadialState& st);
double pohozaev_E_prime(const PiecewiseNonlinearity& nl, const Trajectory& tr, double r);

/// u'(r(s))^2 + 2F(s).
double w_radicand(const PiecewiseNonlinearity& nl, const MonotoneBranch& branch, double s);
/// W(s) = r(s) sqrt(u'(r(s))^2 + 2F(s)); throws NegativeRadicand when the
/// radicand is negative.
double w_functional(const PiecewiseNonlinearity& nl, const MonotoneBranch& branch, double s);

/// r^{2(N-1)} u'^2 + 2F(u), evaluated exactly as written.
double weighted_decay_quantity(const PiecewiseNonlinearity& nl, const RadialState& st);

/// C(N, q) = (2/(q-1) (N - 2 - 2/(q-1)))^{1/(q-1)}; requires q > N/(N-2).
double singular_constant(int n, double q);
/// v_A(r) = C(N,q) A^{-2/(q-1)} r^{-2/(q-1)} solves v'' + (N-1)/r v' + A^2 v^q = 0.
double singular_solution(int n, double q, double a, double r);
/// v_A'' + (N-1)/r v_A' + A^2 v_A^q with closed-form derivatives.
double singular_residual(int n, double q, double a, double r);

/// CSV "s,P,W" on `count` evenly spaced s in the branch; singular cells are empty.
void write_branch_csv(std::ostream& os, const PiecewiseNonlinearity& nl, const MonotoneBranch& branch,
                      int count);
/// CSV "r,E,E_prime" on `count` evenly spaced r of the trajectory.
void write_energy_csv(std::ostream& os, const PiecewiseNonlinearity& nl, const Trajectory& tr, int count);

}  // namespace radshoot

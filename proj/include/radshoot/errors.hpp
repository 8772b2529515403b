#pragma once

#include <stdexcept>
#include <string>

namespace radshoot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A nonlinearity (or its primitive) was evaluated outside [0, gamma).
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double s) : Error(what), value_(s) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Construction parameters violate a structural invariant.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// A ratio such as F/f was requested at a zero of its denominator.
class SingularPoint : public Error {
 public:
  SingularPoint(const std::string& what, double s) : Error(what), value_(s) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// The W functional was evaluated where u'^2 + 2F(s) < 0.
class NegativeRadicand : public Error {
 public:
  NegativeRadicand(const std::string& what, double s, double radicand)
      : Error(what), s_(s), radicand_(radicand) {}
  double s() const noexcept { return s_; }
  double radicand() const noexcept { return radicand_; }

 private:
  double s_;
  double radicand_;
};

/// A shot could not be classified (r_max reached, step failure, domain exit).
class UndeterminedShot : public Error {
 public:
  UndeterminedShot(const std::string& what, double alpha) : Error(what), alpha_(alpha) {}
  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
};

/// A shot turned around before reaching the requested level.
class LevelNotReached : public Error {
 public:
  using Error::Error;
};

/// A constant search in the tuning module hit its cap.
class TuningError : public Error {
 public:
  TuningError(const std::string& what, int block) : Error(what), block_(block) {}
  int block() const noexcept { return block_; }

 private:
  int block_;
};

/// Malformed or out-of-range configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace radshoot

#pragma once

#include <stdexcept>
#include <string>

namespace dirac {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A field produced a non-finite value (NaN or inf) or was evaluated
/// outside its chart.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, int index = -1)
      : Error(index >= 0 ? what + " (component " + std::to_string(index) + ")" : what),
        index_(index) {}
  int index() const noexcept { return index_; }

 private:
  int index_;
};

/// Dimensions of arguments do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Constraint matrix lost rank.
class RankError : public Error {
 public:
  using Error::Error;
};

/// The Lagrange-Dirac KKT system could not be solved.
class SingularKKT : public Error {
 public:
  using Error::Error;
};

/// Integrated state left the representable range.
class BlowUp : public Error {
 public:
  using Error::Error;
};

/// System does not have the abelian Chaplygin structure that was requested.
class NotChaplygin : public Error {
 public:
  using Error::Error;
};

/// Legendre transform of the (reduced) Lagrangian is not invertible.
class SingularReducedLegendre : public Error {
 public:
  using Error::Error;
};

/// The almost-symplectic form is degenerate.
class SingularAlmostSymplectic : public Error {
 public:
  using Error::Error;
};

/// Bad parameters, bad configuration file, bad command-line input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dirac

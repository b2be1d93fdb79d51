#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fpp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BadParams : public Error {
 public:
  using Error::Error;
};

/// The traded-asset system (sigma^i)^T lambda = mu~^i has no solution.
class NoRiskPremiumSolution : public Error {
 public:
  using Error::Error;
};

/// A shooting solution of the elliptic ODE reached a non-positive value.
class PositivityLost : public Error {
 public:
  PositivityLost(double y, const std::string& what) : Error(what), y_(y) {}
  double where() const noexcept { return y_; }

 private:
  double y_;
};

class NegativeLambda : public Error {
 public:
  using Error::Error;
};

/// A spectral atom's minimal solution fails the elliptic residual check.
class AtomInconsistent : public Error {
 public:
  AtomInconsistent(std::size_t index, const std::string& what) : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class DegenerateDelta : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class NonIntegrableAtZero : public Error {
 public:
  using Error::Error;
};

class NoRealBranch : public Error {
 public:
  using Error::Error;
};

class NotWellPosed : public Error {
 public:
  using Error::Error;
};

class SupportViolation : public Error {
 public:
  using Error::Error;
};

class DegenerateSecondOrder : public Error {
 public:
  using Error::Error;
};

class ExplosionDetected : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace fpp

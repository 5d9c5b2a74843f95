#pragma once

#include <stdexcept>
#include <string>

namespace rho_bayes {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation
/// (negative density, NaN, malformed probability vector, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature did not reach the requested tolerance within the
/// subdivision budget. The best available estimate is kept.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double best_estimate, double error_estimate)
      : Error(what), best_estimate_(best_estimate), error_estimate_(error_estimate) {}

  double best_estimate() const noexcept { return best_estimate_; }
  double error_estimate() const noexcept { return error_estimate_; }

 private:
  double best_estimate_;
  double error_estimate_;
};

/// Every member of a net has log-likelihood -inf (or zero prior mass).
class DegeneratePosteriorError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rho_bayes

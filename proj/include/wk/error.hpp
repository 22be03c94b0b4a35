#pragma once

#include <stdexcept>
#include <string>

namespace wk {

// Base of every error raised by the toolkit. The C layer maps the
// concrete type onto a status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition of an operation was violated by its inputs.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// An iterative solver stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual, int iterations)
      : Error(what), residual_(last_residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

// Experiment configuration is malformed or incomplete.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An estimate was asked for in a regime where it does not apply.
class RegimeError : public Error {
 public:
  using Error::Error;
};

}  // namespace wk

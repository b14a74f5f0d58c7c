#pragma once

#include <stdexcept>
#include <string>

namespace etsim {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Lyapunov equation has no positive-definite solution (input not Hurwitz).
class NoSolutionError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A coupling, diffusion or sensitivity function returned a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Event times on a channel must be strictly increasing.
class SequencingError : public Error {
 public:
  using Error::Error;
};

class ExperimentFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace etsim

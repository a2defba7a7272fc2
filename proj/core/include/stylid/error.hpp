#pragma once

#include <stdexcept>
#include <string>

namespace stylid {

// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Diffusion step index outside [1, T].
class StepError : public Error {
 public:
  using Error::Error;
};

// A scalar objective returned NaN/Inf.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Raised when an experiment observes a case contradicting a checked claim.
class AssertionFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace stylid

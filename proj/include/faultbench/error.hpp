#ifndef FAULTBENCH_ERROR_HPP_
#define FAULTBENCH_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace faultbench {

/// Base of every error raised by the library. The CLI maps the three
/// families below onto exit codes 1 (config), 2 (data) and 3 (evaluation).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration (fault configs, experiment specs).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A fault run was pointed at a baseline produced from a different setup.
class StaleBaselineError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Problems with input data: I/O, parse failures, ordering, image formats.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class OrderingError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Failures while scoring or estimating: association, alignment, numerics.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class AssociationError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

class DegenerateAlignmentError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

class NumericalError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};


}  // namespace faultbench

#endif  // FAULTBENCH_ERROR_HPP_

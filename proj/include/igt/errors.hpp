#pragma once

#include <stdexcept>
#include <string>

namespace igt {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent bag/manifest input.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint does not match the model it is loaded into.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// The metric is not defined for the given labels (e.g. AUROC with one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace igt

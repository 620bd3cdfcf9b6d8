#pragma once

#include <stdexcept>
#include <string>

namespace flqdsnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration values (qubit counts, class counts, thresholds, ...).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// API misuse: bad indices, mismatched shapes, empty inputs.
class UsageError : public Error {
  public:
    using Error::Error;
};

/// Input data that violates a documented precondition.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Numerical failure during optimisation (e.g. NaN gradients).
class TrainingError : public Error {
  public:
    using Error::Error;
};

/// CSV ingestion failures; the message carries line/column coordinates.
class IngestionError : public Error {
  public:
    using Error::Error;
};

/// Feature reduction could not produce the requested number of components.
class ReductionError : public Error {
  public:
    using Error::Error;
};

/// Train/test split could not be stratified.
class SplitError : public Error {
  public:
    using Error::Error;
};

} // namespace flqdsnn

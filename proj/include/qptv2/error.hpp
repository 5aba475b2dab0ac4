#pragma once

#include <stdexcept>
#include <string>

namespace qptv2 {

// Invalid argument value or shape passed to an operation.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent model or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or malformed data (manifest rows, labels, images).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Correlation undefined because a column has zero variance.
class CorrelationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Evaluation protocol cannot be carried out (e.g. degenerate split).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qptv2

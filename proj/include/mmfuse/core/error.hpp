#pragma once

#include <stdexcept>
#include <string>

namespace mmfuse {

// Shape contract violated by an operation's inputs.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// NaN or Inf produced (or fed) at an op boundary.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A metric is undefined for the given inputs (e.g. Pearson on a constant series).
class UndefinedMetricError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace mmfuse

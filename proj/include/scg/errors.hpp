#pragma once

#include <stdexcept>
#include <string>

namespace scg {

/// Vector operands whose lengths disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter outside its admissible range, or a malformed config file.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Preconditioner diagonal with a nonpositive entry.
class SingularPreconditionerError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A NaN or Inf was produced inside a run.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A diagnostic that cannot be computed from the data at hand
/// (unknown optimum, nonpositive values in a log fit, no traces).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scg

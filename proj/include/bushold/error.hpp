#pragma once

#include <stdexcept>
#include <string>

namespace bushold {

/// Missing or unreadable input file.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input parsed but violates a domain invariant. The message names the
/// offending file, row and column where one exists.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition on a function argument violated.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scenario cannot be simulated as configured (e.g. fleet vocabulary exhausted).
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient.
class GradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bushold

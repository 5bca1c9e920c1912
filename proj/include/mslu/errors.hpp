#pragma once

#include <stdexcept>
#include <string>

namespace mslu {

// Exception hierarchy. The CLI maps each family onto a process exit code.

/// Invalid input: bad dimensions, violated invariants, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem failures (missing files, unwritable outputs).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown: singular Fisher matrix, non-finite posterior, ...
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mslu

#pragma once

#include <stdexcept>
#include <string>

namespace wigtomo {

// Failure categories that map onto process exit codes in the CLI.
// Precondition violations on library calls use std::invalid_argument.

/// Unreadable, missing or malformed input data (exit code 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The heralded data carry no detectable excess over vacuum (exit code 3).
class NoSignalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Estimation failed: zero likelihood, non-convergence, bad replica (exit code 4).
class ReconstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wigtomo

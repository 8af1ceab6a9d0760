#pragma once

#include <stdexcept>
#include <string>

namespace kronsolve {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the arguments was violated (shape mismatch, range, non-finite data).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// An iterative routine broke down or diverged.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, int iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}

  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

/// A dense fallback or oracle refused to allocate an operator above its size guard.
class SizeGuardExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace kronsolve

#pragma once

#include <stdexcept>
#include <string>

namespace csflock {

/// Raised when an input violates a documented invariant (bad rates, bad grid,
/// malformed configuration).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot produce a trustworthy result, e.g.
/// the eigensolver hits its sweep cap.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace csflock

#pragma once

#include <stdexcept>
#include <string>

namespace vy {

// Invalid argument or configuration value.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative method (quadrature, Newton, ODE step control) gave up.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data reached the edge of the truncated domain, or left it.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact integer arithmetic exceeded its representation.
class OverflowError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

}  // namespace vy

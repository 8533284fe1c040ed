#pragma once

#include <stdexcept>
#include <string>

namespace fapi {

/// Raised when a caller breaks a documented precondition (dimensions,
/// simplex rows, index ranges, config constraints).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot meet its stated tolerance or
/// produces non-finite values.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace fapi

#pragma once

#include <stdexcept>
#include <string>

namespace unida {

// Shapes that do not line up (matmul inner dims, bias width, ...).
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Caller violated a documented precondition.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration: incompatible architecture, degenerate label sets, bad plan.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file. Messages carry the offending line number.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN or Inf produced by a forward pass or loss.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace unida

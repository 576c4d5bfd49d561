#pragma once

#include <stdexcept>
#include <string>

namespace sae {

/// Invalid input data, configuration or arguments. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerically degenerate input (zero variance, non-finite density, ...). Exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sae

#pragma once

#include <stdexcept>
#include <string>

namespace amr {

// Shape/rank violations in tensor ops.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid scalar arguments (coefficients outside range, bad config values).
struct ArgumentError : std::invalid_argument {
  explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Misuse of stateful machinery (double backward, missing gradients).
struct StateError : std::logic_error {
  explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

// Non-finite values encountered during a forward/backward pass.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace amr

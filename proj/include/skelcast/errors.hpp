#pragma once

#include <stdexcept>
#include <string>

namespace skelcast {

// Shape/dimension disagreements between tensors or model parameters.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable, malformed or inconsistent input data.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (losses, gradients).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace skelcast

#pragma once

#include <stdexcept>
#include <string>

namespace wpnode {

// Bad configuration or usage: wrong shapes, unknown presets, invalid knobs.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failure at runtime: solver blowup, step-size underflow, divergence.
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& msg, long last_valid = -1)
      : std::runtime_error(msg), last_valid_index(last_valid) {}
  long last_valid_index;
};

}  // namespace wpnode

#pragma once

#include <stdexcept>
#include <string>

namespace echofight {

// Shape mismatches name the expected vs. actual shape in the message.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// An operation was called in a state it does not support (backward without a
// recorded graph, step after round end, missing gradients, ...).
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

// Bad run configuration: unknown keys, missing files, mismatched checkpoints.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace echofight

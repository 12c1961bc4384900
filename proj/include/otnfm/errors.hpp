#pragma once

#include <stdexcept>
#include <string>

namespace otnfm {

// Generic hard error (shape mismatches, invalid arguments, bad state).
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Configuration / input-file problems. The CLI maps these to exit code 2.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Non-finite values encountered mid-run. The CLI maps these to exit code 3.
struct NumericAbort : Error {
  NumericAbort(const std::string& what, long step_index)
      : Error(what + " (step " + std::to_string(step_index) + ")"), step(step_index) {}
  long step;
};

}  // namespace otnfm

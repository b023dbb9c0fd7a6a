#pragma once

#include <stdexcept>

namespace execsim {

// Invalid or inconsistent configuration, detected before any run starts.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace execsim

#pragma once

#include <stdexcept>
#include <string>

namespace stresslab {

// Validation errors are caller mistakes (bad files, bad plans, bad options)
// and map to process exit code 1.  Runtime failures are environment problems
// (adapter died, IO failure) and map to exit code 2.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

class runtime_failure : public std::runtime_error {
 public:
  explicit runtime_failure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stresslab

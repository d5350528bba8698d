#pragma once

#include <stdexcept>
#include <string>

namespace funczidm {

// Bad inputs: malformed data, config, or precondition violations. CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Chain blew up (non-finite log joint, runaway coefficients). CLI exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace funczidm

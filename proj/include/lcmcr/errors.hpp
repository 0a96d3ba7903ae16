#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lcmcr {

/// One breached invariant. `code` is stable and machine-readable.
struct Violation {
  std::string code;
  std::string message;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  ValidationError(std::string code, std::string message);

  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Raised when an estimate or fit cannot be produced numerically
/// (unbounded class size, IPF stall, every start failing).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense enumeration requested beyond the supported register count.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lcmcr

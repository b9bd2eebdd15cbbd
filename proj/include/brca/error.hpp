#pragma once

#include <stdexcept>
#include <string>

namespace brca {

// Caller broke a precondition: wrong shapes, out-of-range arguments.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input data that cannot be represented (e.g. a raw text containing a null byte).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced NaN/Inf or a sustained loss blow-up.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) {
    throw ContractViolation(message);
  }
}

}  // namespace brca

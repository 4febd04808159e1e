#pragma once

#include <stdexcept>
#include <string>

namespace sfnn {

// Exception hierarchy. The CLI maps each class onto a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structural or argument problems: bad shapes, invalid specs, bad flags.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Files that cannot be opened, parsed, or that fail format checks.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or diverging optimisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfnn

#pragma once

#include <stdexcept>
#include <string>

namespace pvc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes, bad configuration, unreadable input. Maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-convergence, non-PSD input, failed gradient check. Maps to CLI exit code 2.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace pvc

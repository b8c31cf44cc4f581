#pragma once

#include <stdexcept>
#include <string>

namespace irtvuong {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable input (CSV, JSON, designs).
class InputError : public Error {
 public:
  using Error::Error;
};

// A ModelSpec that cannot be fitted or is internally inconsistent.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Parameter values outside the model's valid region, e.g. unordered GRM
// thresholds.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown during estimation or testing.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace irtvuong

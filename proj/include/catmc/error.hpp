#pragma once

#include <stdexcept>
#include <string>

namespace catmc {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on the caller's input was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// The operation does not exist for this kind of object (e.g. derivatives of
// a tabular link family).
class Unsupported : public Error {
 public:
  using Error::Error;
};

// The link family has no usable curvature on the requested interval.
class DegenerateFamily : public Error {
 public:
  using Error::Error;
};

// The training data cannot identify the model (e.g. a single category).
class DegenerateData : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed (SVD, non-finite iterate, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace catmc

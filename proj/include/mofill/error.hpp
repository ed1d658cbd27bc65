#pragma once

#include <stdexcept>
#include <string>

namespace mofill {

// Base class for every failure the library reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor/clip/mask shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable files, corrupted checkpoints, non-finite numbers.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace mofill

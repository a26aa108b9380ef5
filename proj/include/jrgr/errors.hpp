#pragma once

#include <stdexcept>
#include <string>

namespace jrgr {

// Root of every error raised by the library. Subclasses map onto the error
// kinds the CLI turns into exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An image is too small for the requested crop or window.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Dataset content is missing or insufficient.
class DataError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// A checkpoint does not match the architecture it is loaded into.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

// A loss became non-finite during training.
class NanAbort : public Error {
 public:
  using Error::Error;
};

}  // namespace jrgr

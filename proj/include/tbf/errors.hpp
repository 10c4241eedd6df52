#pragma once

#include <stdexcept>
#include <string>

namespace tbf {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-positive volume extent, or a header that declares one.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Two volumes (or a volume and a tape/cache) disagree on dims.
class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in input data, invalid parameters, empty masks.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A ForwardCache or PipelineTape used with parameters other than the ones
// it was recorded with.
class StaleCacheError : public Error {
 public:
  using Error::Error;
};

// Non-finite gradient during optimisation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tbf

#pragma once

#include <stdexcept>
#include <string>

namespace sparselab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration (bad flag, bad TOML, unknown recipe).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing input data (IDX files, CSV inputs).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint could not be read back (version, architecture, corruption).
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// A numerical failure such as a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sparselab

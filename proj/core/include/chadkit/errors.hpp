#pragma once

#include <stdexcept>
#include <string>

namespace chadkit {

// Base for every error raised by the toolkit. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or schema mismatch between a tensor/record and the layer or
// schema it is fed to.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (CSV syntax, non-numeric cells, missing columns).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Serialized model does not match the data or schema it is used with.
class ModelMismatchError : public Error {
 public:
  using Error::Error;
};

// Metric undefined for the given labels (e.g. a single class).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace chadkit

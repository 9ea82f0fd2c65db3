#pragma once

#include <stdexcept>
#include <string>

namespace cafp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Schema document is malformed or names columns the CSV does not have.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A CSV cell or document could not be parsed. Messages name row and column.
class ParseError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

/// Dataset violates a structural invariant (missing group, missing label, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class CertificateError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cafp

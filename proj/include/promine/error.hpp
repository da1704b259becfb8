#pragma once

#include <stdexcept>
#include <string>

namespace promine {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: out-of-range scores, malformed rows, missing fields.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad experiment/spec configuration (unknown names, bad values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Named method that is recognised but deliberately not built.
class NotImplementedError : public Error {
 public:
  using Error::Error;
};

// Row or artifact does not match the schema a model was trained on.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace promine

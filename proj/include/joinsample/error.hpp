#pragma once

#include <stdexcept>
#include <string>

namespace joinsample {

// Base class for every error raised by the library. The CLI maps
// DomainError-derived failures to exit status 1 and UsageError to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// A ratio estimator was evaluated on an empty join.
class UndefinedRatioError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Two samples (or two sketches) were produced under incompatible shared
// randomness and cannot be combined.
class CoordinationError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace joinsample

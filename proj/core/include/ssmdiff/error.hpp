#pragma once

#include <stdexcept>
#include <string>

namespace ssmdiff {

// Root of every error thrown by the library. Each subclass names the kind of
// contract that was broken so callers (the CLI in particular) can map them to
// distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or combination (bad layer sizes, schedule
// bounds, grid dimensions, config file fields).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation called outside its documented domain (h <= 0, count == 0, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between vectors, parameter sets or caches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Index outside its valid range (diffusion step, state, action).
class IndexError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Object in the wrong state for the request (e.g. sampling an empty buffer).
class StateError : public Error {
 public:
  using Error::Error;
};

// Caller violated a branch contract (L1 loss on a bootstrap tuple, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Feature recognised but not available for the requested environment.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssmdiff

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cil {

// Every error raised by the library derives from Error so callers can map
// failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

/// Numerical degeneracy in the head-direction computations.
class HeadError : public Error {
 public:
  using Error::Error;
};

/// Broken internal invariant (id collisions, weight constraint violations).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cil

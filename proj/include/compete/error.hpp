#pragma once

#include <stdexcept>
#include <string>

namespace compete {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A mesh failed validation; the message names the defect.
class MeshError : public Error {
 public:
  using Error::Error;
};

/// Two functions (or a function and a sample set) live on different levels.
class LevelMismatch : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Requested catalog id (convection term, weight, kernel, lift) does not exist.
class UnknownCatalogId : public Error {
 public:
  using Error::Error;
};

}  // namespace compete

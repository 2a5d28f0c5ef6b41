#pragma once

#include <stdexcept>
#include <string>

namespace horq {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Rank, extent, or geometry mismatch.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Value outside the admitted domain (non-finite scalar, non-±1 element, K < 1, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Malformed or truncated file.
class IoError : public Error {
public:
  using Error::Error;
};

/// Invalid trainer or CLI configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace horq

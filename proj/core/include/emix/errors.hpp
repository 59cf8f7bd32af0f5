#pragma once

#include <stdexcept>
#include <string>

namespace emix {

/// Tensor or vector shapes that do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An API called out of order (backward before forward, step after done, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// NaN / Inf where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or malformed files.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emix

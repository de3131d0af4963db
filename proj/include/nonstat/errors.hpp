#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nonstat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or precondition violation (validation class).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Inconsistent configuration, e.g. no buffer and no boundary clipping.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Mismatched grids or vector lengths.
class ShapeError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed file header; `key()` names the offending entry.
class FormatError : public Error {
public:
  FormatError(std::string key, const std::string& what)
      : Error("format error [" + key + "]: " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

/// Payload shorter or longer than the header announces.
class TruncationError : public Error {
public:
  using Error::Error;
};

/// Nodes with zero sample standard deviation during standardization.
class DegenerateError : public Error {
public:
  DegenerateError(const std::string& what, std::vector<std::size_t> nodes)
      : Error(what), nodes_(std::move(nodes)) {}
  const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }

private:
  std::vector<std::size_t> nodes_;
};

/// Sparse or dense factorization hit a non-positive pivot.
class FactorizationError : public Error {
public:
  FactorizationError(const std::string& what, std::ptrdiff_t pivot)
      : Error(what), pivot_(pivot) {}
  /// Index of the failing pivot in the original (unpermuted) ordering, or -1.
  std::ptrdiff_t pivot() const noexcept { return pivot_; }

private:
  std::ptrdiff_t pivot_;
};

/// Calibration objective could not be bracketed or was not monotone.
class CalibrationError : public Error {
public:
  using Error::Error;
};

} // namespace nonstat

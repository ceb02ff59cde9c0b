#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mwd {

/// Caller violated a documented precondition (bad extents, divisibility, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A memory or simulation budget could not be met.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, std::size_t requested_bytes)
      : std::runtime_error(what), requested_bytes_(requested_bytes) {}
  std::size_t requested_bytes() const noexcept { return requested_bytes_; }

 private:
  std::size_t requested_bytes_;
};

/// Malformed or mismatched wire data.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant, e.g. a tile reported finished twice.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mwd

#pragma once

#include <stdexcept>
#include <string>

namespace pestvl {

// Bad configuration (file contents, unknown keys, invalid values). CLI exit 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Bad or missing data on disk (images, manifests, stores). CLI exit 4.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Remote captioning failures, one type per category so callers can branch.
struct AuthError : std::runtime_error {
  explicit AuthError(const std::string& what) : std::runtime_error(what) {}
};
struct TransportError : std::runtime_error {
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};
struct MalformedResponseError : std::runtime_error {
  explicit MalformedResponseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pestvl

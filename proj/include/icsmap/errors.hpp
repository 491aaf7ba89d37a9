#pragma once
// Error taxonomy shared by the whole library. Loaders and analysis code throw
// ValidationError for content problems (bad rows, inconsistent data, bad
// arguments supplied as data) and IoError for filesystem/transport failures.
// The CLI maps ValidationError and std::invalid_argument to exit code 1 and
// IoError to exit code 2.

#include <stdexcept>
#include <string>

namespace icsmap {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Remote source rejected the supplied credentials (HTTP 401/403).
class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Remote source unreachable or persistently failing (5xx after retries).
class TransportError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace icsmap

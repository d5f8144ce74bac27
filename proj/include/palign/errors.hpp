#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace palign {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or violated data invariant (bad config file, malformed
/// record, duplicate id, template missing a placeholder, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures: unreadable input, unwritable output.
class IoError : public Error {
 public:
  using Error::Error;
};

/// The configured backend cannot perform the requested operation
/// (e.g. an endpoint without teacher-forced scoring support).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// A transport failure that is worth retrying (connection reset, 5xx, scripted
/// mock failure). Non-transient client errors use CapabilityError/ConfigError.
class TransientError : public Error {
 public:
  using Error::Error;
};

/// Every request of a sampling batch exhausted its retry budget.
class BatchError : public Error {
 public:
  BatchError(const std::string& message, std::vector<std::string> causes)
      : Error(message), causes_(std::move(causes)) {}
  const std::vector<std::string>& causes() const { return causes_; }

 private:
  std::vector<std::string> causes_;
};

/// Numeric domain violations in the loss kernel (nonpositive probability,
/// non-finite loss, epsilon out of range).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace palign

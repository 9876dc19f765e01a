#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mirage {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Array/image dimensions do not match what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (empty list, zero norm, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A component was asked for something it does not support,
/// e.g. gradients from a non-differentiable encoder adapter.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// File or OS level failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A model endpoint could not be reached (or kept failing) after the
/// configured number of attempts.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts, int last_status = 0)
      : Error(what), attempts_(attempts), last_status_(last_status) {}

  int attempts() const { return attempts_; }
  int last_status() const { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

/// The endpoint answered, but not in the agreed format (empty body,
/// missing fields, unparseable payload).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A benchmark record is unusable for the requested operation.
class InvalidRecordError : public Error {
 public:
  using Error::Error;
};

/// Manifest validation failure; carries every offending record, not just
/// the first one found.
class ManifestValidationError : public Error {
 public:
  explicit ManifestValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "manifest validation failed:";
    for (const auto& issue : issues) {
      out += "\n  - " + issue;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace mirage

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rvb {

enum class ErrorKind {
  kInvalidSpace,
  kInvalidBelief,
  kDegenerateEvidence,
  kIncompleteUtility,
  kScenarioError,
  kPatchError,
  kRemediationFailure,
  kNullProduction,
  kAdapterError,
  kArchiveOrderError,
  kArchiveIOError,
  kSchemaError,
  kCodecError,
  kUsageError,
  kMissingPrice,
  kConfigError,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the engine; the kind carries the contract-level
// error category so the C boundary can map it onto a status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rvb

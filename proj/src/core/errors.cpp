#include "rvb/errors.hpp"

namespace rvb {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidSpace: return "InvalidSpace";
    case ErrorKind::kInvalidBelief: return "InvalidBelief";
    case ErrorKind::kDegenerateEvidence: return "DegenerateEvidence";
    case ErrorKind::kIncompleteUtility: return "IncompleteUtility";
    case ErrorKind::kScenarioError: return "ScenarioError";
    case ErrorKind::kPatchError: return "PatchError";
    case ErrorKind::kRemediationFailure: return "RemediationFailure";
    case ErrorKind::kNullProduction: return "NullProduction";
    case ErrorKind::kAdapterError: return "AdapterError";
    case ErrorKind::kArchiveOrderError: return "ArchiveOrderError";
    case ErrorKind::kArchiveIOError: return "ArchiveIOError";
    case ErrorKind::kSchemaError: return "SchemaError";
    case ErrorKind::kCodecError: return "CodecError";
    case ErrorKind::kUsageError: return "UsageError";
    case ErrorKind::kMissingPrice: return "MissingPrice";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace rvb

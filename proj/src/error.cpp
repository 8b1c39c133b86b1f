#include "cablecal/error.hpp"

namespace cablecal {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kNonFiniteState: return "NonFiniteState";
    case ErrorCategory::kNegativeMass: return "NegativeMass";
    case ErrorCategory::kInvalidSparsity: return "InvalidSparsity";
    case ErrorCategory::kInvalidArgument: return "InvalidArgument";
    case ErrorCategory::kIoError: return "IoError";
    case ErrorCategory::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCategory::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCategory::kEmptyNetwork: return "EmptyNetwork";
    case ErrorCategory::kEmptyBatch: return "EmptyBatch";
    case ErrorCategory::kEmptyDataset: return "EmptyDataset";
    case ErrorCategory::kUnknownGroup: return "UnknownGroup";
    case ErrorCategory::kMissingDataset: return "MissingDataset";
    case ErrorCategory::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfigError: return 2;
    case ErrorCategory::kInvalidArgument: return 2;
    case ErrorCategory::kInvalidSparsity: return 2;
    case ErrorCategory::kNegativeMass: return 2;
    case ErrorCategory::kUnknownGroup: return 2;
    case ErrorCategory::kIoError: return 3;
    case ErrorCategory::kMissingDataset: return 4;
    case ErrorCategory::kSchemaMismatch: return 5;
    case ErrorCategory::kDimensionMismatch: return 5;
    case ErrorCategory::kEmptyDataset: return 6;
    case ErrorCategory::kEmptyBatch: return 6;
    case ErrorCategory::kEmptyNetwork: return 6;
    case ErrorCategory::kNonFiniteState: return 7;
  }
  return 1;
}

}  // namespace cablecal

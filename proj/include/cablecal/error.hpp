#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cablecal {

/// Machine-readable failure categories. The CLI prints the category name and
/// maps it to a process exit code.
enum class ErrorCategory {
  kNonFiniteState,
  kNegativeMass,
  kInvalidSparsity,
  kInvalidArgument,
  kIoError,
  kSchemaMismatch,
  kDimensionMismatch,
  kEmptyNetwork,
  kEmptyBatch,
  kEmptyDataset,
  kUnknownGroup,
  kMissingDataset,
  kConfigError,
};

std::string_view category_name(ErrorCategory category);
int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace cablecal

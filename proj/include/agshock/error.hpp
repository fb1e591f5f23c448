#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agshock {

enum class ErrorCode {
  // dataio
  kMissingColumn,
  kUnparseableDate,
  kNonFiniteValue,
  kEmptyAfterCleaning,
  kDuplicateDate,
  kEmptyMonth,
  kNotMonthly,
  kNoOverlap,
  kInvalidSpec,
  // preprocess
  kConstantSeries,
  kSeriesTooShort,
  kInsufficientLength,
  // outliers
  kTooFewPoints,
  kInvalidConfig,
  kDimensionMismatch,
  // relations
  kConstantInput,
  kLengthMismatch,
  kSingularRegression,
  kTooShort,
  kUnknownCommodity,
  // models
  kInsufficientSamples,
  kNonFiniteLoss,
  kEmptyDataset,
  kInsufficientHistory,
  // report
  kEmpty,
  kConstantTarget,
  kCommoditySetMismatch,
  // pipeline / io
  kConfigError,
  kMissingArtifact,
  kIoError,
  kFormatError,
};

enum class ErrorCategory { kConfig, kData, kNumerical };

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept;

 private:
  ErrorCode code_;
};

}  // namespace agshock

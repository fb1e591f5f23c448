#include "agshock/error.hpp"

namespace agshock {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kUnparseableDate: return "UnparseableDate";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kEmptyAfterCleaning: return "EmptyAfterCleaning";
    case ErrorCode::kDuplicateDate: return "DuplicateDate";
    case ErrorCode::kEmptyMonth: return "EmptyMonth";
    case ErrorCode::kNotMonthly: return "NotMonthly";
    case ErrorCode::kNoOverlap: return "NoOverlap";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kConstantSeries: return "ConstantSeries";
    case ErrorCode::kSeriesTooShort: return "SeriesTooShort";
    case ErrorCode::kInsufficientLength: return "InsufficientLength";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kConstantInput: return "ConstantInput";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kSingularRegression: return "SingularRegression";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kUnknownCommodity: return "UnknownCommodity";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kInsufficientHistory: return "InsufficientHistory";
    case ErrorCode::kEmpty: return "Empty";
    case ErrorCode::kConstantTarget: return "ConstantTarget";
    case ErrorCode::kCommoditySetMismatch: return "CommoditySetMismatch";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kMissingArtifact: return "MissingArtifact";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFormatError: return "FormatError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

ErrorCategory Error::category() const noexcept {
  switch (code_) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kInvalidSpec:
    case ErrorCode::kConfigError:
      return ErrorCategory::kConfig;
    case ErrorCode::kSingularRegression:
    case ErrorCode::kNonFiniteLoss:
      return ErrorCategory::kNumerical;
    default:
      return ErrorCategory::kData;
  }
}

}  // namespace agshock

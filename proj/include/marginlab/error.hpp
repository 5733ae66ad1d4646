#pragma once

#include <stdexcept>
#include <string>

namespace marginlab {

enum class ErrorCode {
  kDimensionMismatch,
  kInvalidArgument,
  kInvalidDataset,
  kUndefinedMargin,
  kZeroVector,
  kNotSeparable,
  kNotSymmetric,
  kScaleViolation,
  kAssumptionViolation,
  kIncompatibleEmbedding,
  kNonPositiveMargin,
  kNotOrthogonallySeparable,
  kInvalidHintParams,
  kGenerationFailed,
  kNonFinite,
  kIo,
};

inline const char* error_code_name(ErrorCode code);

// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidDataset: return "InvalidDataset";
    case ErrorCode::kUndefinedMargin: return "UndefinedMargin";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kNotSeparable: return "NotSeparable";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kScaleViolation: return "ScaleViolation";
    case ErrorCode::kAssumptionViolation: return "AssumptionViolation";
    case ErrorCode::kIncompatibleEmbedding: return "IncompatibleEmbedding";
    case ErrorCode::kNonPositiveMargin: return "NonPositiveMargin";
    case ErrorCode::kNotOrthogonallySeparable: return "NotOrthogonallySeparable";
    case ErrorCode::kInvalidHintParams: return "InvalidHintParams";
    case ErrorCode::kGenerationFailed: return "GenerationFailed";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace marginlab

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace apportion {

enum class ErrorCode {
  InvalidArgument,
  DegenerateCloud,
  HullDimensionExceeded,
  BudgetExceeded,
  AllDegenerate,
  ZeroRow,
  EmptyData,
  TooFewCandidates,
  ZeroDenominator,
  ShapeMismatch,
  ZeroNormRow,
  ParseError,
  NegativeValue,
  NonFinite,
  IoError,
};

enum class WarningCode {
  RankDeficient,
  NotContained,
  NegativeMeanClipped,
  ZeroRowsDropped,
  HullDimensionExceeded,
  JitterFallback,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::HullDimensionExceeded: return "HullDimensionExceeded";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::AllDegenerate: return "AllDegenerate";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::TooFewCandidates: return "TooFewCandidates";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ZeroNormRow: return "ZeroNormRow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NegativeValue: return "NegativeValue";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

inline constexpr std::string_view to_string(WarningCode code) {
  switch (code) {
    case WarningCode::RankDeficient: return "RankDeficient";
    case WarningCode::NotContained: return "NotContained";
    case WarningCode::NegativeMeanClipped: return "NegativeMeanClipped";
    case WarningCode::ZeroRowsDropped: return "ZeroRowsDropped";
    case WarningCode::HullDimensionExceeded: return "HullDimensionExceeded";
    case WarningCode::JitterFallback: return "JitterFallback";
  }
  return "Unknown";
}

/// Library error. `stage()` names the pipeline step that raised it (empty
/// when thrown outside a pipeline).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::string stage = {})
      : std::runtime_error(what), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const { return Error(code_, what(), std::move(stage)); }

 private:
  ErrorCode code_;
  std::string stage_;
};

struct Warning {
  WarningCode code;
  std::string message;
};

using Warnings = std::vector<Warning>;

inline bool has_warning(const Warnings& ws, WarningCode code) {
  for (const auto& w : ws)
    if (w.code == code) return true;
  return false;
}

}  // namespace apportion

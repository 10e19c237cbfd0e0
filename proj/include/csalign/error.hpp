#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csalign {

enum class ErrorCode {
  ShapeMismatch,
  LengthMismatch,
  ZeroNormRow,
  NonFiniteSimilarity,
  EmptyMatchRow,
  NotAPmf,
  TooFewDistributions,
  NegativeEntry,
  DegenerateBandwidth,
  TooFewSamples,
  InvalidConfig,
  NonFinitePerturbation,
  NonFiniteLoss,
  BadK,
  NoRelevantItems,
  Parse,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroNormRow: return "ZeroNormRow";
    case ErrorCode::NonFiniteSimilarity: return "NonFiniteSimilarity";
    case ErrorCode::EmptyMatchRow: return "EmptyMatchRow";
    case ErrorCode::NotAPmf: return "NotAPmf";
    case ErrorCode::TooFewDistributions: return "TooFewDistributions";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::DegenerateBandwidth: return "DegenerateBandwidth";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonFinitePerturbation: return "NonFinitePerturbation";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::NoRelevantItems: return "NoRelevantItems";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace detail
}  // namespace csalign

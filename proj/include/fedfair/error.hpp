#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedfair {

enum class ErrorCode {
  DanglingEdge,
  NonPositiveWeight,
  TooFewNodes,
  UncoveredNode,
  EmptyRegion,
  MalformedRow,
  NonMonotonicTimestamps,
  ZeroMeanLoad,
  SingleRegion,
  LengthMismatch,
  AllZero,
  NegativeWeight,
  WidthMismatch,
  NoNeighbors,
  EmptyBatch,
  EmptyDataset,
  InvalidPrivacyParams,
  NotClipped,
  BudgetExhausted,
  EmptyClientSet,
  EmptyNorms,
  InvalidBits,
  CorruptPayload,
  InvalidK,
  MissingPrediction,
  MissingDemographics,
  MissingState,
  LambdaOutOfRange,
  NoCandidates,
  IncompleteReport,
  UnknownKey,
  RangeViolation,
  MissingFile,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DanglingEdge: return "DanglingEdge";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::TooFewNodes: return "TooFewNodes";
    case ErrorCode::UncoveredNode: return "UncoveredNode";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::ZeroMeanLoad: return "ZeroMeanLoad";
    case ErrorCode::SingleRegion: return "SingleRegion";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllZero: return "AllZero";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::NoNeighbors: return "NoNeighbors";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidPrivacyParams: return "InvalidPrivacyParams";
    case ErrorCode::NotClipped: return "NotClipped";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::EmptyClientSet: return "EmptyClientSet";
    case ErrorCode::EmptyNorms: return "EmptyNorms";
    case ErrorCode::InvalidBits: return "InvalidBits";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::MissingDemographics: return "MissingDemographics";
    case ErrorCode::MissingState: return "MissingState";
    case ErrorCode::LambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::IncompleteReport: return "IncompleteReport";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace fedfair

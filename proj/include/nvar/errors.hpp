#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nvar {

enum class ErrorCode {
  InvalidArgument,
  NonFinite,
  ShapeMismatch,
  RankDeficient,
  InsufficientData,
  NonStationaryModel,
  NoFeasibleRadius,
  HistoryTooShort,
  MissingCoordinates,
  InsufficientTestSpan,
  UnparseableRecord,
  NoCompleteCell,
  TooShort,
  Io,
  Schema,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonStationaryModel: return "NonStationaryModel";
    case ErrorCode::NoFeasibleRadius: return "NoFeasibleRadius";
    case ErrorCode::HistoryTooShort: return "HistoryTooShort";
    case ErrorCode::MissingCoordinates: return "MissingCoordinates";
    case ErrorCode::InsufficientTestSpan: return "InsufficientTestSpan";
    case ErrorCode::UnparseableRecord: return "UnparseableRecord";
    case ErrorCode::NoCompleteCell: return "NoCompleteCell";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Schema: return "Schema";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace nvar

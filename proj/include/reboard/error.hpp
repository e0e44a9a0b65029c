#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reboard {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  DegenerateGeometry,
  DecodeError,
  MissingFile,
  InvalidManifest,
  InvalidScript,
  SourceUnavailable,
  CaptureDisabled,
  Obstructed,
  ContrastTooLow,
  UnknownDetector,
  UnknownCamera,
  UnknownRecord,
  UnknownUser,
  NotOwner,
  NotAuthorized,
  EmptyChange,
  EmptySelection,
  NoCameraSelected,
  MalformedFilter,
  MalformedRange,
  MismatchedSources,
  StorageFailure,
  Conflict,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::InvalidScript: return "InvalidScript";
    case ErrorCode::SourceUnavailable: return "SourceUnavailable";
    case ErrorCode::CaptureDisabled: return "CaptureDisabled";
    case ErrorCode::Obstructed: return "Obstructed";
    case ErrorCode::ContrastTooLow: return "ContrastTooLow";
    case ErrorCode::UnknownDetector: return "UnknownDetector";
    case ErrorCode::UnknownCamera: return "UnknownCamera";
    case ErrorCode::UnknownRecord: return "UnknownRecord";
    case ErrorCode::UnknownUser: return "UnknownUser";
    case ErrorCode::NotOwner: return "NotOwner";
    case ErrorCode::NotAuthorized: return "NotAuthorized";
    case ErrorCode::EmptyChange: return "EmptyChange";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::NoCameraSelected: return "NoCameraSelected";
    case ErrorCode::MalformedFilter: return "MalformedFilter";
    case ErrorCode::MalformedRange: return "MalformedRange";
    case ErrorCode::MismatchedSources: return "MismatchedSources";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::Conflict: return "Conflict";
  }
  return "Unknown";
}

/// Every failure surfaced by the library carries one of the codes above so
/// callers (and the HTTP layer) can dispatch on it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace reboard

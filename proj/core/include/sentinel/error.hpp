#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sentinel {

/// Every failure the engine reports. Names are stable: they appear in
/// JSON reports and CLI diagnostics.
enum class ErrorCode {
  MalformedHeader,
  UnknownArrhythmia,
  IoFailure,
  LengthMismatch,
  UnsupportedRate,
  InsufficientData,
  MalformedRow,
  DuplicateEntry,
  WindowTooShort,
  ZeroDenominator,
  ZeroVariance,
  MalformedAnnotation,
  IndexOutOfBounds,
  TooFewBeats,
  UnsupportedMethod,
  EmptySequence,
  BandInfeasible,
  EmptyCorpus,
  MissingLead,
  InsufficientCleanBeats,
  BankTooSmall,
  EmptyBank,
  DimensionMismatch,
  NotNormalized,
  UnknownTruth,
  EmptyCounts,
  InvalidSpec,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sentinel

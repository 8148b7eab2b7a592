#include "sentinel/error.hpp"

namespace sentinel {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnknownArrhythmia: return "UnknownArrhythmia";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnsupportedRate: return "UnsupportedRate";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::MalformedAnnotation: return "MalformedAnnotation";
    case ErrorCode::IndexOutOfBounds: return "IndexOutOfBounds";
    case ErrorCode::TooFewBeats: return "TooFewBeats";
    case ErrorCode::UnsupportedMethod: return "UnsupportedMethod";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::BandInfeasible: return "BandInfeasible";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MissingLead: return "MissingLead";
    case ErrorCode::InsufficientCleanBeats: return "InsufficientCleanBeats";
    case ErrorCode::BankTooSmall: return "BankTooSmall";
    case ErrorCode::EmptyBank: return "EmptyBank";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::UnknownTruth: return "UnknownTruth";
    case ErrorCode::EmptyCounts: return "EmptyCounts";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace sentinel

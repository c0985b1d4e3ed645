#include "personasq/error.hpp"

namespace personasq {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::DocumentTooShort: return "DocumentTooShort";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ReplayMiss: return "ReplayMiss";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PayloadParseError: return "PayloadParseError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnsubstitutedPlaceholder: return "UnsubstitutedPlaceholder";
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::NormalizationMismatch: return "NormalizationMismatch";
    case ErrorCode::UncoveredName: return "UncoveredName";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyPersona: return "EmptyPersona";
    case ErrorCode::DegenerateDocument: return "DegenerateDocument";
    case ErrorCode::NoDocuments: return "NoDocuments";
    case ErrorCode::UnknownPersona: return "UnknownPersona";
    case ErrorCode::MissingRanking: return "MissingRanking";
    case ErrorCode::JudgeParseError: return "JudgeParseError";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyJudgments: return "EmptyJudgments";
    case ErrorCode::ChunkTooLong: return "ChunkTooLong";
    case ErrorCode::EmptyQuestion: return "EmptyQuestion";
    case ErrorCode::BadRatios: return "BadRatios";
    case ErrorCode::PrerequisiteMissing: return "PrerequisiteMissing";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::RunLocked: return "RunLocked";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace personasq

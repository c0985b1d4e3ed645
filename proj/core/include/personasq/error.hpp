#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace personasq {

enum class ErrorCode {
  // corpus
  EmptyDocument,
  DocumentTooShort,
  InvalidArgument,
  // model gateway
  BackendUnavailable,
  ReplayMiss,
  RateLimited,
  EmptyBatch,
  DimensionMismatch,
  PayloadParseError,
  SchemaViolation,
  UnsubstitutedPlaceholder,
  // persona / question pipelines
  EmptyGeneration,
  NormalizationMismatch,
  UncoveredName,
  ScoreOutOfRange,
  KeyMismatch,
  // evaluation
  ZeroVector,
  EmptyPersona,
  DegenerateDocument,
  NoDocuments,
  UnknownPersona,
  MissingRanking,
  JudgeParseError,
  MalformedRecord,
  EmptyJudgments,
  // fine-tune data
  ChunkTooLong,
  EmptyQuestion,
  BadRatios,
  // orchestration
  PrerequisiteMissing,
  ConfigInvalid,
  RunLocked,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error code. All library failures
/// surface as this type so callers can branch on `code()`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace personasq

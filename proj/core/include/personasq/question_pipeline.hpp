#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "personasq/corpus.hpp"
#include "personasq/model_gateway.hpp"
#include "personasq/persona_pipeline.hpp"

namespace personasq {

enum class QuestionStatus { Raw, LengthOk, QualityOk, Final, Dropped };

std::string_view to_string(QuestionStatus status) noexcept;

struct SuggestedQuestion {
  std::string doc_id;
  std::string persona;
  std::vector<std::string> goals_used;
  std::string text;
  std::size_t token_count = 0;
  std::optional<int> quality_score;
  std::optional<std::string> other_persona;  // set iff quality_score == 4
  std::optional<std::string> answer;
  std::optional<std::string> reference;
  bool reference_verified = false;
  QuestionStatus status = QuestionStatus::Raw;
  std::string drop_reason;  // "length", "quality", "unanswerable", or "error:<code>"
};

struct GateThresholds {
  std::size_t len_min = 5;
  std::size_t len_max = 100;
  int question_min_score = 4;
};

/// Per-stage survivor counts and drop reasons. Counts never increase across stages.
struct GateReport {
  std::size_t generated = 0;
  std::size_t after_length = 0;
  std::size_t after_quality = 0;
  std::size_t after_answerability = 0;
  std::map<std::string, std::size_t> drop_reasons;

  GateReport& operator+=(const GateReport& other);
  friend bool operator==(const GateReport&, const GateReport&) = default;
};

/// Parses {"Question 1": ..., "Question 2": ...} in reply order; exact duplicate
/// questions are kept once. An empty object yields no questions (logged).
std::vector<SuggestedQuestion> generate_questions(ModelGateway& gateway, const DocumentView& doc,
                                                  const std::string& persona, std::span<const std::string> goals);

struct Partition {
  std::vector<SuggestedQuestion> kept;
  std::vector<SuggestedQuestion> dropped;
};

/// Keeps len_min <= token_count <= len_max (both inclusive).
Partition filter_by_length(std::vector<SuggestedQuestion> questions, const GateThresholds& thresholds = {});

/// Scores questions 1..5; below question_min_score is dropped with reason
/// "quality". Reply keys must be exact copies of the submitted questions
/// (KeyMismatch otherwise).
Partition score_question_quality(ModelGateway& gateway, const DocumentView& doc, const std::string& persona,
                                 std::span<const std::string> goals, std::vector<SuggestedQuestion> questions,
                                 std::span<const std::string> other_personas,
                                 const GateThresholds& thresholds = {});

/// Asks for an answer and reference span per question. Answer "None" drops
/// the question as "unanswerable"; survivors become final. The reference is
/// checked against the full document text (flag only).
Partition verify_answerability(ModelGateway& gateway, const DocumentView& doc,
                               std::vector<SuggestedQuestion> questions);

struct GateOutcome {
  std::vector<SuggestedQuestion> final_questions;
  std::vector<SuggestedQuestion> dropped;
  GateReport report;
};

/// Runs an already generated set through length, quality, and answerability gates.
GateOutcome apply_gates(ModelGateway& gateway, const DocumentView& doc, const std::string& persona,
                        std::span<const std::string> goals, std::vector<SuggestedQuestion> raw,
                        std::span<const std::string> other_personas, const GateThresholds& thresholds = {});

/// generate_questions followed by apply_gates.
GateOutcome run_quality_gates(ModelGateway& gateway, const DocumentView& doc, const std::string& persona,
                              std::span<const std::string> goals, std::span<const std::string> other_personas,
                              const GateThresholds& thresholds = {});

/// Whether a final question satisfies every gate condition.
bool satisfies_final_invariant(const SuggestedQuestion& q, const GateThresholds& thresholds = {});

}  // namespace personasq

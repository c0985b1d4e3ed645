#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace personasq {

enum class PromptId {
  GeneratePersonas,   // $DOMAIN$ $SUBDOMAIN$ $DOCUMENT CONTENT$
  NormalizePersonas,  // $PERSONAS$
  GenerateQuestions,  // $PROFESSION$ $GOALS$ $DOCUMENT CONTENT$
  ScoreGoals,         // $PERSONA$ $GOALS$
  ScoreQuestions,     // $DOCUMENT$ $PERSONA$ $GOALS$ $QUESTIONS$ $OTHER_PERSONA$
  CheckAnswerability, // $DOCUMENT$ $QUESTIONS$
  PredictPersonas,    // $DOCUMENT$ $QUESTION$ $PERSONA$
  LikertJudge,        // $METRIC_DEFINITION$ $METRIC_PHRASE$ $SAMPLE_*$ $DOCUMENT$ $QUESTION$
  Summarize,          // $BUDGET$ $DOCUMENT$
  CompareQuestionSets // $DOCUMENT$ $SET_A$ $SET_B$
};

std::string_view prompt_name(PromptId id) noexcept;

std::string_view prompt_template(PromptId id) noexcept;

using PromptVars = std::map<std::string, std::string, std::less<>>;

/// Substitutes `$NAME$` placeholders in a single left-to-right pass; values are
/// inserted verbatim and never rescanned. A placeholder without a value throws
/// UnsubstitutedPlaceholder.
std::string render_template(std::string_view tmpl, const PromptVars& vars);

std::string render_prompt(PromptId id, const PromptVars& vars);

/// Placeholder names occurring in a template, in order of first appearance.
std::vector<std::string> placeholders(std::string_view tmpl);

/// Appended to a prompt when the first response could not be used.
std::string corrective_suffix(std::string_view problem);

/// In-context variant of the Likert judging prompt for one quality dimension.
struct JudgeMetricSpec {
  std::string name;
  std::string definition;
  std::string phrase;    // "If I were asked whether <phrase>"
  std::string decision;  // "think step by step about whether <decision>"
  std::string sample_question;
  std::string sample_reasoning;
  std::string sample_answer;
};

/// Registered metrics: relevance, readability, importance, answerability.
const std::vector<JudgeMetricSpec>& judge_metrics();

/// Throws InvalidArgument for an unregistered name.
const JudgeMetricSpec& judge_metric(std::string_view name);

}  // namespace personasq

#include <array>
#include <sstream>

#include "personasq/sq_eval.hpp"
#include "personasq/text.hpp"

namespace personasq {

namespace {

constexpr std::array<std::string_view, 5> kLikertLabels = {"strongly disagree", "disagree", "undecided", "agree",
                                                           "strongly agree"};

std::string strip_decoration(std::string_view s) {
  auto junk = [](char c) { return text::is_space(c) || c == '\'' || c == '"' || c == '[' || c == ']' || c == '*' || c == '.' || c == '`'; };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  return text::to_lower(s);
}

}  // namespace

int parse_likert_answer(std::string_view response) {
  std::optional<std::string> label;
  std::istringstream lines{std::string(response)};
  std::string line;
  while (std::getline(lines, line)) {
    std::string_view l = text::trim(line);
    while (!l.empty() && (l.front() == '*' || l.front() == '#')) l.remove_prefix(1);
    l = text::trim(l);
    if (l.starts_with("2.")) l = text::trim(l.substr(2));
    while (!l.empty() && l.front() == '*') l.remove_prefix(1);
    if (text::to_lower(l.substr(0, 6)) != "answer") continue;
    const std::size_t colon = l.find(':');
    if (colon == std::string_view::npos) continue;
    label = strip_decoration(l.substr(colon + 1));
  }
  if (!label) fail(ErrorCode::JudgeParseError, "no '2. Answer:' line in judge response");
  for (std::size_t i = 0; i < kLikertLabels.size(); ++i) {
    if (*label == kLikertLabels[i]) return static_cast<int>(i) + 1;
  }
  fail(ErrorCode::JudgeParseError, "unrecognized Likert label '" + *label + "'");
}

int judge_question_quality(ModelGateway& judge, const std::string& doc_text, const std::string& question,
                           std::string_view metric) {
  const JudgeMetricSpec& spec = judge_metric(metric);
  ChatRequest req;
  req.tag = std::string(prompt_name(PromptId::LikertJudge)) + "." + spec.name;
  req.prompt = render_prompt(PromptId::LikertJudge, {{"METRIC_DEFINITION", spec.definition},
                                                     {"METRIC_PHRASE", spec.phrase},
                                                     {"METRIC_DECISION", spec.decision},
                                                     {"SAMPLE_QUESTION", spec.sample_question},
                                                     {"SAMPLE_REASONING", spec.sample_reasoning},
                                                     {"SAMPLE_ANSWER", spec.sample_answer},
                                                     {"DOCUMENT", doc_text},
                                                     {"QUESTION", question}});
  return judge.chat_interpreted(req, [](std::string_view raw) { return parse_likert_answer(raw); });
}

Outcome compare_question_sets(ModelGateway& judge, const std::string& doc_text, std::span<const std::string> candidate,
                              std::span<const std::string> reference) {
  auto bullets = [](std::span<const std::string> qs) {
    std::string out;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      if (i) out += '\n';
      out += std::to_string(i + 1) + ". " + qs[i];
    }
    return out;
  };
  ChatRequest req;
  req.tag = std::string(prompt_name(PromptId::CompareQuestionSets));
  req.prompt = render_prompt(PromptId::CompareQuestionSets,
                             {{"DOCUMENT", doc_text}, {"SET_A", bullets(candidate)}, {"SET_B", bullets(reference)}});
  return judge.chat_interpreted(req, [](std::string_view raw) {
    const Json v = parse_json_payload(raw, PayloadShape::Object);
    if (!v.contains("verdict") || !v["verdict"].is_string()) {
      fail(ErrorCode::SchemaViolation, "comparison reply lacks a string 'verdict'");
    }
    const std::string verdict = text::to_lower(text::trim(v["verdict"].get<std::string>()));
    if (verdict == "a") return Outcome::Win;
    if (verdict == "b") return Outcome::Lose;
    if (verdict == "tie") return Outcome::Tie;
    fail(ErrorCode::SchemaViolation, "verdict must be A, B or tie, got '" + verdict + "'");
  });
}

}  // namespace personasq

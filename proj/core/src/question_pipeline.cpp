#include "personasq/question_pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

#include "personasq/text.hpp"

namespace personasq {

std::string_view to_string(QuestionStatus status) noexcept {
  switch (status) {
    case QuestionStatus::Raw: return "raw";
    case QuestionStatus::LengthOk: return "len_ok";
    case QuestionStatus::QualityOk: return "quality_ok";
    case QuestionStatus::Final: return "final";
    case QuestionStatus::Dropped: return "dropped";
  }
  return "raw";
}

GateReport& GateReport::operator+=(const GateReport& other) {
  generated += other.generated;
  after_length += other.after_length;
  after_quality += other.after_quality;
  after_answerability += other.after_answerability;
  for (const auto& [reason, n] : other.drop_reasons) drop_reasons[reason] += n;
  return *this;
}

namespace {

void drop(SuggestedQuestion& q, std::string reason) {
  q.status = QuestionStatus::Dropped;
  q.drop_reason = std::move(reason);
}

bool is_none(std::string_view s) {
  const std::string t = text::to_lower(text::trim(s));
  return t.empty() || t == "none" || t == "null" || t == "n/a";
}

std::vector<std::string> texts_of(const std::vector<SuggestedQuestion>& qs) {
  std::vector<std::string> out;
  out.reserve(qs.size());
  for (const auto& q : qs) out.push_back(q.text);
  return out;
}

// Reply keys must be exactly the submitted questions.
void check_keys(const Json& payload, const std::vector<std::string>& expected) {
  const std::set<std::string> want(expected.begin(), expected.end());
  for (const auto& [key, value] : payload.items()) {
    if (!want.contains(key)) fail(ErrorCode::KeyMismatch, "reply key '" + key + "' is not a submitted question");
  }
  for (const auto& q : expected) {
    if (!payload.contains(q)) fail(ErrorCode::KeyMismatch, "no entry for question '" + q + "'");
  }
}

}  // namespace

std::vector<SuggestedQuestion> generate_questions(ModelGateway& gateway, const DocumentView& doc,
                                                  const std::string& persona, std::span<const std::string> goals) {
  if (goals.empty()) fail(ErrorCode::InvalidArgument, "persona '" + persona + "' has no goals");
  const std::vector<std::string> goal_list(goals.begin(), goals.end());

  ChatRequest req;
  req.tag = std::string(prompt_name(PromptId::GenerateQuestions));
  req.prompt = render_prompt(PromptId::GenerateQuestions, {{"PROFESSION", persona},
                                                           {"GOALS", text::join(goal_list, "; ")},
                                                           {"DOCUMENT CONTENT", doc.prompt_text()}});
  const Json payload = gateway.chat_json(req, PayloadShape::MapOfStrings);

  std::vector<SuggestedQuestion> out;
  for (const auto& [key, value] : payload.items()) {
    std::string q(text::trim(value.get_ref<const std::string&>()));
    if (q.empty()) continue;
    const bool dup = std::any_of(out.begin(), out.end(), [&](const auto& e) { return e.text == q; });
    if (dup) continue;
    SuggestedQuestion sq;
    sq.doc_id = doc.doc.id;
    sq.persona = persona;
    sq.goals_used = goal_list;
    sq.token_count = doc.tokenizer.count(q);
    sq.text = std::move(q);
    out.push_back(std::move(sq));
  }
  if (out.empty()) spdlog::warn("no questions generated for {} / {}", doc.doc.id, persona);
  return out;
}

Partition filter_by_length(std::vector<SuggestedQuestion> questions, const GateThresholds& t) {
  Partition p;
  for (auto& q : questions) {
    if (q.token_count >= t.len_min && q.token_count <= t.len_max) {
      q.status = QuestionStatus::LengthOk;
      p.kept.push_back(std::move(q));
    } else {
      drop(q, "length");
      p.dropped.push_back(std::move(q));
    }
  }
  return p;
}

Partition score_question_quality(ModelGateway& gateway, const DocumentView& doc, const std::string& persona,
                                 std::span<const std::string> goals, std::vector<SuggestedQuestion> questions,
                                 std::span<const std::string> other_personas, const GateThresholds& t) {
  Partition p;
  if (questions.empty()) return p;
  const std::vector<std::string> goal_list(goals.begin(), goals.end());
  const std::vector<std::string> others(other_personas.begin(), other_personas.end());
  const std::vector<std::string> asked = texts_of(questions);

  ChatRequest req;
  req.tag = std::string(prompt_name(PromptId::ScoreQuestions));
  req.prompt = render_prompt(PromptId::ScoreQuestions,
                             {{"DOCUMENT", doc.prompt_text()},
                              {"PERSONA", persona},
                              {"GOALS", text::join(goal_list, "; ")},
                              {"QUESTIONS", text::join(asked, "; ")},
                              {"OTHER_PERSONA", others.empty() ? std::string("None") : text::join(others, ", ")}});

  const Json payload = gateway.chat_json(req, PayloadShape::MapOfScorePairs, [&](const Json& v) {
    check_keys(v, asked);
    for (const auto& [key, pair] : v.items()) {
      const long s = *as_integer(pair[0]);
      if (s < 1 || s > 5) fail(ErrorCode::ScoreOutOfRange, "question score " + std::to_string(s) + " outside 1..5");
    }
  });

  for (auto& q : questions) {
    const Json& pair = payload.at(q.text);
    q.quality_score = static_cast<int>(*as_integer(pair[0]));
    if (*q.quality_score == 4) {
      q.other_persona = pair[1].is_string() ? pair[1].get<std::string>() : std::string("None");
    }
    if (*q.quality_score < t.question_min_score) {
      drop(q, "quality");
      p.dropped.push_back(std::move(q));
    } else {
      q.status = QuestionStatus::QualityOk;
      p.kept.push_back(std::move(q));
    }
  }
  return p;
}

Partition verify_answerability(ModelGateway& gateway, const DocumentView& doc,
                               std::vector<SuggestedQuestion> questions) {
  Partition p;
  if (questions.empty()) return p;
  const std::vector<std::string> asked = texts_of(questions);
  std::string numbered;
  for (std::size_t i = 0; i < asked.size(); ++i) {
    if (i) numbered += "\n\n";
    numbered += std::to_string(i + 1) + ". " + asked[i];
  }

  ChatRequest req;
  req.tag = std::string(prompt_name(PromptId::CheckAnswerability));
  req.prompt = render_prompt(PromptId::CheckAnswerability, {{"DOCUMENT", doc.prompt_text()}, {"QUESTIONS", numbered}});
  const Json payload = gateway.chat_json(req, PayloadShape::MapOfAnswerObjects,
                                         [&](const Json& v) { check_keys(v, asked); });

  for (auto& q : questions) {
    const Json& entry = payload.at(q.text);
    const std::string answer = entry.at("Answer").get<std::string>();
    const std::string reference = entry.at("Reference").get<std::string>();
    if (is_none(answer)) {
      drop(q, "unanswerable");
      p.dropped.push_back(std::move(q));
      continue;
    }
    q.answer = answer;
    q.reference = reference;
    q.reference_verified = !is_none(reference) && text::contains_normalized(doc.doc.text, reference);
    if (!q.reference_verified) {
      spdlog::warn("reference for '{}' ({}) is not a span of the document", q.text, q.doc_id);
    }
    q.status = QuestionStatus::Final;
    p.kept.push_back(std::move(q));
  }
  return p;
}

GateOutcome apply_gates(ModelGateway& gateway, const DocumentView& doc, const std::string& persona,
                        std::span<const std::string> goals, std::vector<SuggestedQuestion> raw,
                        std::span<const std::string> other_personas, const GateThresholds& thresholds) {
  GateOutcome out;
  out.report.generated = raw.size();
  auto absorb = [&](Partition& part) {
    for (auto& d : part.dropped) {
      ++out.report.drop_reasons[d.drop_reason];
      out.dropped.push_back(std::move(d));
    }
  };

  Partition by_length = filter_by_length(std::move(raw), thresholds);
  out.report.after_length = by_length.kept.size();
  absorb(by_length);

  Partition by_quality = score_question_quality(gateway, doc, persona, goals, std::move(by_length.kept),
                                                other_personas, thresholds);
  out.report.after_quality = by_quality.kept.size();
  absorb(by_quality);

  Partition by_answer = verify_answerability(gateway, doc, std::move(by_quality.kept));
  out.report.after_answerability = by_answer.kept.size();
  absorb(by_answer);

  out.final_questions = std::move(by_answer.kept);
  return out;
}

GateOutcome run_quality_gates(ModelGateway& gateway, const DocumentView& doc, const std::string& persona,
                              std::span<const std::string> goals, std::span<const std::string> other_personas,
                              const GateThresholds& thresholds) {
  return apply_gates(gateway, doc, persona, goals, generate_questions(gateway, doc, persona, goals),
                     other_personas, thresholds);
}

bool satisfies_final_invariant(const SuggestedQuestion& q, const GateThresholds& t) {
  return q.status == QuestionStatus::Final && q.token_count >= t.len_min && q.token_count <= t.len_max &&
         q.quality_score && *q.quality_score >= t.question_min_score && q.answer && *q.answer != "None" &&
         (q.other_persona.has_value() == (*q.quality_score == 4));
}

}  // namespace personasq

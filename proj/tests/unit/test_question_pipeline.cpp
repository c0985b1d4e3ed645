#include <gtest/gtest.h>

#include "personasq/error.hpp"
#include "personasq/question_pipeline.hpp"
#include "test_support.hpp"

namespace personasq {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

const Document& ledger_doc() {
  static const Document doc = ingest_document(
      "Net profit rose to 12 million dollars in 2023. The board approved a dividend of 40 cents per share.",
      {std::string("ledger"), "finance", "annual report", std::nullopt});
  return doc;
}

SuggestedQuestion question(std::string text, QuestionStatus status = QuestionStatus::Raw) {
  SuggestedQuestion q;
  q.doc_id = "ledger";
  q.persona = "investors";
  q.token_count = count_tokens(text);
  q.text = std::move(text);
  q.status = status;
  return q;
}

const std::vector<std::string> kGoals = {"evaluate profitability"};
const std::vector<std::string> kOthers = {"regulators"};

TEST(GenerateQuestions, ParsesInOrderAndDeduplicates) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("gen_questions",
                   R"({"Question 1": "How much did net profit rise in 2023?", "Question 2": "  ",)"
                   R"( "Question 3": "How much did net profit rise in 2023?", "Question 4": "What dividend was approved?"})");
  auto gw = testing::live_gateway(backend);
  const auto qs = generate_questions(*gw, DocumentView{ledger_doc()}, "investors", kGoals);
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[0].text, "How much did net profit rise in 2023?");
  EXPECT_EQ(qs[0].token_count, 8u);
  EXPECT_EQ(qs[0].goals_used, kGoals);
  EXPECT_EQ(qs[1].text, "What dividend was approved?");
  EXPECT_EQ(qs[1].status, QuestionStatus::Raw);
}

TEST(GenerateQuestions, EmptyReplyAndNoGoals) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("gen_questions", "{}");
  auto gw = testing::live_gateway(backend);
  EXPECT_TRUE(generate_questions(*gw, DocumentView{ledger_doc()}, "investors", kGoals).empty());
  EXPECT_EQ(code_of([&] { generate_questions(*gw, DocumentView{ledger_doc()}, "investors", {}); }),
            ErrorCode::InvalidArgument);
}

TEST(LengthGate, InclusiveBoundaries) {
  std::vector<SuggestedQuestion> qs = {question(testing::tokens(4)), question(testing::tokens(5)),
                                       question(testing::tokens(100)), question(testing::tokens(101))};
  const Partition p = filter_by_length(std::move(qs));
  ASSERT_EQ(p.kept.size(), 2u);
  EXPECT_EQ(p.kept[0].token_count, 5u);
  EXPECT_EQ(p.kept[1].token_count, 100u);
  EXPECT_EQ(p.kept[0].status, QuestionStatus::LengthOk);
  ASSERT_EQ(p.dropped.size(), 2u);
  EXPECT_EQ(p.dropped[0].drop_reason, "length");
  EXPECT_EQ(p.dropped[1].status, QuestionStatus::Dropped);
}

TEST(QualityGate, KeepsFourAndAboveWithOtherPersona) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("score_questions", R"({"Question A is long enough?": [4, "regulators"], "Question B is long enough?": [2, "None"]})");
  auto gw = testing::live_gateway(backend);
  std::vector<SuggestedQuestion> qs = {question("Question A is long enough?", QuestionStatus::LengthOk),
                                       question("Question B is long enough?", QuestionStatus::LengthOk)};
  const Partition p =
      score_question_quality(*gw, DocumentView{ledger_doc()}, "investors", kGoals, std::move(qs), kOthers);
  ASSERT_EQ(p.kept.size(), 1u);
  EXPECT_EQ(p.kept[0].quality_score, 4);
  EXPECT_EQ(p.kept[0].other_persona, "regulators");
  EXPECT_EQ(p.kept[0].status, QuestionStatus::QualityOk);
  ASSERT_EQ(p.dropped.size(), 1u);
  EXPECT_EQ(p.dropped[0].drop_reason, "quality");
  EXPECT_EQ(p.dropped[0].quality_score, 2);
}

TEST(QualityGate, OtherPersonaOnlyForScoreFour) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("score_questions", R"({"Question A is long enough?": [5, "regulators"]})");
  auto gw = testing::live_gateway(backend);
  std::vector<SuggestedQuestion> qs = {question("Question A is long enough?", QuestionStatus::LengthOk)};
  const Partition p =
      score_question_quality(*gw, DocumentView{ledger_doc()}, "investors", kGoals, std::move(qs), kOthers);
  ASSERT_EQ(p.kept.size(), 1u);
  EXPECT_FALSE(p.kept[0].other_persona.has_value());
}

TEST(QualityGate, KeyMismatchOnAlteredQuestion) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("score_questions", R"({"question a is long enough?": [5, "None"]})");
  auto gw = testing::live_gateway(backend);
  std::vector<SuggestedQuestion> qs = {question("Question A is long enough?", QuestionStatus::LengthOk)};
  EXPECT_EQ(code_of([&] {
              score_question_quality(*gw, DocumentView{ledger_doc()}, "investors", kGoals, std::move(qs), kOthers);
            }),
            ErrorCode::KeyMismatch);
  EXPECT_EQ(backend->calls(), 2u);
}

TEST(QualityGate, ScoreOutOfRange) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("score_questions", R"({"Question A is long enough?": [7, "None"]})");
  auto gw = testing::live_gateway(backend);
  std::vector<SuggestedQuestion> qs = {question("Question A is long enough?", QuestionStatus::LengthOk)};
  EXPECT_EQ(code_of([&] {
              score_question_quality(*gw, DocumentView{ledger_doc()}, "investors", kGoals, std::move(qs), kOthers);
            }),
            ErrorCode::ScoreOutOfRange);
}

TEST(QualityGate, OtherPersonaPlaceholderWhenAlone) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  std::string prompt;
  backend->set_handler([&](const ChatRequest& r) {
    prompt = r.prompt;
    return std::optional<std::string>(R"({"Question A is long enough?": [5, "None"]})");
  });
  auto gw = testing::live_gateway(backend);
  std::vector<SuggestedQuestion> qs = {question("Question A is long enough?", QuestionStatus::LengthOk)};
  score_question_quality(*gw, DocumentView{ledger_doc()}, "investors", kGoals, std::move(qs), {});
  EXPECT_EQ(prompt.find("{OTHER_PERSONA}"), std::string::npos);
  EXPECT_NE(prompt.find("None"), std::string::npos);
}

TEST(AnswerabilityGate, DropsUnanswerableAndChecksReferences) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("check_answerability",
                   R"({"How much did net profit rise?": {"Answer": "To 12 million dollars.", "Reference": "profit rose to 12   million\n dollars"},)"
                   R"( "What dividend was approved today?": {"Answer": "40 cents", "Reference": "a dividend of 50 cents"},)"
                   R"( "Who is the chief executive officer?": {"Answer": "None", "Reference": "None"}})");
  auto gw = testing::live_gateway(backend);
  std::vector<SuggestedQuestion> qs = {question("How much did net profit rise?", QuestionStatus::QualityOk),
                                       question("What dividend was approved today?", QuestionStatus::QualityOk),
                                       question("Who is the chief executive officer?", QuestionStatus::QualityOk)};
  const Partition p = verify_answerability(*gw, DocumentView{ledger_doc()}, std::move(qs));
  ASSERT_EQ(p.kept.size(), 2u);
  EXPECT_EQ(p.kept[0].answer, "To 12 million dollars.");
  EXPECT_TRUE(p.kept[0].reference_verified);
  EXPECT_FALSE(p.kept[1].reference_verified);
  EXPECT_EQ(p.kept[1].status, QuestionStatus::Final);
  ASSERT_EQ(p.dropped.size(), 1u);
  EXPECT_EQ(p.dropped[0].drop_reason, "unanswerable");
}

TEST(AnswerabilityGate, NumberedQuestionsInPrompt) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  std::string prompt;
  backend->set_handler([&](const ChatRequest& r) {
    prompt = r.prompt;
    return std::optional<std::string>(
        R"({"First question here?": {"Answer": "x", "Reference": "None"}, "Second question here?": {"Answer": "y", "Reference": "None"}})");
  });
  auto gw = testing::live_gateway(backend);
  std::vector<SuggestedQuestion> qs = {question("First question here?"), question("Second question here?")};
  verify_answerability(*gw, DocumentView{ledger_doc()}, std::move(qs));
  EXPECT_NE(prompt.find("1. First question here?\n\n2. Second question here?"), std::string::npos);
}

std::shared_ptr<ScriptedChatBackend> gate_script() {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("gen_questions",
                   R"({"Question 1": "How much did net profit rise in 2023?", "Question 2": "Profit?",)"
                   R"( "Question 3": "Which dividend did the board approve?", "Question 4": "Who audits the annual accounts?"})");
  backend->respond("score_questions",
                   R"({"How much did net profit rise in 2023?": [5, "None"], "Which dividend did the board approve?": [4, "regulators"],)"
                   R"( "Who audits the annual accounts?": [3, "None"]})");
  backend->respond("check_answerability",
                   R"({"How much did net profit rise in 2023?": {"Answer": "12 million dollars", "Reference": "Net profit rose to 12 million dollars in 2023."},)"
                   R"( "Which dividend did the board approve?": {"Answer": "None", "Reference": "None"}})");
  return backend;
}

TEST(RunQualityGates, ReportCountsAndInvariant) {
  auto gw = testing::live_gateway(gate_script());
  const GateOutcome out = run_quality_gates(*gw, DocumentView{ledger_doc()}, "investors", kGoals, kOthers);
  EXPECT_EQ(out.report.generated, 4u);
  EXPECT_EQ(out.report.after_length, 3u);
  EXPECT_EQ(out.report.after_quality, 2u);
  EXPECT_EQ(out.report.after_answerability, 1u);
  EXPECT_EQ(out.report.drop_reasons.at("length"), 1u);
  EXPECT_EQ(out.report.drop_reasons.at("quality"), 1u);
  EXPECT_EQ(out.report.drop_reasons.at("unanswerable"), 1u);
  ASSERT_EQ(out.final_questions.size(), 1u);
  EXPECT_TRUE(satisfies_final_invariant(out.final_questions[0]));
  EXPECT_TRUE(out.final_questions[0].reference_verified);
  EXPECT_EQ(out.dropped.size(), 3u);
}

TEST(RunQualityGates, NothingGenerated) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("gen_questions", "{}");
  auto gw = testing::live_gateway(backend);
  const GateOutcome out = run_quality_gates(*gw, DocumentView{ledger_doc()}, "investors", kGoals, kOthers);
  EXPECT_EQ(out.report, (GateReport{0, 0, 0, 0, {}}));
  EXPECT_EQ(backend->calls(), 1u);
}

TEST(GateReportSum, Accumulates) {
  GateReport a{4, 3, 2, 1, {{"length", 1}}};
  a += GateReport{2, 2, 1, 1, {{"length", 0}, {"quality", 1}}};
  EXPECT_EQ(a, (GateReport{6, 5, 3, 2, {{"length", 1}, {"quality", 1}}}));
}

TEST(FinalInvariant, RejectsBrokenStates) {
  SuggestedQuestion q = question("How much did net profit rise?", QuestionStatus::Final);
  q.quality_score = 5;
  q.answer = "12";
  EXPECT_TRUE(satisfies_final_invariant(q));
  SuggestedQuestion four = q;
  four.quality_score = 4;
  EXPECT_FALSE(satisfies_final_invariant(four));
  four.other_persona = "None";
  EXPECT_TRUE(satisfies_final_invariant(four));
  SuggestedQuestion none = q;
  none.answer = "None";
  EXPECT_FALSE(satisfies_final_invariant(none));
  SuggestedQuestion low = q;
  low.quality_score = 3;
  EXPECT_FALSE(satisfies_final_invariant(low));
}

}  // namespace
}  // namespace personasq

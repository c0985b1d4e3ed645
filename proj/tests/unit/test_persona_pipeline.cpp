#include <gtest/gtest.h>

#include <set>

#include "personasq/error.hpp"
#include "personasq/persona_pipeline.hpp"
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

std::unique_ptr<ModelGateway> replying(const std::string& tag, const std::string& reply,
                                       std::shared_ptr<ScriptedChatBackend>* out = nullptr) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond(tag, reply);
  if (out) *out = backend;
  return testing::live_gateway(backend);
}

Document annual_report() {
  return ingest_document("The annual report describes revenue and risk.",
                         {std::string("annual-report"), "finance", "annual report", std::nullopt});
}

TEST(GeneratePersonas, ParsesNestedReply) {
  const Document doc = annual_report();
  auto gw = replying("gen_personas",
                     R"({"finance":{"annual report":{"investors":["evaluate the company's operational performance and profitability"],"regulators":["assess potential future corporate risks"]}}})");
  const auto raw = generate_personas(*gw, DocumentView{doc});
  EXPECT_EQ(raw.doc_id, "annual-report");
  ASSERT_EQ(raw.entries.size(), 2u);
  EXPECT_EQ(raw.entries[0].first, "investors");
  EXPECT_EQ(raw.entries[0].second,
            std::vector<std::string>{"evaluate the company's operational performance and profitability"});
  EXPECT_EQ(raw.entries[1].first, "regulators");
  EXPECT_EQ(raw.entries[1].second, std::vector<std::string>{"assess potential future corporate risks"});
}

TEST(GeneratePersonas, PromptCarriesDomainAndDocument) {
  const Document doc = annual_report();
  auto backend = std::make_shared<ScriptedChatBackend>();
  std::string prompt;
  backend->set_handler([&](const ChatRequest& r) {
    prompt = r.prompt;
    return std::optional<std::string>(R"({"finance":{"annual report":{"a":["g"]}}})");
  });
  auto gw = testing::live_gateway(backend);
  generate_personas(*gw, DocumentView{doc});
  EXPECT_NE(prompt.find("finance"), std::string::npos);
  EXPECT_NE(prompt.find("annual report"), std::string::npos);
  EXPECT_NE(prompt.find(doc.text), std::string::npos);
  EXPECT_EQ(prompt.find("{DOMAIN}"), std::string::npos);
}

TEST(GeneratePersonas, ProfessionsWithoutGoalsAreDropped) {
  const Document doc = annual_report();
  auto gw = replying("gen_personas", R"({"finance":{"annual report":{"investors":[],"auditors":["check books"]}}})");
  const auto raw = generate_personas(*gw, DocumentView{doc});
  ASSERT_EQ(raw.entries.size(), 1u);
  EXPECT_EQ(raw.entries[0].first, "auditors");
}

TEST(GeneratePersonas, EmptyGeneration) {
  const Document doc = annual_report();
  auto gw = replying("gen_personas", R"({"finance":{"annual report":{}}})");
  EXPECT_EQ(code_of([&] { generate_personas(*gw, DocumentView{doc}); }), ErrorCode::EmptyGeneration);
}

TEST(DocumentViewText, TruncatesToBudget) {
  const Document doc = ingest_document(testing::tokens(50), {});
  EXPECT_EQ((DocumentView{doc, 50}.prompt_text()), doc.text);
  EXPECT_EQ((DocumentView{doc, 10}.prompt_text()), testing::tokens(10));
}

TEST(NormalizePersonas, GroupsSynonyms) {
  auto gw = replying("normalize_personas",
                     R"({"Accountants": ["Accountant", "Accountants", "accountant"], "Lawyer": ["Lawyer"]})");
  const std::vector<std::string> names = {"Accountant", "Accountants", "accountant", "Lawyer"};
  const PersonaGroups groups = normalize_personas(*gw, names);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].first, "Accountants");
  EXPECT_EQ(groups[0].second, (std::vector<std::string>{"Accountant", "Accountants", "accountant"}));
  EXPECT_EQ(groups[1].first, "Lawyer");
}

TEST(NormalizePersonas, SingletonSkipsBackend) {
  std::shared_ptr<ScriptedChatBackend> backend;
  auto gw = replying("normalize_personas", "{}", &backend);
  const std::vector<std::string> names = {"Nurse", "Nurse"};
  const PersonaGroups groups = normalize_personas(*gw, names);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].first, "Nurse");
  EXPECT_EQ(groups[0].second, std::vector<std::string>{"Nurse"});
  EXPECT_EQ(backend->calls(), 0u);
}

TEST(NormalizePersonas, MismatchAfterRetry) {
  std::shared_ptr<ScriptedChatBackend> backend;
  auto gw = replying("*", R"({"Accountants": ["Accountant"]})", &backend);
  const std::vector<std::string> names = {"Accountant", "Lawyer"};
  EXPECT_EQ(code_of([&] { normalize_personas(*gw, names); }), ErrorCode::NormalizationMismatch);
  EXPECT_EQ(backend->calls(), 2u);
}

TEST(CheckPartition, DetectsEveryViolation) {
  const std::vector<std::string> names = {"a", "b"};
  EXPECT_NO_THROW(check_partition({{"A", {"a"}}, {"B", {"b"}}}, names));
  EXPECT_EQ(code_of([&] { check_partition({{"A", {"a"}}}, names); }), ErrorCode::NormalizationMismatch);
  EXPECT_EQ(code_of([&] { check_partition({{"A", {"a", "b"}}, {"B", {"b"}}}, names); }),
            ErrorCode::NormalizationMismatch);
  EXPECT_EQ(code_of([&] { check_partition({{"A", {"a", "b", "c"}}}, names); }), ErrorCode::NormalizationMismatch);
  EXPECT_EQ(code_of([&] { check_partition({{" ", {"a", "b"}}}, names); }), ErrorCode::NormalizationMismatch);
}

TEST(AggregateGoals, ConcatenatesAndDeduplicates) {
  const PersonaGroups groups = {{"Accountants", {"Accountant", "accountant"}}, {"Lawyer", {"Lawyer"}}};
  const std::vector<RawPersonaGeneration> raw = {
      {"d1", {{"Accountant", {"audit books", "file taxes"}}, {"Lawyer", {"check clauses"}}}},
      {"d2", {{"accountant", {"file taxes", "plan budgets"}}}},
  };
  const PersonaGoalTable table = aggregate_goals("finance", groups, raw);
  EXPECT_EQ(table.domain, "finance");
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(*table.goals_of("Accountants"), (std::vector<std::string>{"audit books", "file taxes", "plan budgets"}));
  EXPECT_EQ(*table.goals_of("Lawyer"), std::vector<std::string>{"check clauses"});
  EXPECT_EQ(table.goals_of("Nobody"), nullptr);
}

TEST(AggregateGoals, UncoveredName) {
  const PersonaGroups groups = {{"Lawyer", {"Lawyer"}}};
  const std::vector<RawPersonaGeneration> raw = {{"d1", {{"Judge", {"rule"}}}}};
  EXPECT_EQ(code_of([&] { aggregate_goals("legal", groups, raw); }), ErrorCode::UncoveredName);
}

TEST(PersonasForDocument, InGroupOrder) {
  const PersonaGroups groups = {{"A", {"a1", "a2"}}, {"B", {"b"}}, {"C", {"c"}}};
  const RawPersonaGeneration raw{"d", {{"c", {"x"}}, {"a2", {"y"}}}};
  EXPECT_EQ(personas_for_document(groups, raw), (std::vector<std::string>{"A", "C"}));
}

TEST(ScoreGoals, ThresholdBoundary) {
  auto gw = replying("score_goals", R"({"g3": 3, "g4": 4, "g5": 5})");
  const std::vector<std::string> goals = {"g3", "g4", "g5"};
  const auto scored = score_goals(*gw, "Lawyer", goals);
  ASSERT_EQ(scored.size(), 3u);
  EXPECT_EQ(scored[0].score, 3);
  EXPECT_FALSE(scored[0].kept);
  EXPECT_TRUE(scored[1].kept);
  EXPECT_TRUE(scored[2].kept);
}

TEST(ScoreGoals, OutOfRangeAndMissingKeys) {
  const std::vector<std::string> goals = {"g"};
  auto high = replying("*", R"({"g": 6})");
  EXPECT_EQ(code_of([&] { score_goals(*high, "p", goals); }), ErrorCode::ScoreOutOfRange);
  auto zero = replying("*", R"({"g": 0})");
  EXPECT_EQ(code_of([&] { score_goals(*zero, "p", goals); }), ErrorCode::ScoreOutOfRange);
  auto missing = replying("*", R"({"other": 4})");
  EXPECT_EQ(code_of([&] { score_goals(*missing, "p", goals); }), ErrorCode::KeyMismatch);
}

TEST(ScoreGoals, RetryRecoversMissingKey) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->add_rule({"score_goals", {"could not be used"}, R"({"a": 5, "b": 2})"});
  backend->add_rule({"score_goals", {}, R"({"a": 5})"});
  auto gw = testing::live_gateway(backend);
  const std::vector<std::string> goals = {"a", "b"};
  const auto scored = score_goals(*gw, "p", goals);
  EXPECT_EQ(scored[1].score, 2);
  EXPECT_EQ(backend->calls(), 2u);
}

TEST(FilterGoalTable, DropsPersonasWithNoGoalLeft) {
  const std::vector<std::pair<std::string, std::vector<ScoredGoal>>> scored = {
      {"A", {{"x", 5, true}, {"y", 3, false}}},
      {"B", {{"z", 3, false}}},
  };
  const PersonaGoalTable table = filter_goal_table("d", scored);
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(table.rows[0].first, "A");
  EXPECT_EQ(table.rows[0].second, std::vector<std::string>{"x"});
}

TEST(SampleGoals, DeterministicOrderedSubset) {
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g"};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = sample_goals(pool, 3, seed);
    ASSERT_TRUE(s);
    EXPECT_EQ(*s, *sample_goals(pool, 3, seed));
    ASSERT_EQ(s->size(), 3u);
    EXPECT_EQ(std::set<std::string>(s->begin(), s->end()).size(), 3u);
    EXPECT_TRUE(std::is_sorted(s->begin(), s->end()));
  }
}

TEST(SampleGoals, SmallPoolAndEmptyPool) {
  const std::vector<std::string> pool = {"b", "a"};
  EXPECT_EQ(*sample_goals(pool, 5, 1), pool);
  EXPECT_FALSE(sample_goals(std::vector<std::string>{}, 5, 1).has_value());
  EXPECT_EQ(code_of([&] { sample_goals(pool, 0, 1); }), ErrorCode::InvalidArgument);
}

TEST(SampleGoals, RoughlyUniform) {
  const std::vector<std::string> pool = {"a", "b", "c", "d"};
  std::map<std::string, int> hits;
  const int trials = 4000;
  for (int seed = 0; seed < trials; ++seed) {
    const auto sample = sample_goals(pool, 2, static_cast<std::uint64_t>(seed));
    for (const auto& g : *sample) ++hits[g];
  }
  for (const auto& g : pool) EXPECT_NEAR(hits[g] / double(trials), 0.5, 0.05) << g;
}

}  // namespace
}  // namespace personasq

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "personasq/corpus.hpp"
#include "personasq/model_gateway.hpp"

namespace personasq {

/// One document's profession -> goals predictions, in reply order.
struct RawPersonaGeneration {
  std::string doc_id;
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;
};

/// Canonical persona -> raw member names, in reply order.
using PersonaGroups = std::vector<std::pair<std::string, std::vector<std::string>>>;

struct ScoredGoal {
  std::string goal;
  int score = 0;
  bool kept = false;
};

struct PersonaProfile {
  std::string canonical_name;
  std::vector<std::string> member_names;
  std::vector<ScoredGoal> goal_pool;
};

/// Canonical persona -> goals for one domain. Unscored after aggregation;
/// after filtering every goal has passed the score gate.
struct PersonaGoalTable {
  std::string domain;
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;

  const std::vector<std::string>* goals_of(std::string_view persona) const;
};

struct PersonaThresholds {
  int goal_min_score = 4;
  std::size_t goals_per_persona = 5;
};

/// Text used for the document slot of generation prompts.
struct DocumentView {
  const Document& doc;
  std::size_t context_budget_tokens = 6000;
  const Tokenizer& tokenizer = default_tokenizer();

  std::string prompt_text() const;
};

/// Predicts professions and goals for one document. Professions without goals
/// are dropped; throws EmptyGeneration when none remain.
RawPersonaGeneration generate_personas(ModelGateway& gateway, const DocumentView& doc);

/// Groups near-duplicate profession names. Input is deduplicated
/// case-sensitively first; a single name is its own group without a backend
/// call. Throws NormalizationMismatch unless the groups partition the input.
PersonaGroups normalize_personas(ModelGateway& gateway, std::span<const std::string> raw_names);

/// Checks that `groups` partitions `names` exactly; throws NormalizationMismatch.
void check_partition(const PersonaGroups& groups, std::span<const std::string> names);

/// Concatenates member goals under each canonical persona, dropping exact
/// duplicate goal strings. Throws UncoveredName for a profession absent from groups.
PersonaGoalTable aggregate_goals(const std::string& domain, const PersonaGroups& groups,
                                 std::span<const RawPersonaGeneration> raw);

/// Canonical personas whose members were predicted for `raw`, in group order.
std::vector<std::string> personas_for_document(const PersonaGroups& groups, const RawPersonaGeneration& raw);

/// Scores each goal 1..5 and marks goals below `goal_min_score` as eliminated.
std::vector<ScoredGoal> score_goals(ModelGateway& gateway, const std::string& persona,
                                    std::span<const std::string> goals, int goal_min_score = 4);

/// Keeps the goals marked `kept`.
PersonaGoalTable filter_goal_table(const std::string& domain,
                                   const std::vector<std::pair<std::string, std::vector<ScoredGoal>>>& scored);

/// Uniform sample without replacement of min(k, |pool|) goals, in pool order.
/// nullopt signals PersonaDropped (empty pool).
std::optional<std::vector<std::string>> sample_goals(std::span<const std::string> pool, std::size_t k,
                                                     std::uint64_t seed);

}  // namespace personasq

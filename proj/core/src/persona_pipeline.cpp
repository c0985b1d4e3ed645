#include "personasq/persona_pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "personasq/hashing.hpp"
#include "personasq/text.hpp"

namespace personasq {

const std::vector<std::string>* PersonaGoalTable::goals_of(std::string_view persona) const {
  for (const auto& [name, goals] : rows) {
    if (name == persona) return &goals;
  }
  return nullptr;
}

std::string DocumentView::prompt_text() const {
  if (doc.token_count <= context_budget_tokens) return doc.text;
  return head_tokens(doc.text, context_budget_tokens, tokenizer);
}

RawPersonaGeneration generate_personas(ModelGateway& gateway, const DocumentView& view) {
  ChatRequest req;
  req.tag = std::string(prompt_name(PromptId::GeneratePersonas));
  req.prompt = render_prompt(PromptId::GeneratePersonas, {{"DOMAIN", view.doc.domain},
                                                          {"SUBDOMAIN", view.doc.subdomain},
                                                          {"DOCUMENT CONTENT", view.prompt_text()}});
  const Json payload = gateway.chat_json(req, PayloadShape::NestedPersonas);

  RawPersonaGeneration out;
  out.doc_id = view.doc.id;
  // Replies may rename the domain/subdomain keys; every branch is collected.
  for (const auto& [domain, subdomains] : payload.items()) {
    for (const auto& [subdomain, professions] : subdomains.items()) {
      for (const auto& [profession, goals] : professions.items()) {
        const std::string name(text::trim(profession));
        if (name.empty()) continue;
        std::vector<std::string> cleaned;
        for (const auto& g : goals) {
          std::string goal(text::trim(g.get_ref<const std::string&>()));
          if (!goal.empty() && std::find(cleaned.begin(), cleaned.end(), goal) == cleaned.end()) {
            cleaned.push_back(std::move(goal));
          }
        }
        if (cleaned.empty()) continue;
        auto it = std::find_if(out.entries.begin(), out.entries.end(),
                               [&](const auto& e) { return e.first == name; });
        if (it == out.entries.end()) {
          out.entries.emplace_back(name, std::move(cleaned));
        } else {
          for (auto& goal : cleaned) {
            if (std::find(it->second.begin(), it->second.end(), goal) == it->second.end()) {
              it->second.push_back(std::move(goal));
            }
          }
        }
      }
    }
  }
  if (out.entries.empty()) fail(ErrorCode::EmptyGeneration, "no profession with goals for " + view.doc.id);
  return out;
}

void check_partition(const PersonaGroups& groups, std::span<const std::string> names) {
  const std::set<std::string> expected(names.begin(), names.end());
  std::set<std::string> seen;
  for (const auto& [canonical, members] : groups) {
    if (text::trim(canonical).empty()) fail(ErrorCode::NormalizationMismatch, "empty canonical persona name");
    for (const auto& m : members) {
      if (!expected.contains(m)) fail(ErrorCode::NormalizationMismatch, "'" + m + "' was not among the inputs");
      if (!seen.insert(m).second) fail(ErrorCode::NormalizationMismatch, "'" + m + "' appears in two groups");
    }
  }
  for (const auto& n : expected) {
    if (!seen.contains(n)) fail(ErrorCode::NormalizationMismatch, "'" + n + "' is missing from every group");
  }
}

PersonaGroups normalize_personas(ModelGateway& gateway, std::span<const std::string> raw_names) {
  std::vector<std::string> names;
  for (const auto& n : raw_names) {
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  }
  if (names.empty()) fail(ErrorCode::InvalidArgument, "normalize_personas needs at least one name");
  if (names.size() == 1) return {{names.front(), {names.front()}}};

  ChatRequest req;
  req.tag = std::string(prompt_name(PromptId::NormalizePersonas));
  req.prompt = render_prompt(PromptId::NormalizePersonas, {{"PERSONAS", text::join(names, ", ")}});

  return gateway.chat_interpreted(req, [&](std::string_view raw) {
    const Json payload = parse_json_payload(raw, PayloadShape::MapOfStringLists);
    PersonaGroups groups;
    for (const auto& [canonical, members] : payload.items()) {
      std::vector<std::string> list;
      for (const auto& m : members) list.push_back(m.get<std::string>());
      if (!list.empty()) groups.emplace_back(std::string(text::trim(canonical)), std::move(list));
    }
    check_partition(groups, names);
    // Two keys differing only by surrounding whitespace are one group.
    PersonaGroups merged;
    for (auto& [canonical, members] : groups) {
      auto it = std::find_if(merged.begin(), merged.end(), [&](const auto& g) { return g.first == canonical; });
      if (it == merged.end()) merged.emplace_back(canonical, std::move(members));
      else it->second.insert(it->second.end(), members.begin(), members.end());
    }
    return merged;
  });
}

PersonaGoalTable aggregate_goals(const std::string& domain, const PersonaGroups& groups,
                                 std::span<const RawPersonaGeneration> raw) {
  std::unordered_map<std::string, std::size_t> row_of;
  PersonaGoalTable table;
  table.domain = domain;
  for (const auto& [canonical, members] : groups) {
    table.rows.emplace_back(canonical, std::vector<std::string>{});
    for (const auto& m : members) row_of.emplace(m, table.rows.size() - 1);
  }
  std::vector<std::unordered_set<std::string>> seen(table.rows.size());
  for (const auto& gen : raw) {
    for (const auto& [profession, goals] : gen.entries) {
      auto it = row_of.find(profession);
      if (it == row_of.end()) {
        fail(ErrorCode::UncoveredName, "profession '" + profession + "' from " + gen.doc_id + " is in no group");
      }
      auto& row = table.rows[it->second].second;
      for (const auto& g : goals) {
        if (seen[it->second].insert(g).second) row.push_back(g);
      }
    }
  }
  std::erase_if(table.rows, [](const auto& r) { return r.second.empty(); });
  return table;
}

std::vector<std::string> personas_for_document(const PersonaGroups& groups, const RawPersonaGeneration& raw) {
  std::vector<std::string> out;
  for (const auto& [canonical, members] : groups) {
    const bool attached = std::any_of(raw.entries.begin(), raw.entries.end(), [&](const auto& e) {
      return std::find(members.begin(), members.end(), e.first) != members.end();
    });
    if (attached) out.push_back(canonical);
  }
  return out;
}

std::vector<ScoredGoal> score_goals(ModelGateway& gateway, const std::string& persona,
                                    std::span<const std::string> goals, int goal_min_score) {
  if (goals.empty()) fail(ErrorCode::InvalidArgument, "score_goals needs at least one goal");
  const std::vector<std::string> list(goals.begin(), goals.end());

  ChatRequest req;
  req.tag = std::string(prompt_name(PromptId::ScoreGoals));
  req.prompt = render_prompt(PromptId::ScoreGoals, {{"PERSONA", persona}, {"GOALS", text::join(list, "; ")}});

  return gateway.chat_interpreted(req, [&](std::string_view raw) {
    const Json payload = parse_json_payload(raw, PayloadShape::MapOfIntegers);
    std::vector<ScoredGoal> out;
    out.reserve(list.size());
    for (const auto& g : list) {
      auto it = payload.find(g);
      if (it == payload.end()) fail(ErrorCode::KeyMismatch, "no score for goal '" + g + "'");
      const long s = *as_integer(*it);
      if (s < 1 || s > 5) fail(ErrorCode::ScoreOutOfRange, "goal score " + std::to_string(s) + " outside 1..5");
      out.push_back({g, static_cast<int>(s), s >= goal_min_score});
    }
    return out;
  });
}

PersonaGoalTable filter_goal_table(const std::string& domain,
                                   const std::vector<std::pair<std::string, std::vector<ScoredGoal>>>& scored) {
  PersonaGoalTable table;
  table.domain = domain;
  for (const auto& [persona, goals] : scored) {
    std::vector<std::string> kept;
    for (const auto& g : goals) {
      if (g.kept) kept.push_back(g.goal);
    }
    if (!kept.empty()) table.rows.emplace_back(persona, std::move(kept));
  }
  return table;
}

std::optional<std::vector<std::string>> sample_goals(std::span<const std::string> pool, std::size_t k,
                                                     std::uint64_t seed) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "sample size k must be >= 1");
  if (pool.empty()) return std::nullopt;
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t take = std::min(k, pool.size());
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(pool[idx[i]]);
  return out;
}

}  // namespace personasq

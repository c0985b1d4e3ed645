#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "personasq/jsonl.hpp"

namespace personasq {

/// Expected top-level shape of a model's JSON reply.
enum class PayloadShape {
  Any,
  Object,              // any JSON object
  MapOfStrings,        // {"Question 1": "..."}
  MapOfStringLists,    // {"Accountants": ["Accountants", ...]}
  MapOfIntegers,       // {"goal": 5}
  MapOfScorePairs,     // {"Question A?": [4, "other_persona"]}
  MapOfAnswerObjects,  // {"Q?": {"Answer": "...", "Reference": "..."}}
  NestedPersonas,      // {"domain": {"subdomain": {"profession": ["goal"]}}}
};

std::string_view to_string(PayloadShape shape) noexcept;

/// Cuts the JSON document out of a chat reply: strips markdown code fences and
/// surrounding prose, then drops trailing commas before '}' / ']'.
std::string extract_json_text(std::string_view response);

/// Parses and validates a reply. Object key order is preserved.
/// Throws PayloadParseError when no JSON can be recovered and SchemaViolation
/// when the parsed value does not have `shape`.
Json parse_json_payload(std::string_view response, PayloadShape shape);

/// Integer score from a JSON number or numeric string; nullopt if not integral.
std::optional<long> as_integer(const Json& value);

}  // namespace personasq

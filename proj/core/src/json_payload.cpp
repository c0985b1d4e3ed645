#include "personasq/json_payload.hpp"

#include <cmath>
#include <charconv>

#include "personasq/error.hpp"
#include "personasq/text.hpp"

namespace personasq {

std::string_view to_string(PayloadShape shape) noexcept {
  switch (shape) {
    case PayloadShape::Any: return "any";
    case PayloadShape::Object: return "object";
    case PayloadShape::MapOfStrings: return "map of strings";
    case PayloadShape::MapOfStringLists: return "map of string lists";
    case PayloadShape::MapOfIntegers: return "map of integers";
    case PayloadShape::MapOfScorePairs: return "map of [score, persona] pairs";
    case PayloadShape::MapOfAnswerObjects: return "map of {Answer, Reference} objects";
    case PayloadShape::NestedPersonas: return "domain -> subdomain -> profession -> goals";
  }
  return "unknown";
}

namespace {

std::string_view strip_fences(std::string_view s) {
  const std::size_t open = s.find("```");
  if (open == std::string_view::npos) return s;
  std::size_t body = s.find('\n', open);
  if (body == std::string_view::npos) return s;
  ++body;
  const std::size_t close = s.find("```", body);
  return s.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body);
}

// Index one past the bracket matching s[open], or npos when unbalanced.
std::size_t match_bracket(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{' || c == '[') ++depth;
    else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::string drop_trailing_commas(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size() && text::is_space(s[j])) ++j;
      if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

bool is_string_list(const Json& v) {
  if (!v.is_array()) return false;
  for (const auto& e : v) {
    if (!e.is_string()) return false;
  }
  return true;
}

void require(bool ok, PayloadShape shape, const std::string& detail) {
  if (!ok) fail(ErrorCode::SchemaViolation, "expected " + std::string(to_string(shape)) + ": " + detail);
}

void validate(const Json& v, PayloadShape shape) {
  if (shape == PayloadShape::Any) return;
  require(v.is_object(), shape, std::string("got ") + v.type_name());
  for (const auto& [key, value] : v.items()) {
    switch (shape) {
      case PayloadShape::Any:
      case PayloadShape::Object:
        break;
      case PayloadShape::MapOfStrings:
        require(value.is_string(), shape, "value of '" + key + "' is not a string");
        break;
      case PayloadShape::MapOfStringLists:
        require(is_string_list(value), shape, "value of '" + key + "' is not a list of strings");
        break;
      case PayloadShape::MapOfIntegers:
        require(as_integer(value).has_value(), shape, "value of '" + key + "' is not an integer");
        break;
      case PayloadShape::MapOfScorePairs:
        require(value.is_array() && value.size() == 2 && as_integer(value[0]).has_value() &&
                    (value[1].is_string() || value[1].is_null()),
                shape, "value of '" + key + "' is not a [score, persona] pair");
        break;
      case PayloadShape::MapOfAnswerObjects:
        require(value.is_object() && value.contains("Answer") && value.contains("Reference") &&
                    value["Answer"].is_string() && value["Reference"].is_string(),
                shape, "value of '" + key + "' lacks string Answer/Reference");
        break;
      case PayloadShape::NestedPersonas:
        require(value.is_object(), shape, "domain '" + key + "' is not an object");
        for (const auto& [sub, professions] : value.items()) {
          require(professions.is_object(), shape, "subdomain '" + sub + "' is not an object");
          for (const auto& [prof, goals] : professions.items()) {
            require(is_string_list(goals), shape, "goals of '" + prof + "' are not a list of strings");
          }
        }
        break;
    }
  }
}

}  // namespace

std::string extract_json_text(std::string_view response) {
  std::string_view s = text::trim(strip_fences(response));
  const std::size_t open = s.find_first_of("{[");
  if (open == std::string_view::npos) return std::string(s);
  std::size_t close = match_bracket(s, open);
  if (close == std::string_view::npos) {
    const std::size_t last = s.find_last_of(s[open] == '{' ? '}' : ']');
    close = (last == std::string_view::npos || last < open) ? s.size() : last + 1;
  }
  return drop_trailing_commas(s.substr(open, close - open));
}

Json parse_json_payload(std::string_view response, PayloadShape shape) {
  const std::string body = extract_json_text(response);
  Json value;
  try {
    value = Json::parse(body, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    std::string head(text::trim(response).substr(0, 80));
    fail(ErrorCode::PayloadParseError, "no JSON in response starting '" + head + "'");
  }
  validate(value, shape);
  return value;
}

std::optional<long> as_integer(const Json& value) {
  if (value.is_number_integer()) return value.get<long>();
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (std::isfinite(d) && std::floor(d) == d) return static_cast<long>(d);
    return std::nullopt;
  }
  if (value.is_string()) {
    const std::string_view s = text::trim(value.get_ref<const std::string&>());
    long out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return out;
  }
  return std::nullopt;
}

}  // namespace personasq

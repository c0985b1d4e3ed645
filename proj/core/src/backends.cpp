#include <cctype>

#include "personasq/hashing.hpp"
#include "personasq/model_gateway.hpp"

namespace personasq {

ScriptedChatBackend::ScriptedChatBackend(std::string model) : model_(std::move(model)) {}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::from_file(const std::filesystem::path& path) {
  Json script;
  try {
    script = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  auto backend = std::make_shared<ScriptedChatBackend>(script.value("model", std::string("scripted-chat")));
  for (const auto& r : script.value("rules", Json::array())) {
    Rule rule;
    rule.tag = r.value("tag", std::string("*"));
    for (const auto& c : r.value("contains", Json::array())) rule.contains.push_back(c.get<std::string>());
    const Json& response = r.at("response");
    rule.response = response.is_string() ? response.get<std::string>() : dump_compact(response);
    backend->add_rule(std::move(rule));
  }
  return backend;
}

void ScriptedChatBackend::add_rule(Rule rule) { rules_.push_back(std::move(rule)); }

std::string ScriptedChatBackend::complete(const ChatRequest& request) {
  ++calls_;
  if (handler_) {
    if (auto reply = handler_(request)) return *reply;
  }
  // A retry tag ("x.retry") also matches rules written for "x".
  std::string_view tag = request.tag;
  if (tag.ends_with(".retry")) tag.remove_suffix(6);
  for (const auto& rule : rules_) {
    if (rule.tag != "*" && rule.tag != tag) continue;
    bool all = true;
    for (const auto& needle : rule.contains) {
      if (request.prompt.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return rule.response;
  }
  fail(ErrorCode::BackendUnavailable, "scripted backend has no reply for tag '" + request.tag + "'");
}

ScriptedEmbeddingBackend::ScriptedEmbeddingBackend(Handler handler, std::string model)
    : handler_(std::move(handler)), model_(std::move(model)) {}

std::vector<std::vector<double>> ScriptedEmbeddingBackend::embed(std::span<const std::string> texts) {
  ++calls_;
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(handler_(t));
  return out;
}

HashingEmbeddingBackend::HashingEmbeddingBackend(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) fail(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

std::vector<std::vector<double>> HashingEmbeddingBackend::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<double> v(dim_, 0.0);
    std::string word;
    auto flush = [&] {
      if (!word.empty()) v[fnv1a64(word) % dim_] += 1.0;
      word.clear();
    };
    for (unsigned char c : t) {
      if (std::isalnum(c)) word.push_back(static_cast<char>(std::tolower(c)));
      else flush();
    }
    flush();
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace personasq

#include <chrono>
#include <ctime>

#include "personasq/hashing.hpp"
#include "personasq/model_gateway.hpp"

namespace personasq {

namespace fs = std::filesystem;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string chat_cache_key(std::string_view backend_id, std::string_view model_id, const ChatRequest& request) {
  Json k;
  k["kind"] = "chat";
  k["backend"] = backend_id;
  k["model"] = model_id;
  k["prompt"] = request.prompt;
  k["temperature"] = request.temperature;
  k["max_tokens"] = request.max_output_tokens;
  k["seed"] = request.seed ? Json(*request.seed) : Json(nullptr);
  return sha256_hex(k.dump());
}

std::string embedding_cache_key(std::string_view backend_id, std::string_view model_id, std::string_view text) {
  Json k;
  k["kind"] = "embedding";
  k["backend"] = backend_id;
  k["model"] = model_id;
  k["input"] = text;
  return sha256_hex(k.dump());
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::optional<Json> ResponseCache::load(const std::string& key) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  const fs::path file = dir_ / (key + ".json");
  std::error_code ec;
  if (!fs::exists(file, ec)) return std::nullopt;
  Json entry;
  try {
    entry = Json::parse(read_file(file));
  } catch (const Json::parse_error&) {
    return std::nullopt;  // a torn write is treated as a miss
  }
  std::unique_lock lock(mutex_);
  memo_.emplace(key, entry);
  return entry;
}

void ResponseCache::store(const std::string& key, const Json& entry) {
  std::unique_lock lock(mutex_);
  write_file_atomic(dir_ / (key + ".json"), entry.dump(2) + "\n");
  memo_[key] = entry;
}

std::optional<std::string> ResponseCache::get_chat(const std::string& key) const {
  auto entry = load(key);
  if (!entry || !entry->contains("response")) return std::nullopt;
  return (*entry)["response"].get<std::string>();
}

void ResponseCache::put_chat(const std::string& key, std::string_view backend_id, std::string_view model_id,
                             const ChatRequest& request, const std::string& response) {
  Json e;
  e["key"] = key;
  e["kind"] = "chat";
  e["backend"] = backend_id;
  e["model"] = model_id;
  e["tag"] = request.tag;
  e["temperature"] = request.temperature;
  e["max_tokens"] = request.max_output_tokens;
  e["seed"] = request.seed ? Json(*request.seed) : Json(nullptr);
  e["prompt"] = request.prompt;
  e["response"] = response;
  e["timestamp"] = utc_timestamp();
  store(key, e);
}

std::optional<std::vector<double>> ResponseCache::get_embedding(const std::string& key) const {
  auto entry = load(key);
  if (!entry || !entry->contains("vector")) return std::nullopt;
  return (*entry)["vector"].get<std::vector<double>>();
}

void ResponseCache::put_embedding(const std::string& key, std::string_view backend_id, std::string_view model_id,
                                  std::string_view text, const std::vector<double>& vector) {
  Json e;
  e["key"] = key;
  e["kind"] = "embedding";
  e["backend"] = backend_id;
  e["model"] = model_id;
  e["input"] = text;
  e["vector"] = vector;
  e["timestamp"] = utc_timestamp();
  store(key, e);
}

}  // namespace personasq

#include "personasq/model_gateway.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <thread>

#include "personasq/hashing.hpp"
#include "personasq/text.hpp"

namespace personasq {

namespace {

// Releases a semaphore slot on scope exit.
class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

}  // namespace

std::string_view to_string(CacheMode mode) noexcept {
  switch (mode) {
    case CacheMode::Live: return "live";
    case CacheMode::Record: return "record";
    case CacheMode::Replay: return "replay";
  }
  return "live";
}

CacheMode parse_cache_mode(std::string_view s) {
  if (s == "live") return CacheMode::Live;
  if (s == "record") return CacheMode::Record;
  if (s == "replay") return CacheMode::Replay;
  fail(ErrorCode::ConfigInvalid, "cache mode must be record, replay or live, got '" + std::string(s) + "'");
}

ModelGateway::ModelGateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedding,
                           std::shared_ptr<ResponseCache> cache, GatewayOptions options)
    : chat_(std::move(chat)),
      embedding_(std::move(embedding)),
      cache_(std::move(cache)),
      options_(std::move(options)),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options_.max_in_flight, 1, 1024))) {
  if (options_.mode != CacheMode::Live && !cache_) {
    fail(ErrorCode::ConfigInvalid, "record and replay modes need a response cache");
  }
}

bool ModelGateway::recoverable(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::PayloadParseError:
    case ErrorCode::SchemaViolation:
    case ErrorCode::KeyMismatch:
    case ErrorCode::NormalizationMismatch:
    case ErrorCode::UnknownPersona:
    case ErrorCode::JudgeParseError:
    case ErrorCode::ScoreOutOfRange:
      return true;
    default:
      return false;
  }
}

std::string ModelGateway::chat(const ChatRequest& original) {
  if (!chat_) fail(ErrorCode::BackendUnavailable, "no chat backend configured");
  ChatRequest request = original;
  if (options_.sampling) {
    request.temperature = options_.sampling->temperature;
    request.max_output_tokens = options_.sampling->max_output_tokens;
    request.seed = options_.sampling->seed;
  }
  std::string key;
  if (options_.mode != CacheMode::Live) {
    key = chat_cache_key(chat_->backend_id(), chat_->model_id(), request);
    if (auto hit = cache_->get_chat(key)) return *hit;
    if (options_.mode == CacheMode::Replay) {
      fail(ErrorCode::ReplayMiss, "no cached response for '" + request.tag + "' (key " + key.substr(0, 12) + ")");
    }
  }

  std::string response;
  for (int attempt = 0;; ++attempt) {
    try {
      SlotGuard slot(in_flight_);
      ++backend_calls_;
      response = chat_->complete(request);
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RateLimited || attempt >= options_.rate_limit_retries) throw;
      const auto delay = options_.base_backoff * (1LL << attempt);
      spdlog::warn("rate limited on '{}', retrying in {} ms", request.tag, delay.count());
      std::this_thread::sleep_for(delay);
    }
  }

  if (options_.mode == CacheMode::Record) {
    cache_->put_chat(key, chat_->backend_id(), chat_->model_id(), request, response);
  }
  return response;
}

std::vector<EmbeddingVector> ModelGateway::embed(std::span<const std::string> texts) {
  if (texts.empty()) fail(ErrorCode::EmptyBatch, "embed called with no texts");
  for (const auto& t : texts) {
    if (t.empty()) fail(ErrorCode::EmptyBatch, "embed called with an empty string");
  }
  if (!embedding_) fail(ErrorCode::BackendUnavailable, "no embedding backend configured");

  const std::string backend = embedding_->backend_id();
  const std::string model = embedding_->model_id();
  std::vector<std::optional<std::vector<double>>> found(texts.size());
  std::vector<std::string> keys(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_at;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (options_.mode != CacheMode::Live) {
      keys[i] = embedding_cache_key(backend, model, texts[i]);
      found[i] = cache_->get_embedding(keys[i]);
    }
    if (!found[i]) {
      if (options_.mode == CacheMode::Replay) {
        fail(ErrorCode::ReplayMiss, "no cached embedding (key " + keys[i].substr(0, 12) + ")");
      }
      missing.push_back(texts[i]);
      missing_at.push_back(i);
    }
  }

  if (!missing.empty()) {
    std::vector<std::vector<double>> fresh;
    for (int attempt = 0;; ++attempt) {
      try {
        SlotGuard slot(in_flight_);
        ++backend_calls_;
        fresh = embedding_->embed(missing);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::RateLimited || attempt >= options_.rate_limit_retries) throw;
        std::this_thread::sleep_for(options_.base_backoff * (1LL << attempt));
      }
    }
    if (fresh.size() != missing.size()) {
      fail(ErrorCode::DimensionMismatch, "backend returned " + std::to_string(fresh.size()) + " vectors for " +
                                             std::to_string(missing.size()) + " inputs");
    }
    for (std::size_t j = 0; j < fresh.size(); ++j) found[missing_at[j]] = std::move(fresh[j]);
  }

  const std::size_t dim = found.front()->size();
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (found[i]->size() != dim || dim == 0) {
      fail(ErrorCode::DimensionMismatch, "embedding " + std::to_string(i) + " has dimension " +
                                             std::to_string(found[i]->size()) + ", expected " + std::to_string(dim));
    }
  }
  for (std::size_t j = 0; j < missing_at.size() && options_.mode == CacheMode::Record; ++j) {
    const std::size_t i = missing_at[j];
    cache_->put_embedding(keys[i], backend, model, texts[i], *found[i]);
  }
  for (auto& v : found) out.push_back({std::move(*v), model});
  return out;
}

Json ModelGateway::chat_json(const ChatRequest& request, PayloadShape shape,
                             const std::function<void(const Json&)>& validate) {
  return chat_interpreted(request, [&](std::string_view raw) {
    Json value = parse_json_payload(raw, shape);
    if (validate) validate(value);
    return value;
  });
}

void ModelGateway::persist_failure(const ChatRequest& request, const std::string& response, const Error& error) {
  spdlog::warn("giving up on '{}': {}", request.tag, error.what());
  if (!options_.failure_dir) return;
  Json e;
  e["tag"] = request.tag;
  e["error"] = error.what();
  e["prompt"] = request.prompt;
  e["response"] = response;
  const std::string name = request.tag + "-" + sha256_hex(request.prompt + response).substr(0, 16) + ".json";
  try {
    write_file_atomic(*options_.failure_dir / name, e.dump(2) + "\n");
  } catch (const Error& io) {
    spdlog::warn("could not persist failed payload: {}", io.what());
  }
}

std::string summarize_document(ModelGateway* gateway, const Document& doc, const SummaryOptions& options,
                               const Tokenizer& tokenizer) {
  if (text::trim(doc.text).empty()) fail(ErrorCode::EmptyDocument, "cannot summarize an empty document");
  if (!options.enabled || gateway == nullptr) return head_tokens(doc.text, options.budget_tokens, tokenizer);
  ChatRequest req;
  req.prompt = render_prompt(PromptId::Summarize,
                             {{"BUDGET", std::to_string(options.budget_tokens)}, {"DOCUMENT", doc.text}});
  req.tag = std::string(prompt_name(PromptId::Summarize));
  const std::string summary = gateway->chat(req);
  return head_tokens(summary, options.budget_tokens, tokenizer);
}

}  // namespace personasq

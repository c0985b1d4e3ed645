#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "personasq/corpus.hpp"
#include "personasq/error.hpp"
#include "personasq/json_payload.hpp"
#include "personasq/prompts.hpp"

namespace personasq {

struct ChatRequest {
  std::string prompt;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  std::optional<std::int64_t> seed = 0;
  std::string tag;  // stage label; not part of the cache key
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string backend_id() const = 0;
  virtual std::string model_id() const = 0;
  /// Throws RateLimited or BackendUnavailable on transport failures.
  virtual std::string complete(const ChatRequest& request) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string backend_id() const = 0;
  virtual std::string model_id() const = 0;
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

/// Test double and offline backend. Replies come from, in order: a handler
/// function, the first matching rule, or BackendUnavailable.
class ScriptedChatBackend final : public ChatBackend {
 public:
  struct Rule {
    std::string tag;                    // "*" matches every tag
    std::vector<std::string> contains;  // all must occur in the prompt
    std::string response;
  };
  using Handler = std::function<std::optional<std::string>(const ChatRequest&)>;

  explicit ScriptedChatBackend(std::string model = "scripted-chat");

  /// Script file: {"model": "...", "rules": [{"tag", "contains": [...], "response"}]}.
  /// A non-string "response" is serialized to compact JSON.
  static std::shared_ptr<ScriptedChatBackend> from_file(const std::filesystem::path& path);

  void add_rule(Rule rule);
  void respond(std::string tag, std::string response) { add_rule({std::move(tag), {}, std::move(response)}); }
  void set_handler(Handler handler) { handler_ = std::move(handler); }

  std::string backend_id() const override { return "scripted"; }
  std::string model_id() const override { return model_; }
  std::string complete(const ChatRequest& request) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::string model_;
  std::vector<Rule> rules_;
  Handler handler_;
  std::atomic<std::size_t> calls_{0};
};

class ScriptedEmbeddingBackend final : public EmbeddingBackend {
 public:
  using Handler = std::function<std::vector<double>(const std::string&)>;

  explicit ScriptedEmbeddingBackend(Handler handler, std::string model = "scripted-embedding");

  std::string backend_id() const override { return "scripted"; }
  std::string model_id() const override { return model_; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  Handler handler_;
  std::string model_;
  std::atomic<std::size_t> calls_{0};
};

/// Bag-of-words feature hashing into `dim` buckets. Deterministic and
/// offline; a stand-in when no embedding service is configured.
class HashingEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HashingEmbeddingBackend(std::size_t dim = 64);

  std::string backend_id() const override { return "hashing"; }
  std::string model_id() const override { return "hashing-bow-" + std::to_string(dim_); }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
};

struct HttpEndpoint {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key;
  std::chrono::seconds timeout{120};
};

/// Chat-completions wire protocol: POST {base}/chat/completions.
class OpenAiChatBackend final : public ChatBackend {
 public:
  explicit OpenAiChatBackend(HttpEndpoint endpoint);

  std::string backend_id() const override { return "openai-compatible"; }
  std::string model_id() const override { return endpoint_.model; }
  std::string complete(const ChatRequest& request) override;

  /// JSON body sent for `request`; exposed for wire-format tests.
  Json request_body(const ChatRequest& request) const;

 private:
  HttpEndpoint endpoint_;
};

/// Embeddings wire protocol: POST {base}/embeddings with {model, input}.
class OpenAiEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit OpenAiEmbeddingBackend(HttpEndpoint endpoint);

  std::string backend_id() const override { return "openai-compatible"; }
  std::string model_id() const override { return endpoint_.model; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  HttpEndpoint endpoint_;
};

enum class CacheMode { Live, Record, Replay };

std::string_view to_string(CacheMode mode) noexcept;
CacheMode parse_cache_mode(std::string_view s);

/// Digest of everything that determines a chat response.
std::string chat_cache_key(std::string_view backend_id, std::string_view model_id, const ChatRequest& request);

std::string embedding_cache_key(std::string_view backend_id, std::string_view model_id, std::string_view text);

/// Content-addressed response store: one JSON file per entry, named by key.
/// Concurrent readers, serialized writers.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get_chat(const std::string& key) const;
  void put_chat(const std::string& key, std::string_view backend_id, std::string_view model_id,
                const ChatRequest& request, const std::string& response);

  std::optional<std::vector<double>> get_embedding(const std::string& key) const;
  void put_embedding(const std::string& key, std::string_view backend_id, std::string_view model_id,
                     std::string_view text, const std::vector<double>& vector);

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::optional<Json> load(const std::string& key) const;
  void store(const std::string& key, const Json& entry);

  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, Json> memo_;
};

/// Sampling parameters imposed on every chat request of a gateway.
struct SamplingParams {
  double temperature = 0.0;
  int max_output_tokens = 2048;
  std::optional<std::int64_t> seed = 0;
};

struct GatewayOptions {
  CacheMode mode = CacheMode::Live;
  std::optional<SamplingParams> sampling;  // unset: requests keep their own values
  std::size_t max_in_flight = 4;
  int rate_limit_retries = 4;
  std::chrono::milliseconds base_backoff{500};
  std::optional<std::filesystem::path> failure_dir;  // offending payloads land here
};

/// Uniform entry point for chat and embedding calls, with record/replay
/// caching, rate-limit backoff, and a bound on concurrent backend requests.
class ModelGateway {
 public:
  ModelGateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedding,
               std::shared_ptr<ResponseCache> cache, GatewayOptions options);

  std::string chat(const ChatRequest& request);

  /// Throws EmptyBatch for an empty batch or an empty string, DimensionMismatch
  /// for ragged vectors.
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts);

  /// Sends `request` and hands the reply to `interpret`. If interpretation
  /// fails with a recoverable code, re-asks once with a corrective suffix;
  /// a second failure is rethrown after the payload is persisted.
  template <typename Interpret>
  auto chat_interpreted(const ChatRequest& request, Interpret&& interpret)
      -> decltype(interpret(std::string_view{}));

  /// chat_interpreted with parse_json_payload(shape) as the interpretation
  /// step, followed by an optional validator.
  Json chat_json(const ChatRequest& request, PayloadShape shape,
                 const std::function<void(const Json&)>& validate = {});

  const GatewayOptions& options() const noexcept { return options_; }
  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
  bool has_embedding() const noexcept { return embedding_ != nullptr; }

 private:
  static bool recoverable(ErrorCode code) noexcept;
  void persist_failure(const ChatRequest& request, const std::string& response, const Error& error);

  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbeddingBackend> embedding_;
  std::shared_ptr<ResponseCache> cache_;
  GatewayOptions options_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::size_t> backend_calls_{0};
};

template <typename Interpret>
auto ModelGateway::chat_interpreted(const ChatRequest& request, Interpret&& interpret)
    -> decltype(interpret(std::string_view{})) {
  const std::string first = chat(request);
  try {
    return interpret(std::string_view(first));
  } catch (const Error& e) {
    if (!recoverable(e.code())) throw;
    ChatRequest retry = request;
    retry.prompt += corrective_suffix(e.what());
    retry.tag += ".retry";
    const std::string second = chat(retry);
    try {
      return interpret(std::string_view(second));
    } catch (const Error& again) {
      persist_failure(retry, second, again);
      throw;
    }
  }
}

struct SummaryOptions {
  bool enabled = false;
  std::size_t budget_tokens = 300;
};

/// Backend summary capped at `budget_tokens`, or the document head when
/// summarization is disabled.
std::string summarize_document(ModelGateway* gateway, const Document& doc, const SummaryOptions& options,
                               const Tokenizer& tokenizer = default_tokenizer());

}  // namespace personasq

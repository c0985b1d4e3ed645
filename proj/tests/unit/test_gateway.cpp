#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "personasq/error.hpp"
#include "personasq/model_gateway.hpp"
#include "test_support.hpp"

namespace personasq {
namespace {

using testing::TempDir;

ChatRequest request(std::string prompt, std::string tag = "gen_personas") {
  ChatRequest r;
  r.prompt = std::move(prompt);
  r.tag = std::move(tag);
  return r;
}

std::unique_ptr<ModelGateway> cached_gateway(std::shared_ptr<ChatBackend> chat, const TempDir& dir, CacheMode mode,
                                             std::shared_ptr<EmbeddingBackend> embedding = nullptr) {
  GatewayOptions opts;
  opts.mode = mode;
  opts.base_backoff = std::chrono::milliseconds(1);
  return std::make_unique<ModelGateway>(std::move(chat), std::move(embedding),
                                        std::make_shared<ResponseCache>(dir / "cache"), opts);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

TEST(ScriptedBackend, PassesResponseThrough) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("gen_personas", "scripted reply");
  auto gw = testing::live_gateway(backend);
  EXPECT_EQ(gw->chat(request("anything")), "scripted reply");
}

TEST(ScriptedBackend, RulesMatchOnContent) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->add_rule({"gen_questions", {"alpha"}, "A"});
  backend->add_rule({"gen_questions", {}, "fallback"});
  auto gw = testing::live_gateway(backend);
  EXPECT_EQ(gw->chat(request("has alpha", "gen_questions")), "A");
  EXPECT_EQ(gw->chat(request("has beta", "gen_questions")), "fallback");
  EXPECT_EQ(code_of([&] { gw->chat(request("x", "other")); }), ErrorCode::BackendUnavailable);
}

TEST(ResponseCacheModes, RecordServesRepeatFromCache) {
  TempDir dir;
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("*", "R");
  auto gw = cached_gateway(backend, dir, CacheMode::Record);
  EXPECT_EQ(gw->chat(request("p")), "R");
  EXPECT_EQ(gw->chat(request("p")), "R");
  EXPECT_EQ(backend->calls(), 1u);
  EXPECT_EQ(gw->backend_calls(), 1u);
}

TEST(ResponseCacheModes, ReplayReadsRecordedEntries) {
  TempDir dir;
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("*", "recorded \"bytes\"\n");
  cached_gateway(backend, dir, CacheMode::Record)->chat(request("p"));

  auto replay_backend = std::make_shared<ScriptedChatBackend>();
  auto replay = cached_gateway(replay_backend, dir, CacheMode::Replay);
  EXPECT_EQ(replay->chat(request("p")), "recorded \"bytes\"\n");
  EXPECT_EQ(replay_backend->calls(), 0u);
  EXPECT_EQ(code_of([&] { replay->chat(request("unseen")); }), ErrorCode::ReplayMiss);
  EXPECT_EQ(replay_backend->calls(), 0u);
}

TEST(ResponseCacheModes, TagIsNotPartOfTheKey) {
  TempDir dir;
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("*", "R");
  auto gw = cached_gateway(backend, dir, CacheMode::Record);
  gw->chat(request("p", "a"));
  gw->chat(request("p", "b"));
  EXPECT_EQ(backend->calls(), 1u);
}

TEST(ResponseCacheModes, LiveNeverCaches) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("*", "R");
  auto gw = testing::live_gateway(backend);
  gw->chat(request("p"));
  gw->chat(request("p"));
  EXPECT_EQ(backend->calls(), 2u);
}

TEST(CacheKey, SensitiveToEveryInput) {
  ChatRequest base = request("prompt");
  const std::string k = chat_cache_key("b", "m", base);
  EXPECT_EQ(k, chat_cache_key("b", "m", base));
  ChatRequest r = base;
  r.prompt = "prompt.";
  EXPECT_NE(k, chat_cache_key("b", "m", r));
  r = base;
  r.temperature = 0.5;
  EXPECT_NE(k, chat_cache_key("b", "m", r));
  r = base;
  r.seed = 1;
  EXPECT_NE(k, chat_cache_key("b", "m", r));
  r = base;
  r.max_output_tokens = 10;
  EXPECT_NE(k, chat_cache_key("b", "m", r));
  EXPECT_NE(k, chat_cache_key("b", "m2", base));
  EXPECT_NE(k, chat_cache_key("b2", "m", base));
  EXPECT_EQ(k.size(), 64u);
}

TEST(Sampling, GatewayDefaultsOverrideRequests) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  ChatRequest seen;
  backend->set_handler([&](const ChatRequest& r) {
    seen = r;
    return std::optional<std::string>("ok");
  });
  GatewayOptions opts;
  opts.sampling = SamplingParams{0.7, 99, 5};
  ModelGateway gw(backend, nullptr, nullptr, opts);
  gw.chat(request("p"));
  EXPECT_DOUBLE_EQ(seen.temperature, 0.7);
  EXPECT_EQ(seen.max_output_tokens, 99);
  EXPECT_EQ(seen.seed, 5);
}

class FlakyBackend final : public ChatBackend {
 public:
  explicit FlakyBackend(int failures) : failures_(failures) {}
  std::string backend_id() const override { return "flaky"; }
  std::string model_id() const override { return "m"; }
  std::string complete(const ChatRequest&) override {
    if (calls_++ < failures_) fail(ErrorCode::RateLimited, "429");
    return "ok";
  }
  int calls() const { return calls_; }

 private:
  int failures_;
  std::atomic<int> calls_{0};
};

TEST(RateLimit, RetriesWithBackoff) {
  auto backend = std::make_shared<FlakyBackend>(2);
  auto gw = testing::live_gateway(backend);
  EXPECT_EQ(gw->chat(request("p")), "ok");
  EXPECT_EQ(backend->calls(), 3);
}

TEST(RateLimit, SurfacesAfterBoundedRetries) {
  auto backend = std::make_shared<FlakyBackend>(100);
  auto gw = testing::live_gateway(backend);
  EXPECT_EQ(code_of([&] { gw->chat(request("p")); }), ErrorCode::RateLimited);
  EXPECT_EQ(backend->calls(), 5);
}

class CountingBackend final : public ChatBackend {
 public:
  std::string backend_id() const override { return "count"; }
  std::string model_id() const override { return "m"; }
  std::string complete(const ChatRequest&) override {
    const int now = ++active_;
    int prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active_;
    return "x";
  }
  int peak() const { return peak_; }

 private:
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

TEST(Concurrency, InFlightLimitRespected) {
  auto backend = std::make_shared<CountingBackend>();
  GatewayOptions opts;
  opts.max_in_flight = 2;
  ModelGateway gw(backend, nullptr, nullptr, opts);
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { gw.chat(request("p")); });
  threads.clear();
  EXPECT_LE(backend->peak(), 2);
  EXPECT_GE(backend->peak(), 1);
}

TEST(ChatInterpreted, OneCorrectiveRetry) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->add_rule({"score_goals", {"could not be used"}, R"({"g": 5})"});
  backend->add_rule({"score_goals", {}, "not json"});
  auto gw = testing::live_gateway(backend);
  const Json j = gw->chat_json(request("p", "score_goals"), PayloadShape::MapOfIntegers);
  EXPECT_EQ(j["g"], 5);
  EXPECT_EQ(backend->calls(), 2u);
}

TEST(ChatInterpreted, PersistsFailureAfterRetry) {
  TempDir dir;
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("*", "still not json");
  GatewayOptions opts;
  opts.failure_dir = dir / "failures";
  ModelGateway gw(backend, nullptr, nullptr, opts);
  EXPECT_EQ(code_of([&] { gw.chat_json(request("p"), PayloadShape::Object); }), ErrorCode::PayloadParseError);
  EXPECT_EQ(backend->calls(), 2u);
  EXPECT_FALSE(std::filesystem::is_empty(dir / "failures"));
}

TEST(ChatInterpreted, NonRecoverableErrorsAreNotRetried) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("*", "{}");
  auto gw = testing::live_gateway(backend);
  EXPECT_EQ(code_of([&] {
              gw->chat_interpreted(request("p"), [](std::string_view) -> int {
                fail(ErrorCode::InvalidArgument, "no");
              });
            }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(backend->calls(), 1u);
}

TEST(Embed, OneVectorPerInput) {
  auto emb = std::make_shared<ScriptedEmbeddingBackend>([](const std::string&) { return std::vector<double>{1, 0, 0}; });
  auto gw = testing::live_gateway(nullptr, emb);
  const std::vector<std::string> texts = {"a"};
  const auto out = gw->embed(texts);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].values, (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(out[0].model_id, "scripted-embedding");
}

TEST(Embed, EmptyBatchAndRaggedVectors) {
  auto emb = std::make_shared<ScriptedEmbeddingBackend>(
      [](const std::string& t) { return t == "a" ? std::vector<double>{1, 0, 0} : std::vector<double>{1, 0, 0, 0}; });
  auto gw = testing::live_gateway(nullptr, emb);
  EXPECT_EQ(code_of([&] { gw->embed(std::vector<std::string>{}); }), ErrorCode::EmptyBatch);
  EXPECT_EQ(code_of([&] { gw->embed(std::vector<std::string>{""}); }), ErrorCode::EmptyBatch);
  EXPECT_EQ(code_of([&] { gw->embed(std::vector<std::string>{"a", "b"}); }), ErrorCode::DimensionMismatch);
}

TEST(Embed, RecordThenReplay) {
  TempDir dir;
  auto emb = std::make_shared<ScriptedEmbeddingBackend>([](const std::string& t) {
    return std::vector<double>{static_cast<double>(t.size()), 0.5};
  });
  const std::vector<std::string> texts = {"ab", "abc", "ab"};
  const auto recorded = cached_gateway(nullptr, dir, CacheMode::Record, emb)->embed(texts);
  auto replay = cached_gateway(nullptr, dir, CacheMode::Replay,
                               std::make_shared<ScriptedEmbeddingBackend>([](const std::string&) {
                                 ADD_FAILURE() << "backend used in replay";
                                 return std::vector<double>{0, 0};
                               }));
  const auto replayed = replay->embed(texts);
  ASSERT_EQ(replayed.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(replayed[i].values, recorded[i].values);
  EXPECT_EQ(code_of([&] { replay->embed(std::vector<std::string>{"new"}); }), ErrorCode::ReplayMiss);
}

TEST(HashingEmbedding, DeterministicBagOfWords) {
  HashingEmbeddingBackend h(16);
  const std::vector<std::string> texts = {"Profit margin", "profit MARGIN", "risk"};
  const auto v = h.embed(texts);
  EXPECT_EQ(v[0], v[1]);
  EXPECT_NE(v[0], v[2]);
  EXPECT_EQ(v[0].size(), 16u);
}

TEST(Summarize, DisabledUsesHead) {
  const Document small = ingest_document(testing::tokens(100), {});
  EXPECT_EQ(summarize_document(nullptr, small, {false, 200}), small.text);
  const Document big = ingest_document(testing::tokens(5000), {});
  EXPECT_EQ(summarize_document(nullptr, big, {false, 300}), testing::tokens(300));
}

TEST(Summarize, BackendSummary) {
  auto backend = std::make_shared<ScriptedChatBackend>();
  backend->respond("summarize", "SUMMARY");
  auto gw = testing::live_gateway(backend);
  const Document d = ingest_document("any document text", {});
  EXPECT_EQ(summarize_document(gw.get(), d, {true, 300}), "SUMMARY");
}

}  // namespace
}  // namespace personasq

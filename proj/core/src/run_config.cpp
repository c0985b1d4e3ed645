#include "personasq/run_config.hpp"

#include <algorithm>
#include <cstdlib>

#include "personasq/hashing.hpp"

namespace personasq {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
void read(const Json& obj, const char* key, T& out) {
  if (!obj.is_object() || !obj.contains(key) || obj[key].is_null()) return;
  try {
    out = obj[key].get<T>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("config field '") + key + "': " + e.what());
  }
}

BackendConfig parse_backend(const Json& j, const fs::path& base) {
  BackendConfig b;
  if (!j.is_object()) fail(ErrorCode::ConfigInvalid, "backend entries must be objects");
  read(j, "kind", b.kind);
  read(j, "base_url", b.base_url);
  read(j, "model", b.model);
  read(j, "dim", b.dim);
  std::string script;
  read(j, "script", script);
  if (!script.empty()) b.script = resolve(base, script);
  return b;
}

Json backend_json(const BackendConfig& b) {
  Json j;
  j["kind"] = b.kind;
  j["base_url"] = b.base_url;
  j["model"] = b.model;
  j["script"] = b.script.generic_string();
  j["dim"] = b.dim;
  return j;
}

}  // namespace

RunConfig parse_run_config(const Json& doc, const fs::path& base) {
  if (!doc.is_object()) fail(ErrorCode::ConfigInvalid, "config must be a JSON object");
  RunConfig c;

  const Json corpus = doc.value("corpus", Json::object());
  if (corpus.is_string()) {
    c.corpus = resolve(base, corpus.get<std::string>());
  } else {
    std::string path;
    read(corpus, "path", path);
    if (!path.empty()) c.corpus = resolve(base, path);
    read(corpus, "domain", c.corpus_defaults.domain);
    read(corpus, "subdomain", c.corpus_defaults.subdomain);
    std::string vertical;
    read(corpus, "vertical", vertical);
    if (!vertical.empty()) c.corpus_defaults.vertical = vertical;
  }

  const Json backends = doc.value("backends", Json::object());
  if (backends.contains("chat")) c.chat = parse_backend(backends["chat"], base);
  c.judge = backends.contains("judge") ? parse_backend(backends["judge"], base) : c.chat;
  c.embedding.kind = "hashing";
  if (backends.contains("embedding")) c.embedding = parse_backend(backends["embedding"], base);

  const Json th = doc.value("thresholds", Json::object());
  read(th, "goal_min_score", c.persona.goal_min_score);
  read(th, "goals_per_persona", c.persona.goals_per_persona);
  read(th, "question_min_score", c.gates.question_min_score);
  read(th, "len_min", c.gates.len_min);
  read(th, "len_max", c.gates.len_max);

  const Json ch = doc.value("chunking", Json::object());
  read(ch, "chunk_size", c.chunking.chunk_size);
  read(ch, "overlap", c.chunking.overlap);
  read(ch, "min_doc_tokens", c.chunking.min_doc_tokens);

  const Json seeds = doc.value("seeds", Json::object());
  read(seeds, "sampling", c.sampling_seed);
  read(seeds, "split", c.split_seed);
  read(seeds, "request", c.request_seed);

  const Json sampling = doc.value("sampling", Json::object());
  read(sampling, "temperature", c.temperature);
  read(sampling, "max_output_tokens", c.max_output_tokens);

  read(doc, "concurrency", c.concurrency);
  const Json cache = doc.value("cache", Json::object());
  std::string mode = std::string(to_string(c.cache_mode));
  read(cache, "mode", mode);
  c.cache_mode = parse_cache_mode(mode);
  std::string cache_dir;
  read(cache, "dir", cache_dir);
  c.cache_dir = resolve(base, cache_dir.empty() ? "cache" : cache_dir);

  read(doc, "context_budget_tokens", c.context_budget_tokens);
  const Json summary = doc.value("summary", Json::object());
  read(summary, "enabled", c.summary.enabled);
  read(summary, "budget_tokens", c.summary.budget_tokens);

  const Json eval = doc.value("eval", Json::object());
  read(eval, "top_k", c.top_k);
  read(eval, "judge_metrics", c.judge_metrics);

  std::string rankings;
  read(doc, "rankings", rankings);
  if (!rankings.empty()) c.rankings = resolve(base, rankings);

  const Json ft = doc.value("finetune", Json::object());
  read(ft, "variant", c.finetune_variant);
  read(ft, "max_chunk_tokens", c.max_chunk_tokens);
  if (ft.contains("split")) {
    std::vector<double> r;
    read(ft, "split", r);
    if (r.size() != 3) fail(ErrorCode::ConfigInvalid, "finetune.split needs three ratios");
    c.split = {r[0], r[1], r[2]};
  }
  const Json hp = ft.value("hyperparameters", Json::object());
  read(hp, "epochs", c.training.epochs);
  read(hp, "learning_rate", c.training.learning_rate);
  read(hp, "per_device_batch_size", c.training.per_device_batch_size);
  read(hp, "gradient_accumulation_steps", c.training.gradient_accumulation_steps);

  validate(c);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  Json doc;
  try {
    doc = Json::parse(read_file(path), nullptr, true, true);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

void validate(const RunConfig& c) {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::ConfigInvalid, what);
  };
  check(c.persona.goal_min_score >= 1 && c.persona.goal_min_score <= 5, "goal_min_score must be in 1..5");
  check(c.gates.question_min_score >= 1 && c.gates.question_min_score <= 5, "question_min_score must be in 1..5");
  check(c.persona.goals_per_persona >= 1, "goals_per_persona must be >= 1");
  check(c.gates.len_min <= c.gates.len_max, "len_min must not exceed len_max");
  check(c.chunking.chunk_size >= 1 && c.chunking.overlap < c.chunking.chunk_size, "need 0 <= overlap < chunk_size");
  check(c.chunking.min_doc_tokens >= 1, "min_doc_tokens must be >= 1");
  check(c.concurrency >= 1 && c.concurrency <= 1024, "concurrency must be in 1..1024");
  check(c.temperature >= 0.0, "temperature must be >= 0");
  check(c.max_output_tokens >= 1, "max_output_tokens must be >= 1");
  check(c.context_budget_tokens >= 1, "context_budget_tokens must be >= 1");
  check(c.top_k >= 1, "eval.top_k must be >= 1");
  check(c.max_chunk_tokens >= 1, "finetune.max_chunk_tokens must be >= 1");
  check(c.finetune_variant == "persona" || c.finetune_variant == "plain" || c.finetune_variant == "both",
        "finetune.variant must be persona, plain or both");
  for (const auto* b : {&c.chat, &c.judge}) {
    check(b->kind == "openai" || b->kind == "scripted", "chat backend kind must be openai or scripted");
    check(b->kind != "openai" || !b->base_url.empty(), "openai backends need base_url");
  }
  check(c.embedding.kind == "openai" || c.embedding.kind == "hashing",
        "embedding backend kind must be openai or hashing");
  check(c.embedding.kind != "hashing" || c.embedding.dim >= 1, "hashing embedding needs dim >= 1");
  for (const auto& m : c.judge_metrics) {
    const auto& names = judge_metrics();
    check(std::any_of(names.begin(), names.end(), [&](const auto& spec) { return spec.name == m; }),
          "unknown judge metric '" + m + "'");
  }
  const double sum = c.split.train + c.split.validation + c.split.test;
  check(sum > 1.0 - 1e-9 && sum < 1.0 + 1e-9 && c.split.train >= 0 && c.split.validation >= 0 && c.split.test >= 0,
        "finetune.split ratios must be non-negative and sum to 1");
}

Json RunConfig::to_json() const {
  Json j;
  j["corpus"] = {{"path", corpus.generic_string()},
                 {"domain", corpus_defaults.domain},
                 {"subdomain", corpus_defaults.subdomain},
                 {"vertical", corpus_defaults.vertical ? Json(*corpus_defaults.vertical) : Json(nullptr)}};
  j["backends"] = {{"chat", backend_json(chat)}, {"judge", backend_json(judge)}, {"embedding", backend_json(embedding)}};
  j["thresholds"] = {{"goal_min_score", persona.goal_min_score},
                     {"goals_per_persona", persona.goals_per_persona},
                     {"question_min_score", gates.question_min_score},
                     {"len_min", gates.len_min},
                     {"len_max", gates.len_max}};
  j["chunking"] = {{"chunk_size", chunking.chunk_size},
                   {"overlap", chunking.overlap},
                   {"min_doc_tokens", chunking.min_doc_tokens}};
  j["seeds"] = {{"sampling", sampling_seed}, {"split", split_seed}, {"request", request_seed}};
  j["sampling"] = {{"temperature", temperature}, {"max_output_tokens", max_output_tokens}};
  j["concurrency"] = concurrency;
  j["cache"] = {{"mode", to_string(cache_mode)}, {"dir", cache_dir.generic_string()}};
  j["context_budget_tokens"] = context_budget_tokens;
  j["summary"] = {{"enabled", summary.enabled}, {"budget_tokens", summary.budget_tokens}};
  j["eval"] = {{"top_k", top_k}, {"judge_metrics", judge_metrics}};
  j["rankings"] = rankings ? Json(rankings->generic_string()) : Json(nullptr);
  j["finetune"] = {{"variant", finetune_variant},
                   {"split", {split.train, split.validation, split.test}},
                   {"max_chunk_tokens", max_chunk_tokens},
                   {"hyperparameters",
                    {{"epochs", training.epochs},
                     {"learning_rate", training.learning_rate},
                     {"per_device_batch_size", training.per_device_batch_size},
                     {"gradient_accumulation_steps", training.gradient_accumulation_steps}}}};
  return j;
}

std::string RunConfig::digest() const {
  Json j = to_json();
  j.erase("concurrency");
  j["cache"].erase("mode");
  j["cache"].erase("dir");
  // Absolute paths would tie the digest to the checkout location.
  j["corpus"]["path"] = corpus.filename().generic_string();
  for (const char* b : {"chat", "judge", "embedding"}) {
    j["backends"][b]["script"] = fs::path(j["backends"][b]["script"].get<std::string>()).filename().generic_string();
  }
  j["rankings"] = rankings ? Json(rankings->filename().generic_string()) : Json(nullptr);
  return sha256_hex(j.dump());
}

std::string api_key_from_env() {
  const char* key = std::getenv("PERSONA_SQ_API_KEY");
  return key ? std::string(key) : std::string();
}

}  // namespace personasq

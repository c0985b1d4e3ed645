#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "personasq/corpus.hpp"
#include "personasq/finetune_data.hpp"
#include "personasq/jsonl.hpp"
#include "personasq/model_gateway.hpp"
#include "personasq/persona_pipeline.hpp"
#include "personasq/question_pipeline.hpp"

namespace personasq {

/// Where a model comes from. kind: "openai" (HTTP), "scripted" (rules file),
/// or for embeddings additionally "hashing".
struct BackendConfig {
  std::string kind = "scripted";
  std::string base_url;
  std::string model;
  std::filesystem::path script;
  std::size_t dim = 64;
};

struct RunConfig {
  std::filesystem::path corpus;  // JSONL file or directory of .txt files
  DocumentMeta corpus_defaults;  // applied to .txt documents

  BackendConfig chat;
  BackendConfig judge;
  BackendConfig embedding;

  PersonaThresholds persona;
  GateThresholds gates;
  ChunkingOptions chunking;

  std::uint64_t sampling_seed = 42;
  std::uint64_t split_seed = 42;
  std::int64_t request_seed = 0;
  double temperature = 0.0;
  int max_output_tokens = 2048;

  std::size_t concurrency = 4;
  CacheMode cache_mode = CacheMode::Record;
  std::filesystem::path cache_dir = "cache";

  std::size_t context_budget_tokens = 6000;
  SummaryOptions summary;

  std::size_t top_k = 3;
  std::vector<std::string> judge_metrics;

  std::optional<std::filesystem::path> rankings;

  std::string finetune_variant = "persona";  // persona | plain | both
  SplitRatios split;
  std::size_t max_chunk_tokens = 1500;
  TrainingHyperparameters training;

  /// Digest over everything that affects stage outputs (excludes concurrency
  /// and cache mode).
  std::string digest() const;

  Json to_json() const;
};

/// Parses a config document; relative paths resolve against `base_dir`.
/// Throws ConfigInvalid for out-of-range values or unknown kinds.
RunConfig parse_run_config(const Json& doc, const std::filesystem::path& base_dir);

RunConfig load_run_config(const std::filesystem::path& path);

/// Throws ConfigInvalid when a value is outside its documented range.
void validate(const RunConfig& config);

/// API key from PERSONA_SQ_API_KEY, empty when unset.
std::string api_key_from_env();

}  // namespace personasq

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "personasq/corpus.hpp"
#include "personasq/jsonl.hpp"

namespace personasq {

enum class ChatVariant { Persona, Plain };

std::string_view to_string(ChatVariant v) noexcept;

/// Two-turn supervised example.
struct ChatExample {
  std::string doc_id;
  std::size_t chunk_index = 0;
  std::string user_text;
  std::string assistant_text;
  ChatVariant variant = ChatVariant::Plain;

  friend bool operator==(const ChatExample&, const ChatExample&) = default;
};

/// User instruction for the persona variant, with `document` substituted.
std::string persona_user_text(std::string_view document);
/// User instruction for the plain variant, with `document` substituted.
std::string plain_user_text(std::string_view document);

inline constexpr std::string_view kReaderProfilePrefix = "###Reader profile: ";
inline constexpr std::string_view kQuestionPrefix = "###Question: ";

/// Throws ChunkTooLong above `max_chunk_tokens` and EmptyQuestion for a blank question.
ChatExample assemble_persona_example(const Chunk& chunk, std::string_view persona_description,
                                     std::string_view question, std::size_t max_chunk_tokens = 1500);

ChatExample assemble_plain_example(const Chunk& chunk, std::string_view question,
                                   std::size_t max_chunk_tokens = 1500);

/// {"messages":[{"role":"user",...},{"role":"assistant",...}],"doc_id","chunk_index","variant"}
Json to_json(const ChatExample& example);
ChatExample chat_example_from_json(const Json& row);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<ChatExample> train;
  std::vector<ChatExample> validation;
  std::vector<ChatExample> test;
  std::uint64_t split_seed = 0;
};

/// Shuffles distinct doc ids under `seed`, gives validation and test
/// floor(n * ratio) documents each and train the remainder. Examples follow
/// their doc id and keep input order. Throws BadRatios unless the ratios are
/// non-negative and sum to 1 within 1e-9.
DatasetSplit split_dataset(std::span<const ChatExample> examples, const SplitRatios& ratios, std::uint64_t seed);

/// Document counts per split that split_dataset produces for `n` documents.
std::array<std::size_t, 3> split_allocation(std::size_t n, const SplitRatios& ratios);

/// The seven major verticals; anything else reports as "Unknown".
const std::vector<std::string>& known_verticals();
std::string canonical_vertical(std::string_view tag);

struct VerticalStats {
  std::string vertical;
  std::size_t documents = 0;
  std::size_t questions = 0;
  double avg_questions_per_document = 0.0;
  double median_words_in_question = 0.0;
};

struct DatasetStats {
  std::vector<VerticalStats> verticals;  // known verticals in fixed order, then Unknown; empty rows omitted
  VerticalStats overall;
};

/// One question and the vertical tag of its document.
struct QuestionRecord {
  std::string doc_id;
  std::string vertical;
  std::string question;
};

/// Median of word counts; the mean of the two middle values for even sizes.
double median(std::vector<std::size_t> values);

DatasetStats dataset_stats(std::span<const QuestionRecord> questions);

Json to_json(const DatasetStats& stats);

struct TrainingHyperparameters {
  int epochs = 1;
  double learning_rate = 1e-5;
  int per_device_batch_size = 4;
  int gradient_accumulation_steps = 1;
};

}  // namespace personasq

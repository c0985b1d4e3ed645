#include "personasq/finetune_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "personasq/error.hpp"
#include "personasq/hashing.hpp"
#include "personasq/text.hpp"

namespace personasq {

namespace {

constexpr std::string_view kPersonaInstruction =
    "Please read the document below and then do the following: 1) make some predictions about the reader who is "
    "likely to read it, including the reader's profession, the reader's intent of reading this document, and what "
    "this reader might already know related to this document; and  2) generate a guiding question such that the "
    "answer to this question will be interesting and informative to the reader you just predicted. ###Document:";

constexpr std::string_view kPlainInstruction =
    "Please read the document below and then generate a guiding question such that the answer to this question "
    "will be interesting and informative to the reader who is reading this document. ###Document: ";

void check_inputs(const Chunk& chunk, std::string_view question, std::size_t max_chunk_tokens) {
  if (chunk.token_length() > max_chunk_tokens) {
    fail(ErrorCode::ChunkTooLong, chunk.doc_id + "#" + std::to_string(chunk.index) + " spans " +
                                      std::to_string(chunk.token_length()) + " tokens, limit " +
                                      std::to_string(max_chunk_tokens));
  }
  if (text::trim(question).empty()) fail(ErrorCode::EmptyQuestion, "question text is empty");
}

}  // namespace

std::string_view to_string(ChatVariant v) noexcept { return v == ChatVariant::Persona ? "persona" : "plain"; }

std::string persona_user_text(std::string_view document) {
  std::string out(kPersonaInstruction);
  out.append(document);
  return out;
}

std::string plain_user_text(std::string_view document) {
  std::string out(kPlainInstruction);
  out.append(document);
  return out;
}

ChatExample assemble_persona_example(const Chunk& chunk, std::string_view persona_description,
                                     std::string_view question, std::size_t max_chunk_tokens) {
  check_inputs(chunk, question, max_chunk_tokens);
  ChatExample ex;
  ex.doc_id = chunk.doc_id;
  ex.chunk_index = chunk.index;
  ex.variant = ChatVariant::Persona;
  ex.user_text = persona_user_text(chunk.text);
  ex.assistant_text.append(kReaderProfilePrefix).append(persona_description).append(" ").append(kQuestionPrefix).append(question);
  return ex;
}

ChatExample assemble_plain_example(const Chunk& chunk, std::string_view question, std::size_t max_chunk_tokens) {
  check_inputs(chunk, question, max_chunk_tokens);
  ChatExample ex;
  ex.doc_id = chunk.doc_id;
  ex.chunk_index = chunk.index;
  ex.variant = ChatVariant::Plain;
  ex.user_text = plain_user_text(chunk.text);
  ex.assistant_text.append(kQuestionPrefix).append(question);
  return ex;
}

Json to_json(const ChatExample& example) {
  Json row;
  row["messages"] = Json::array({Json{{"role", "user"}, {"content", example.user_text}},
                                 Json{{"role", "assistant"}, {"content", example.assistant_text}}});
  row["doc_id"] = example.doc_id;
  row["chunk_index"] = example.chunk_index;
  row["variant"] = to_string(example.variant);
  return row;
}

ChatExample chat_example_from_json(const Json& row) {
  try {
    ChatExample ex;
    const auto& messages = row.at("messages");
    if (messages.size() != 2 || messages[0].at("role") != "user" || messages[1].at("role") != "assistant") {
      fail(ErrorCode::SchemaViolation, "chat example needs one user and one assistant message");
    }
    ex.user_text = messages[0].at("content").get<std::string>();
    ex.assistant_text = messages[1].at("content").get<std::string>();
    ex.doc_id = row.at("doc_id").get<std::string>();
    ex.chunk_index = row.at("chunk_index").get<std::size_t>();
    const std::string variant = row.at("variant").get<std::string>();
    if (variant != "persona" && variant != "plain") fail(ErrorCode::SchemaViolation, "unknown variant " + variant);
    ex.variant = variant == "persona" ? ChatVariant::Persona : ChatVariant::Plain;
    return ex;
  } catch (const Json::exception& e) {
    fail(ErrorCode::SchemaViolation, std::string("malformed chat example: ") + e.what());
  }
}

std::array<std::size_t, 3> split_allocation(std::size_t n, const SplitRatios& r) {
  const auto val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.validation + 1e-9));
  const auto test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.test + 1e-9));
  return {n - val - test, val, test};
}

DatasetSplit split_dataset(std::span<const ChatExample> examples, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::fabs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    fail(ErrorCode::BadRatios, "split ratios must be non-negative and sum to 1");
  }
  std::set<std::string> distinct;
  for (const auto& ex : examples) distinct.insert(ex.doc_id);
  std::vector<std::string> ids(distinct.begin(), distinct.end());

  SplitMix64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[static_cast<std::size_t>(rng.below(i))]);
  }
  const auto [n_train, n_val, n_test] = split_allocation(ids.size(), ratios);
  std::map<std::string, int> bucket;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    bucket[ids[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
  }

  DatasetSplit out;
  out.split_seed = seed;
  for (const auto& ex : examples) {
    switch (bucket.at(ex.doc_id)) {
      case 0: out.train.push_back(ex); break;
      case 1: out.validation.push_back(ex); break;
      default: out.test.push_back(ex); break;
    }
  }
  return out;
}

const std::vector<std::string>& known_verticals() {
  static const std::vector<std::string> v = {"Publishing", "Healthcare", "Research", "Legal",
                                             "Government", "Marketing",  "Science"};
  return v;
}

std::string canonical_vertical(std::string_view tag) {
  const std::string lowered = text::to_lower(text::trim(tag));
  for (const auto& v : known_verticals()) {
    if (text::to_lower(v) == lowered) return v;
  }
  return "Unknown";
}

double median(std::vector<std::size_t> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return static_cast<double>(values[n / 2]);
  return (static_cast<double>(values[n / 2 - 1]) + static_cast<double>(values[n / 2])) / 2.0;
}

namespace {

VerticalStats summarize(std::string name, std::span<const QuestionRecord* const> rows) {
  VerticalStats s;
  s.vertical = std::move(name);
  std::set<std::string> docs;
  std::vector<std::size_t> words;
  for (const auto* r : rows) {
    docs.insert(r->doc_id);
    words.push_back(text::word_count(r->question));
  }
  s.documents = docs.size();
  s.questions = rows.size();
  s.avg_questions_per_document = s.documents ? static_cast<double>(s.questions) / static_cast<double>(s.documents) : 0.0;
  s.median_words_in_question = median(std::move(words));
  return s;
}

}  // namespace

DatasetStats dataset_stats(std::span<const QuestionRecord> questions) {
  std::map<std::string, std::vector<const QuestionRecord*>> by_vertical;
  std::vector<const QuestionRecord*> all;
  for (const auto& q : questions) {
    by_vertical[canonical_vertical(q.vertical)].push_back(&q);
    all.push_back(&q);
  }
  DatasetStats stats;
  std::vector<std::string> order = known_verticals();
  order.push_back("Unknown");
  for (const auto& v : order) {
    auto it = by_vertical.find(v);
    if (it != by_vertical.end()) stats.verticals.push_back(summarize(v, it->second));
  }
  stats.overall = summarize("All", all);
  return stats;
}

Json to_json(const DatasetStats& stats) {
  auto row = [](const VerticalStats& s) {
    Json r;
    r["vertical"] = s.vertical;
    r["documents"] = s.documents;
    r["questions"] = s.questions;
    r["avg_questions_per_document"] = s.avg_questions_per_document;
    r["avg_questions_per_document_display"] = static_cast<long>(std::lround(s.avg_questions_per_document));
    r["median_words_in_question"] = s.median_words_in_question;
    return r;
  };
  Json out;
  out["verticals"] = Json::array();
  for (const auto& s : stats.verticals) out["verticals"].push_back(row(s));
  out["overall"] = row(stats.overall);
  return out;
}

}  // namespace personasq

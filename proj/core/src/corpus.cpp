#include "personasq/corpus.hpp"

#include <algorithm>

#include "personasq/error.hpp"
#include "personasq/hashing.hpp"
#include "personasq/jsonl.hpp"
#include "personasq/text.hpp"

namespace personasq {

namespace fs = std::filesystem;

std::vector<TokenSpan> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && text::is_space(text[i])) ++i;
    if (i == n) break;
    const std::size_t start = i;
    while (i < n && !text::is_space(text[i])) ++i;
    spans.push_back({start, i - start});
  }
  return spans;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const { return text::word_count(text); }

const Tokenizer& default_tokenizer() {
  static const WhitespaceTokenizer tokenizer;
  return tokenizer;
}

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer) {
  return tokenizer.count(text);
}

std::string head_tokens(std::string_view text, std::size_t max_tokens, const Tokenizer& tokenizer) {
  const auto spans = tokenizer.tokenize(text);
  if (spans.empty() || max_tokens == 0) return {};
  if (spans.size() <= max_tokens) return std::string(text.substr(spans.front().offset, spans.back().end() - spans.front().offset));
  return std::string(text.substr(spans.front().offset, spans[max_tokens - 1].end() - spans.front().offset));
}

Document ingest_document(std::string_view raw_text, const DocumentMeta& meta, const Tokenizer& tokenizer) {
  const std::string normalized = text::normalize_whitespace(raw_text);
  if (normalized.empty()) fail(ErrorCode::EmptyDocument, "document text is empty after whitespace normalization");

  Document doc;
  if (meta.id && !text::trim(*meta.id).empty()) {
    doc.id = std::string(text::trim(*meta.id));
  } else {
    doc.id = "doc-" + sha256_hex(normalized).substr(0, 16);
  }
  doc.domain = meta.domain;
  doc.subdomain = meta.subdomain;
  doc.vertical = meta.vertical;
  doc.text = std::string(raw_text);
  doc.token_count = tokenizer.count(doc.text);
  return doc;
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingOptions& options, const Tokenizer& tokenizer) {
  if (options.chunk_size == 0 || options.overlap >= options.chunk_size) {
    fail(ErrorCode::InvalidArgument, "chunking requires 0 <= overlap < chunk_size");
  }
  if (options.min_doc_tokens < 1) fail(ErrorCode::InvalidArgument, "min_doc_tokens must be >= 1");

  const auto spans = tokenizer.tokenize(doc.text);
  const std::size_t n = spans.size();
  if (n < options.min_doc_tokens) {
    fail(ErrorCode::DocumentTooShort, doc.id + " has " + std::to_string(n) + " tokens, minimum is " +
                                          std::to_string(options.min_doc_tokens));
  }

  const std::size_t stride = options.chunk_size - options.overlap;
  std::vector<Chunk> chunks;
  for (std::size_t start = 0;; start += stride) {
    const std::size_t end = std::min(start + options.chunk_size, n);
    Chunk c;
    c.doc_id = doc.id;
    c.index = chunks.size();
    c.start_token = start;
    c.end_token = end;
    const std::size_t byte_begin = spans[start].offset;
    c.text = doc.text.substr(byte_begin, spans[end - 1].end() - byte_begin);
    chunks.push_back(std::move(c));
    if (end == n) break;
  }
  return chunks;
}

namespace {

std::optional<std::string> optional_string(const Json& row, const char* key) {
  auto it = row.find(key);
  if (it == row.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail(ErrorCode::SchemaViolation, std::string("corpus field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

std::vector<Document> load_corpus_jsonl(const fs::path& path, const Tokenizer& tokenizer) {
  std::vector<Document> docs;
  for (const auto& row : read_jsonl(path)) {
    if (!row.is_object()) fail(ErrorCode::SchemaViolation, "corpus rows must be objects");
    DocumentMeta meta;
    meta.id = optional_string(row, "id");
    meta.domain = optional_string(row, "domain").value_or("");
    meta.subdomain = optional_string(row, "subdomain").value_or("");
    meta.vertical = optional_string(row, "vertical");
    const auto body = optional_string(row, "text");
    if (!body) fail(ErrorCode::SchemaViolation, "corpus row missing 'text'");
    docs.push_back(ingest_document(*body, meta, tokenizer));
  }
  return docs;
}

std::vector<Document> load_corpus_directory(const fs::path& dir, const DocumentMeta& defaults,
                                            const Tokenizer& tokenizer) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& file : files) {
    DocumentMeta meta = defaults;
    meta.id.reset();
    docs.push_back(ingest_document(read_file(file), meta, tokenizer));
  }
  return docs;
}

}  // namespace personasq

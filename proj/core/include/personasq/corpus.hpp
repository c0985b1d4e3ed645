#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace personasq {

struct TokenSpan {
  std::size_t offset = 0;
  std::size_t length = 0;

  std::size_t end() const noexcept { return offset + length; }
};

/// Token boundary provider. Implementations must be pure: equal inputs give
/// equal spans. The adapter slot for subword tokenizers is this interface.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::string_view name() const noexcept = 0;
  virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

/// Splits on runs of ASCII whitespace.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::string_view name() const noexcept override { return "whitespace"; }
  std::vector<TokenSpan> tokenize(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer = default_tokenizer());

/// Prefix of `text` ending after its first `max_tokens` tokens (original bytes kept).
std::string head_tokens(std::string_view text, std::size_t max_tokens,
                        const Tokenizer& tokenizer = default_tokenizer());

struct DocumentMeta {
  std::optional<std::string> id;
  std::string domain;
  std::string subdomain;
  std::optional<std::string> vertical;
};

struct Document {
  std::string id;
  std::string domain;
  std::string subdomain;
  std::optional<std::string> vertical;
  std::string text;
  std::size_t token_count = 0;
};

struct Chunk {
  std::string doc_id;
  std::size_t index = 0;
  std::size_t start_token = 0;
  std::size_t end_token = 0;  // exclusive
  std::string text;

  std::size_t token_length() const noexcept { return end_token - start_token; }
};

struct ChunkingOptions {
  std::size_t chunk_size = 1500;
  std::size_t overlap = 200;
  std::size_t min_doc_tokens = 500;
};

/// Builds a Document. Without an explicit id, the id is derived from a hash of
/// the whitespace-normalized text so re-ingesting the same content is stable.
/// Throws EmptyDocument when the text is blank.
Document ingest_document(std::string_view raw_text, const DocumentMeta& meta,
                         const Tokenizer& tokenizer = default_tokenizer());

/// Sliding-window chunking: starts at multiples of (chunk_size - overlap); the
/// final chunk ends at token_count and may be shorter than chunk_size.
/// Throws DocumentTooShort below `min_doc_tokens`, InvalidArgument on bad options.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkingOptions& options = {},
                                  const Tokenizer& tokenizer = default_tokenizer());

/// JSONL corpus: one object per line with fields id, domain, subdomain, vertical, text.
std::vector<Document> load_corpus_jsonl(const std::filesystem::path& path,
                                        const Tokenizer& tokenizer = default_tokenizer());

/// Every regular *.txt file in `dir` (sorted by name) becomes one document.
std::vector<Document> load_corpus_directory(const std::filesystem::path& dir,
                                            const DocumentMeta& defaults,
                                            const Tokenizer& tokenizer = default_tokenizer());

}  // namespace personasq

#include <cmath>
#include <cstdio>

#include "personasq/sq_eval.hpp"

namespace personasq {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::DimensionMismatch,
         "cosine of " + std::to_string(a.size()) + "- and " + std::to_string(b.size()) + "-vectors");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::ZeroVector, "cosine similarity with a zero vector");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::fmax(-1.0, std::fmin(1.0, c));
}

SimilarityMatrix pairwise_persona_similarity(std::span<const PersonaQuestions> questions_by_persona) {
  const std::size_t m = questions_by_persona.size();
  SimilarityMatrix out;
  out.values.assign(m, std::vector<double>(m, 0.0));
  for (const auto& p : questions_by_persona) {
    if (p.embeddings.empty()) fail(ErrorCode::EmptyPersona, "persona '" + p.persona + "' has no questions");
    out.personas.push_back(p.persona);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto& qi = questions_by_persona[i].embeddings;
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto& qj = questions_by_persona[j].embeddings;
      double sum = 0.0;
      for (const auto& a : qi) {
        for (const auto& b : qj) sum += cosine_similarity(a, b);
      }
      const double sim = sum / (static_cast<double>(qi.size()) * static_cast<double>(qj.size()));
      out.values[i][j] = sim;
      out.values[j][i] = sim;
    }
  }
  return out;
}

DocumentSimilarity document_similarity(const SimilarityMatrix& matrix) {
  const std::size_t m = matrix.size();
  if (m < 2) fail(ErrorCode::DegenerateDocument, "need at least two personas, got " + std::to_string(m));
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) sum += matrix.at(i, j);
  }
  const double denom = static_cast<double>(m) * static_cast<double>(m - 1);
  return {sum / denom, sum / (denom / 2.0)};
}

double corpus_similarity(std::span<const double> doc_scores) {
  if (doc_scores.empty()) fail(ErrorCode::NoDocuments, "no non-degenerate documents to average");
  double sum = 0.0;
  for (double s : doc_scores) sum += s;
  return sum / static_cast<double>(doc_scores.size());
}

std::string percent_string(double ratio, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, ratio * 100.0);
  return buf;
}

}  // namespace personasq

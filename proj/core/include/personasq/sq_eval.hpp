#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "personasq/model_gateway.hpp"

namespace personasq {

// ---------------------------------------------------------------------------
// Semantic diversity
// ---------------------------------------------------------------------------

/// Embedded questions generated for one persona on one document.
struct PersonaQuestions {
  std::string persona;
  std::vector<std::vector<double>> embeddings;
};

/// Mean cross-persona question similarity. Symmetric; the diagonal is unused.
struct SimilarityMatrix {
  std::vector<std::string> personas;
  std::vector<std::vector<double>> values;

  std::size_t size() const noexcept { return personas.size(); }
  double at(std::size_t i, std::size_t j) const { return values.at(i).at(j); }
};

/// Throws ZeroVector for a zero-norm input and DimensionMismatch for unequal lengths.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// SIM(p_i, p_j) = sum over all cross pairs of cos(q_e^i, q_f^j) / (t_i * t_j).
/// Throws EmptyPersona when a persona has no questions.
SimilarityMatrix pairwise_persona_similarity(std::span<const PersonaQuestions> questions_by_persona);

struct DocumentSimilarity {
  double sim_eq2 = 0.0;         // sum_{i<j} SIM / (m (m - 1)), the printed denominator
  double sim_mean_pairs = 0.0;  // sum_{i<j} SIM / (m (m - 1) / 2)
};

/// Throws DegenerateDocument when fewer than two personas are present.
DocumentSimilarity document_similarity(const SimilarityMatrix& matrix);

/// Arithmetic mean of per-document scores; throws NoDocuments when empty.
double corpus_similarity(std::span<const double> doc_scores);

/// x100 with one decimal, e.g. 0.844 -> "84.4".
std::string percent_string(double ratio, int decimals = 1);

// ---------------------------------------------------------------------------
// Reverse ranking, persona distribution, coverage
// ---------------------------------------------------------------------------

struct PersonaRanking {
  std::string question_id;
  std::vector<std::string> ordered_personas;  // unique, drawn from the candidates
};

/// Reads {"order 1": name, "order 2": name, ...} ordered by the numeric suffix.
/// Names are matched to candidates exactly, then case-insensitively; repeats
/// are ignored. Throws UnknownPersona for a name outside the candidates.
std::vector<std::string> parse_persona_order(const Json& payload, std::span<const std::string> candidates);

/// Asks the judge to order the candidate personas by interest in `question`.
PersonaRanking reverse_rank_personas(ModelGateway& judge, const std::string& doc_summary,
                                     const std::string& question, std::span<const std::string> candidates,
                                     std::string question_id = {});

struct PersonaDistribution {
  std::size_t total_questions = 0;                 // t
  std::map<std::string, std::size_t> rank1_counts;  // x_i
  std::map<std::string, double> ratios;             // x_i / t
  double normalized_entropy = 0.0;                  // U in [0, 1]
};

/// U = -sum (x_i/t) ln(x_i/t) / ln(t); 0 when t <= 1 or one persona holds all mass.
double normalized_entropy(std::span<const std::size_t> counts, std::size_t total);

/// Rank-1 persona shares over all questions; an empty ranking counts toward t only.
PersonaDistribution persona_distribution(std::span<const PersonaRanking> rankings);

/// Identity of a final question for coverage accounting.
struct RankedQuestion {
  std::string question_id;
  std::string doc_id;
  std::string persona;  // the persona the question was generated for
};

struct CoverageTable {
  std::size_t max_rank = 3;  // K

  struct PersonaRow {
    std::string persona;
    std::size_t total_questions = 0;   // T_i
    std::vector<std::size_t> hits;     // sum_u NUM^k_{u,(i,i)}, k = 1..K
    std::vector<double> ratio;         // corpus R^k_{(i,i)} = hits / T_i
    std::vector<double> top_k;         // cumulative sum of ratio over ranks 1..k
  };
  std::vector<PersonaRow> personas;    // sorted by persona name

  /// One (document, intended persona) cell: NUM^k_{u,(i,j)} for each ranked j.
  struct DocumentCell {
    std::string doc_id;
    std::string persona;
    std::size_t questions = 0;                                // t_{i,u}
    std::map<std::string, std::vector<std::size_t>> counts;   // j -> NUM^k, k = 1..K

    /// R^k_{(i,j)} for this document, k is 1-based.
    double ratio(std::string_view ranked_persona, std::size_t k) const;
  };
  std::vector<DocumentCell> per_document;  // sorted by (doc_id, persona)

  std::vector<double> mean_top_k;  // unweighted mean over personas of top_k[k-1]
};

/// Throws MissingRanking when a question has no ranking entry.
CoverageTable coverage_ratio(std::span<const RankedQuestion> questions,
                             const std::map<std::string, PersonaRanking>& rankings_by_question,
                             std::size_t max_rank = 3);

/// Population skewness g1 = m3 / m2^(3/2); nullopt when n < 3 or all values are equal.
std::optional<double> coverage_skewness(std::span<const double> ratios);

// ---------------------------------------------------------------------------
// LLM judging
// ---------------------------------------------------------------------------

/// Reads the label on the "2. Answer:" line and maps Strongly Disagree..Strongly
/// Agree to 1..5. Throws JudgeParseError for anything else.
int parse_likert_answer(std::string_view response);

/// Likert score 1..5 for one quality dimension (see judge_metrics()).
int judge_question_quality(ModelGateway& judge, const std::string& doc_text, const std::string& question,
                           std::string_view metric);

enum class Outcome { Win, Tie, Lose };

std::string_view to_string(Outcome o) noexcept;

/// Pairwise judgement of a candidate question set against a reference set.
Outcome compare_question_sets(ModelGateway& judge, const std::string& doc_text,
                              std::span<const std::string> candidate, std::span<const std::string> reference);

/// (wins + ties) / total; throws EmptyJudgments for no judgements.
double win_tie_rate(std::span<const Outcome> judgments);

/// Same rate from (possibly averaged) counts.
double win_tie_rate(double wins, double ties, double losses);

// ---------------------------------------------------------------------------
// Human preference ranking aggregation
// ---------------------------------------------------------------------------

/// One rater's ordering of six questions, three from each of two methods.
struct RankingRecord {
  std::string user_id;
  std::array<std::string, 6> method_of;    // rank r+1 -> method label
  std::array<std::string, 6> question_of;  // rank r+1 -> question id
};

struct MethodAggregate {
  double avg_rank = 0.0;
  double win_ratio = 0.0;
  double mrr = 0.0;
  std::size_t records = 0;
};

/// Throws MalformedRecord unless every method owns exactly three ranks.
void validate_record(const RankingRecord& record);

/// avg_rank: mean rank of a method's questions; win_ratio: share of records
/// whose rank-1 question is the method's; mrr: mean over records of the mean
/// reciprocal rank of the method's three questions.
std::map<std::string, MethodAggregate> aggregate_rankings(std::span<const RankingRecord> records);

/// Ranking records from CSV (header user_id,rank_1..rank_6) or JSONL; each
/// rank cell is "method:question_id".
std::vector<RankingRecord> load_ranking_records(const std::filesystem::path& path);

}  // namespace personasq

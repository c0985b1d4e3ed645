#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "personasq/jsonl.hpp"

namespace personasq {

struct DomainStatistics {
  std::string domain;
  std::size_t documents = 0;
  std::size_t personas = 0;
  std::size_t generated_questions = 0;
  std::size_t final_questions = 0;  // after quality control
};

struct RunReport {
  std::vector<DomainStatistics> domains;
  std::optional<double> corpus_similarity;      // mean over pairs
  std::optional<double> corpus_similarity_eq2;  // literal denominator
  std::size_t similarity_documents = 0;
  std::vector<double> top_k;                    // Top-1..Top-K headline coverage
  std::optional<double> skewness;
  std::map<std::string, double> judge_scores;
};

/// Collects the summary numbers from a run directory. Missing files give
/// empty sections.
RunReport load_run_report(const std::filesystem::path& run_dir);

std::string render_text(const RunReport& report);

Json to_json(const RunReport& report);

enum class ReportFormat { Text, Json };

/// Renders the run summary in the requested format.
std::string emit_report(const std::filesystem::path& run_dir, ReportFormat format);

}  // namespace personasq

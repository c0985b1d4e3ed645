#include "personasq/report.hpp"

#include <fmt/format.h>

#include <set>

#include "personasq/sq_eval.hpp"

namespace personasq {

namespace fs = std::filesystem;

namespace {

std::vector<Json> rows_if_present(const fs::path& path) {
  return fs::exists(path) ? read_jsonl(path) : std::vector<Json>{};
}

std::optional<double> number_or_null(const Json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number()) return std::nullopt;
  return obj[key].get<double>();
}

}  // namespace

RunReport load_run_report(const fs::path& run_dir) {
  RunReport report;
  std::map<std::string, DomainStatistics> by_domain;
  std::map<std::string, std::string> domain_of;
  for (const auto& d : rows_if_present(run_dir / "documents.jsonl")) {
    const std::string domain = d.value("domain", "");
    domain_of[d.at("id").get<std::string>()] = domain;
    auto& row = by_domain[domain];
    row.domain = domain;
    ++row.documents;
  }
  for (const auto& g : rows_if_present(run_dir / "persona_groups.jsonl")) {
    ++by_domain[g.value("domain", "")].personas;
  }
  for (const auto& q : rows_if_present(run_dir / "raw_questions.jsonl")) {
    ++by_domain[domain_of[q.at("doc_id").get<std::string>()]].generated_questions;
  }
  for (const auto& q : rows_if_present(run_dir / "final_sqs.jsonl")) {
    ++by_domain[domain_of[q.at("doc_id").get<std::string>()]].final_questions;
  }
  for (auto& [name, row] : by_domain) {
    row.domain = name;
    report.domains.push_back(row);
  }

  const fs::path metrics_path = run_dir / "metrics.json";
  if (fs::exists(metrics_path)) {
    const Json metrics = Json::parse(read_file(metrics_path));
    const Json sim = metrics.value("corpus_similarity", Json::object());
    report.corpus_similarity = number_or_null(sim, "mean_pairs");
    report.corpus_similarity_eq2 = number_or_null(sim, "eq2");
    report.similarity_documents = sim.value("documents", std::size_t{0});
    const Json coverage = metrics.value("coverage", Json::object());
    if (coverage.contains("topK")) report.top_k = coverage["topK"].get<std::vector<double>>();
    const Json skew = metrics.value("skewness", Json::object());
    report.skewness = number_or_null(skew, "overall");
    const Json judged = metrics.value("judge_scores", Json::object());
    for (const auto& [metric, value] : judged.items()) {
      if (value.is_number()) report.judge_scores[metric] = value.get<double>();
    }
  }
  return report;
}

std::string render_text(const RunReport& r) {
  std::string out = "Document statistics\n";
  out += fmt::format("{:<24} {:>6} {:>9} {:>15} {:>10}\n", "Domain", "#Doc", "#Persona", "#Gen. Question",
                     "#after QC");
  for (const auto& d : r.domains) {
    out += fmt::format("{:<24} {:>6} {:>9} {:>15} {:>10}\n", d.domain.empty() ? "(none)" : d.domain, d.documents,
                       d.personas, d.generated_questions, d.final_questions);
  }

  out += "\nCorpus similarity\n";
  if (r.corpus_similarity) {
    out += fmt::format("  mean over pairs  {}\n", percent_string(*r.corpus_similarity));
    if (r.corpus_similarity_eq2) out += fmt::format("  literal          {}\n", percent_string(*r.corpus_similarity_eq2));
    out += fmt::format("  documents        {}\n", r.similarity_documents);
  }

  out += "\nCoverage\n";
  for (std::size_t k = 0; k < r.top_k.size(); ++k) {
    out += fmt::format("  Top-{}  {}\n", k + 1, percent_string(r.top_k[k]));
  }
  if (r.skewness) out += fmt::format("  Skewness  {:.3f}\n", *r.skewness);

  if (!r.judge_scores.empty()) {
    out += "\nJudge scores\n";
    for (const auto& [metric, value] : r.judge_scores) out += fmt::format("  {:<14} {:.2f}\n", metric, value);
  }
  return out;
}

Json to_json(const RunReport& r) {
  Json j;
  j["domains"] = Json::array();
  for (const auto& d : r.domains) {
    j["domains"].push_back({{"domain", d.domain},
                            {"documents", d.documents},
                            {"personas", d.personas},
                            {"generated_questions", d.generated_questions},
                            {"final_questions", d.final_questions}});
  }
  j["corpus_similarity"] = r.corpus_similarity ? Json(*r.corpus_similarity) : Json(nullptr);
  j["corpus_similarity_eq2"] = r.corpus_similarity_eq2 ? Json(*r.corpus_similarity_eq2) : Json(nullptr);
  j["similarity_documents"] = r.similarity_documents;
  j["top_k"] = r.top_k;
  j["skewness"] = r.skewness ? Json(*r.skewness) : Json(nullptr);
  j["judge_scores"] = Json::object();
  for (const auto& [metric, value] : r.judge_scores) j["judge_scores"][metric] = value;
  return j;
}

std::string emit_report(const fs::path& run_dir, ReportFormat format) {
  const RunReport report = load_run_report(run_dir);
  return format == ReportFormat::Json ? to_json(report).dump(2) + "\n" : render_text(report);
}

}  // namespace personasq

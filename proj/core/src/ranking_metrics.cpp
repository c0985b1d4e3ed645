#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "personasq/sq_eval.hpp"
#include "personasq/text.hpp"

namespace personasq {

namespace {

// Numeric rank of an "order N" key; nullopt when there is no trailing integer.
std::optional<long> order_index(std::string_view key) {
  key = text::trim(key);
  std::size_t end = key.size();
  std::size_t begin = end;
  while (begin > 0 && key[begin - 1] >= '0' && key[begin - 1] <= '9') --begin;
  if (begin == end) return std::nullopt;
  long n = 0;
  std::from_chars(key.data() + begin, key.data() + end, n);
  return n;
}

}  // namespace

std::vector<std::string> parse_persona_order(const Json& payload, std::span<const std::string> candidates) {
  if (!payload.is_object()) fail(ErrorCode::SchemaViolation, "persona ranking must be a JSON object");
  std::vector<std::pair<long, std::string>> entries;
  long fallback = 0;
  for (const auto& [key, value] : payload.items()) {
    ++fallback;
    if (value.is_null()) continue;
    if (!value.is_string()) fail(ErrorCode::SchemaViolation, "ranking value for '" + key + "' is not a string");
    entries.emplace_back(order_index(key).value_or(1000000 + fallback), value.get<std::string>());
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::string> ordered;
  for (const auto& [rank, raw_name] : entries) {
    const std::string_view name = text::trim(raw_name);
    if (name.empty() || text::to_lower(name) == "none") continue;
    auto it = std::find(candidates.begin(), candidates.end(), name);
    if (it == candidates.end()) {
      const std::string lowered = text::to_lower(name);
      it = std::find_if(candidates.begin(), candidates.end(),
                        [&](const std::string& c) { return text::to_lower(c) == lowered; });
    }
    if (it == candidates.end()) fail(ErrorCode::UnknownPersona, "'" + std::string(name) + "' is not a candidate persona");
    if (std::find(ordered.begin(), ordered.end(), *it) == ordered.end()) ordered.push_back(*it);
  }
  return ordered;
}

PersonaRanking reverse_rank_personas(ModelGateway& judge, const std::string& doc_summary,
                                     const std::string& question, std::span<const std::string> candidates,
                                     std::string question_id) {
  const std::vector<std::string> list(candidates.begin(), candidates.end());
  ChatRequest req;
  req.tag = std::string(prompt_name(PromptId::PredictPersonas));
  req.prompt = render_prompt(PromptId::PredictPersonas,
                             {{"DOCUMENT", doc_summary}, {"QUESTION", question}, {"PERSONA", text::join(list, ", ")}});
  PersonaRanking out;
  out.question_id = std::move(question_id);
  out.ordered_personas = judge.chat_interpreted(req, [&](std::string_view raw) {
    return parse_persona_order(parse_json_payload(raw, PayloadShape::Object), list);
  });
  return out;
}

double normalized_entropy(std::span<const std::size_t> counts, std::size_t total) {
  if (total <= 1) return 0.0;
  const double t = static_cast<double>(total);
  double h = 0.0;
  std::size_t nonzero = 0;
  for (std::size_t x : counts) {
    if (x == 0) continue;
    ++nonzero;
    const double p = static_cast<double>(x) / t;
    h -= p * std::log(p);
  }
  if (nonzero <= 1 && std::any_of(counts.begin(), counts.end(), [&](std::size_t x) { return x == total; })) {
    return 0.0;
  }
  return h / std::log(t);
}

PersonaDistribution persona_distribution(std::span<const PersonaRanking> rankings) {
  PersonaDistribution d;
  d.total_questions = rankings.size();
  for (const auto& r : rankings) {
    if (!r.ordered_personas.empty()) ++d.rank1_counts[r.ordered_personas.front()];
  }
  std::vector<std::size_t> counts;
  for (const auto& [persona, x] : d.rank1_counts) {
    counts.push_back(x);
    d.ratios[persona] = static_cast<double>(x) / static_cast<double>(d.total_questions);
  }
  d.normalized_entropy = normalized_entropy(counts, d.total_questions);
  return d;
}

double CoverageTable::DocumentCell::ratio(std::string_view ranked_persona, std::size_t k) const {
  auto it = counts.find(std::string(ranked_persona));
  if (it == counts.end() || k == 0 || k > it->second.size() || questions == 0) return 0.0;
  return static_cast<double>(it->second[k - 1]) / static_cast<double>(questions);
}

CoverageTable coverage_ratio(std::span<const RankedQuestion> questions,
                             const std::map<std::string, PersonaRanking>& rankings_by_question, std::size_t max_rank) {
  if (max_rank == 0) fail(ErrorCode::InvalidArgument, "coverage needs K >= 1");
  CoverageTable table;
  table.max_rank = max_rank;

  std::map<std::pair<std::string, std::string>, CoverageTable::DocumentCell> cells;
  std::map<std::string, CoverageTable::PersonaRow> rows;
  for (const auto& q : questions) {
    auto rit = rankings_by_question.find(q.question_id);
    if (rit == rankings_by_question.end()) fail(ErrorCode::MissingRanking, "no ranking for question " + q.question_id);
    const auto& order = rit->second.ordered_personas;

    auto& cell = cells[{q.doc_id, q.persona}];
    cell.doc_id = q.doc_id;
    cell.persona = q.persona;
    ++cell.questions;

    auto& row = rows[q.persona];
    row.persona = q.persona;
    row.hits.resize(max_rank, 0);
    ++row.total_questions;

    for (std::size_t pos = 0; pos < order.size() && pos < max_rank; ++pos) {
      auto& c = cell.counts[order[pos]];
      c.resize(max_rank, 0);
      ++c[pos];
      if (order[pos] == q.persona) ++row.hits[pos];
    }
  }

  for (auto& [key, cell] : cells) table.per_document.push_back(std::move(cell));
  table.mean_top_k.assign(max_rank, 0.0);
  for (auto& [name, row] : rows) {
    row.ratio.resize(max_rank);
    row.top_k.resize(max_rank);
    double acc = 0.0;
    for (std::size_t k = 0; k < max_rank; ++k) {
      row.ratio[k] = static_cast<double>(row.hits[k]) / static_cast<double>(row.total_questions);
      acc += row.ratio[k];
      row.top_k[k] = acc;
      table.mean_top_k[k] += acc;
    }
    table.personas.push_back(std::move(row));
  }
  if (!table.personas.empty()) {
    for (auto& v : table.mean_top_k) v /= static_cast<double>(table.personas.size());
  }
  return table;
}

std::optional<double> coverage_skewness(std::span<const double> ratios) {
  const std::size_t n = ratios.size();
  if (n < 3) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  if (*lo == *hi) return std::nullopt;
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0;
  for (double r : ratios) {
    const double d = r - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (m2 == 0.0) return std::nullopt;
  return m3 / std::pow(m2, 1.5);
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::Win: return "win";
    case Outcome::Tie: return "tie";
    case Outcome::Lose: return "lose";
  }
  return "lose";
}

double win_tie_rate(std::span<const Outcome> judgments) {
  if (judgments.empty()) fail(ErrorCode::EmptyJudgments, "no judgements");
  const auto good = std::count_if(judgments.begin(), judgments.end(),
                                  [](Outcome o) { return o == Outcome::Win || o == Outcome::Tie; });
  return static_cast<double>(good) / static_cast<double>(judgments.size());
}

double win_tie_rate(double wins, double ties, double losses) {
  if (wins < 0 || ties < 0 || losses < 0) fail(ErrorCode::InvalidArgument, "negative judgement count");
  const double total = wins + ties + losses;
  if (total <= 0.0) fail(ErrorCode::EmptyJudgments, "no judgements");
  return (wins + ties) / total;
}

void validate_record(const RankingRecord& record) {
  std::map<std::string, int> owned;
  for (std::size_t r = 0; r < record.method_of.size(); ++r) {
    if (record.method_of[r].empty()) {
      fail(ErrorCode::MalformedRecord, record.user_id + ": rank " + std::to_string(r + 1) + " has no method");
    }
    ++owned[record.method_of[r]];
  }
  for (const auto& [method, n] : owned) {
    if (n != 3) {
      fail(ErrorCode::MalformedRecord,
           record.user_id + ": method '" + method + "' owns " + std::to_string(n) + " ranks, expected 3");
    }
  }
}

std::map<std::string, MethodAggregate> aggregate_rankings(std::span<const RankingRecord> records) {
  std::map<std::string, MethodAggregate> out;
  std::map<std::string, double> rank_sum, rr_sum;
  std::map<std::string, std::size_t> wins;
  for (const auto& rec : records) validate_record(rec);
  for (const auto& rec : records) {
    for (std::size_t r = 0; r < rec.method_of.size(); ++r) {
      const std::string& m = rec.method_of[r];
      rank_sum[m] += static_cast<double>(r + 1);
      rr_sum[m] += 1.0 / static_cast<double>(r + 1) / 3.0;
    }
    ++wins[rec.method_of[0]];
    std::set<std::string> methods(rec.method_of.begin(), rec.method_of.end());
    for (const auto& m : methods) ++out[m].records;
  }
  const double n = static_cast<double>(records.size());
  for (auto& [m, agg] : out) {
    agg.avg_rank = rank_sum[m] / (3.0 * static_cast<double>(agg.records));
    agg.mrr = rr_sum[m] / static_cast<double>(agg.records);
    agg.win_ratio = static_cast<double>(wins[m]) / n;
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

void assign_rank(RankingRecord& rec, std::size_t r, std::string_view cell) {
  cell = text::trim(cell);
  const std::size_t colon = cell.find(':');
  if (colon == std::string_view::npos || colon == 0) {
    fail(ErrorCode::MalformedRecord, rec.user_id + ": rank cell '" + std::string(cell) + "' is not method:question_id");
  }
  rec.method_of[r] = std::string(cell.substr(0, colon));
  rec.question_of[r] = std::string(cell.substr(colon + 1));
}

}  // namespace

std::vector<RankingRecord> load_ranking_records(const std::filesystem::path& path) {
  std::vector<RankingRecord> records;
  if (path.extension() == ".jsonl" || path.extension() == ".json") {
    for (const auto& row : read_jsonl(path)) {
      RankingRecord rec;
      rec.user_id = row.contains("user_id") ? (row["user_id"].is_string() ? row["user_id"].get<std::string>()
                                                                          : row["user_id"].dump())
                                            : std::string();
      for (std::size_t r = 0; r < 6; ++r) {
        const std::string key = "rank_" + std::to_string(r + 1);
        if (!row.contains(key) || !row[key].is_string()) fail(ErrorCode::MalformedRecord, rec.user_id + ": missing " + key);
        assign_rank(rec, r, row[key].get<std::string>());
      }
      validate_record(rec);
      records.push_back(std::move(rec));
    }
    return records;
  }

  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) return records;
  const auto header = split_csv_line(line);
  std::vector<std::ptrdiff_t> col(7, -1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string h(text::trim(header[c]));
    if (h == "user_id") col[0] = static_cast<std::ptrdiff_t>(c);
    for (std::size_t r = 0; r < 6; ++r) {
      if (h == "rank_" + std::to_string(r + 1)) col[r + 1] = static_cast<std::ptrdiff_t>(c);
    }
  }
  if (std::any_of(col.begin(), col.end(), [](auto c) { return c < 0; })) {
    fail(ErrorCode::MalformedRecord, "CSV header must contain user_id and rank_1..rank_6");
  }
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    RankingRecord rec;
    const auto cell = [&](std::size_t i) -> std::string {
      const auto c = static_cast<std::size_t>(col[i]);
      if (c >= cells.size()) fail(ErrorCode::MalformedRecord, "short CSV row: " + line);
      return cells[c];
    };
    rec.user_id = std::string(text::trim(cell(0)));
    for (std::size_t r = 0; r < 6; ++r) assign_rank(rec, r, cell(r + 1));
    validate_record(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace personasq

#include "personasq/orchestrator.hpp"

#include <fcntl.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <set>
#include <thread>
#include <unordered_map>

#include "personasq/finetune_data.hpp"
#include "personasq/hashing.hpp"
#include "personasq/persona_pipeline.hpp"
#include "personasq/question_pipeline.hpp"
#include "personasq/report.hpp"
#include "personasq/sq_eval.hpp"
#include "personasq/text.hpp"

namespace personasq {

namespace fs = std::filesystem;

namespace {

struct StageInfo {
  Stage stage;
  std::string_view name;
  std::optional<Stage> prerequisite;
  std::vector<std::string> outputs;
};

const std::vector<StageInfo>& stage_table() {
  static const std::vector<StageInfo> table = {
      {Stage::Ingest, "ingest", std::nullopt, {"documents.jsonl", "chunks.jsonl", "excluded.jsonl"}},
      {Stage::GenPersonas, "gen-personas", Stage::Ingest, {"raw_personas.jsonl"}},
      {Stage::Normalize, "normalize", Stage::GenPersonas, {"persona_groups.jsonl"}},
      {Stage::ScoreGoals, "score-goals", Stage::Normalize, {"scored_goals.jsonl"}},
      {Stage::GenQuestions, "gen-questions", Stage::ScoreGoals, {"sampled_goals.jsonl", "raw_questions.jsonl"}},
      {Stage::Gates, "gates", Stage::GenQuestions, {"final_sqs.jsonl", "dropped_sqs.jsonl", "gate_report.json"}},
      {Stage::Eval, "eval", Stage::Gates,
       {"rankings.jsonl", "judge_scores.jsonl", "metrics.json", "report.txt", "report.json"}},
      {Stage::RankReport, "rank-report", std::nullopt, {"ranking_aggregates.json"}},
      {Stage::AssembleFt, "assemble-ft", Stage::Gates,
       {"train.jsonl", "validation.jsonl", "test.jsonl", "metadata.json"}},
      {Stage::Stats, "stats", Stage::AssembleFt, {"stats.json"}},
  };
  return table;
}

const StageInfo& info(Stage stage) {
  for (const auto& s : stage_table()) {
    if (s.stage == stage) return s;
  }
  fail(ErrorCode::InvalidArgument, "unknown stage");
}

// Runs fn(i) for i in [0, n) on at most `workers` threads. fn must not throw.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

Json error_row(std::string_view stage, const std::string& item, const Error& e) {
  return {{"stage", stage}, {"item", item}, {"code", to_string(e.code())}, {"message", e.what()}};
}

std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

std::string digest_of_corpus(const fs::path& corpus) {
  if (fs::is_directory(corpus)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(corpus)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) acc += f.filename().string() + "\n" + file_digest(f) + "\n";
    return sha256_hex(acc);
  }
  if (!fs::exists(corpus)) fail(ErrorCode::ConfigInvalid, "corpus not found: " + corpus.string());
  return file_digest(corpus);
}

Json document_json(const Document& d) {
  return {{"id", d.id},
          {"domain", d.domain},
          {"subdomain", d.subdomain},
          {"vertical", d.vertical ? Json(*d.vertical) : Json(nullptr)},
          {"token_count", d.token_count},
          {"text", d.text}};
}

Document document_from_json(const Json& j) {
  Document d;
  d.id = j.at("id").get<std::string>();
  d.domain = j.value("domain", "");
  d.subdomain = j.value("subdomain", "");
  if (j.contains("vertical") && j["vertical"].is_string()) d.vertical = j["vertical"].get<std::string>();
  d.text = j.at("text").get<std::string>();
  d.token_count = j.at("token_count").get<std::size_t>();
  return d;
}

Json optional_json(const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); }

Json report_json(const GateReport& r) {
  Json reasons = Json::object();
  for (const auto& [reason, n] : r.drop_reasons) reasons[reason] = n;
  return {{"generated", r.generated},
          {"after_length", r.after_length},
          {"after_quality", r.after_quality},
          {"after_answerability", r.after_answerability},
          {"drop_reasons", reasons}};
}

std::string question_id(const std::string& doc_id, std::size_t n) {
  std::string num = std::to_string(n);
  if (num.size() < 3) num.insert(0, 3 - num.size(), '0');
  return doc_id + "#q" + num;
}

std::string persona_description(const std::string& persona, const std::vector<std::string>& goals) {
  return persona + ". Goals: " + text::join(goals, "; ");
}

// Loaded intermediate state shared by several stages.
struct RunState {
  std::vector<Document> documents;
  std::vector<std::string> domains;  // first-appearance order
  std::map<std::string, RawPersonaGeneration> raw;
  std::map<std::string, PersonaGroups> groups;

  const Document* doc(const std::string& id) const {
    for (const auto& d : documents) {
      if (d.id == id) return &d;
    }
    return nullptr;
  }

  std::vector<std::string> personas_of(const Document& d) const {
    auto r = raw.find(d.id);
    auto g = groups.find(d.domain);
    if (r == raw.end() || g == groups.end()) return {};
    return personas_for_document(g->second, r->second);
  }
};

}  // namespace

std::string_view to_string(Stage stage) noexcept {
  for (const auto& s : stage_table()) {
    if (s.stage == stage) return s.name;
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (const auto& s : stage_table()) {
    if (s.name == name) return s.stage;
  }
  fail(ErrorCode::InvalidArgument, "unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = [] {
    std::vector<Stage> out;
    for (const auto& s : stage_table()) out.push_back(s.stage);
    return out;
  }();
  return stages;
}

std::optional<Stage> prerequisite(Stage stage) { return info(stage).prerequisite; }

const std::vector<std::string>& stage_outputs(Stage stage) { return info(stage).outputs; }

// ---------------------------------------------------------------------------
// Manifest and lock
// ---------------------------------------------------------------------------

Json RunManifest::to_json() const {
  Json j;
  j["run_id"] = run_id;
  j["config_digest"] = config_digest;
  j["stages"] = Json::object();
  for (const auto& s : all_stages()) {
    auto it = stages.find(std::string(personasq::to_string(s)));
    if (it == stages.end()) continue;
    Json outputs = Json::object();
    for (const auto& [file, digest] : it->second.outputs) outputs[file] = digest;
    j["stages"][it->first] = {{"status", it->second.status},
                              {"inputs_digest", it->second.inputs_digest},
                              {"outputs", outputs},
                              {"errors", it->second.errors}};
  }
  return j;
}

RunManifest RunManifest::from_json(const Json& j) {
  RunManifest m;
  m.run_id = j.value("run_id", "");
  m.config_digest = j.value("config_digest", "");
  const Json stages = j.value("stages", Json::object());
  for (const auto& [name, s] : stages.items()) {
    StageRecord r;
    r.status = s.value("status", "");
    r.inputs_digest = s.value("inputs_digest", "");
    r.errors = s.value("errors", std::size_t{0});
    const Json outputs = s.value("outputs", Json::object());
    for (const auto& [file, digest] : outputs.items()) {
      r.outputs[file] = digest.get<std::string>();
    }
    m.stages[name] = std::move(r);
  }
  return m;
}

std::optional<RunManifest> RunManifest::load(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    fail(ErrorCode::Io, "unreadable manifest " + path.string() + ": " + e.what());
  }
}

void RunManifest::save(const fs::path& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
  fs::create_directories(run_dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    fail(ErrorCode::RunLocked, "run directory " + run_dir.string() +
                                   " is in use (remove " + path_.string() + " if no other run is active)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<ChatBackend> make_chat(const BackendConfig& b) {
  if (b.kind == "scripted") {
    if (b.script.empty()) return std::make_shared<ScriptedChatBackend>();
    return ScriptedChatBackend::from_file(b.script);
  }
  return std::make_shared<OpenAiChatBackend>(HttpEndpoint{b.base_url, b.model, api_key_from_env()});
}

bool same_backend(const BackendConfig& a, const BackendConfig& b) {
  return a.kind == b.kind && a.base_url == b.base_url && a.model == b.model && a.script == b.script;
}

}  // namespace

Backends make_backends(const RunConfig& config) {
  Backends b;
  b.chat = make_chat(config.chat);
  b.judge = same_backend(config.chat, config.judge) ? b.chat : make_chat(config.judge);
  if (config.embedding.kind == "hashing") {
    b.embedding = std::make_shared<HashingEmbeddingBackend>(config.embedding.dim);
  } else {
    b.embedding = std::make_shared<OpenAiEmbeddingBackend>(
        HttpEndpoint{config.embedding.base_url, config.embedding.model, api_key_from_env()});
  }
  return b;
}

// ---------------------------------------------------------------------------
// Orchestrator
// ---------------------------------------------------------------------------

Orchestrator::Orchestrator(RunConfig config, fs::path run_dir, std::optional<Backends> backends)
    : config_(std::move(config)), run_dir_(std::move(run_dir)) {
  validate(config_);
  lock_ = std::make_unique<RunLock>(run_dir_);
  backends_ = backends ? std::move(*backends) : make_backends(config_);
  if (!backends_.judge) backends_.judge = backends_.chat;
  cache_ = std::make_shared<ResponseCache>(config_.cache_dir);

  GatewayOptions opts;
  opts.mode = config_.cache_mode;
  opts.max_in_flight = config_.concurrency;
  opts.failure_dir = run_dir_ / "failures";
  opts.sampling = SamplingParams{config_.temperature, config_.max_output_tokens, config_.request_seed};
  chat_ = std::make_unique<ModelGateway>(backends_.chat, backends_.embedding, cache_, opts);
  judge_ = std::make_unique<ModelGateway>(backends_.judge, nullptr, cache_, opts);

  const std::string digest = config_.digest();
  if (auto existing = RunManifest::load(run_dir_ / "manifest.json")) {
    manifest_ = std::move(*existing);
  } else {
    manifest_.run_id = digest.substr(0, 12) + "-" +
                       std::to_string(std::chrono::duration_cast<std::chrono::seconds>(
                                          std::chrono::system_clock::now().time_since_epoch())
                                          .count());
  }
  manifest_.config_digest = digest;
}

std::string Orchestrator::expected_inputs_digest(Stage stage) const {
  std::string acc = std::string(to_string(stage)) + "\n" + config_.digest() + "\n";
  if (stage == Stage::Ingest) acc += digest_of_corpus(config_.corpus) + "\n";
  if (stage == Stage::RankReport && config_.rankings && fs::exists(*config_.rankings)) {
    acc += file_digest(*config_.rankings) + "\n";
  }
  for (auto p = prerequisite(stage); p; p = prerequisite(*p)) {
    auto it = manifest_.stages.find(std::string(to_string(*p)));
    if (it == manifest_.stages.end()) continue;
    for (const auto& [file, digest] : it->second.outputs) acc += file + "=" + digest + "\n";
  }
  return sha256_hex(acc);
}

bool Orchestrator::is_current(Stage stage) const {
  auto it = manifest_.stages.find(std::string(to_string(stage)));
  if (it == manifest_.stages.end() || it->second.status != "complete") return false;
  if (it->second.inputs_digest != expected_inputs_digest(stage)) return false;
  if (auto p = prerequisite(stage); p && !is_current(*p)) return false;
  for (const auto& [file, digest] : it->second.outputs) {
    const fs::path p = run_dir_ / file;
    if (!fs::exists(p) || file_digest(p) != digest) return false;
  }
  return true;
}

StageResult Orchestrator::run_stage(Stage stage, bool force) {
  StageResult result;
  result.stage = stage;
  result.outputs = stage_outputs(stage);
  const std::string name(to_string(stage));

  if (auto p = prerequisite(stage); p && !is_current(*p)) {
    fail(ErrorCode::PrerequisiteMissing,
         "stage '" + name + "' needs '" + std::string(to_string(*p)) + "' to be complete and current");
  }
  if (!force && is_current(stage)) {
    result.up_to_date = true;
    result.errors = manifest_.stages[name].errors;
    spdlog::info("{}: up-to-date", name);
    return result;
  }

  StageRecord record;
  record.status = "running";
  record.inputs_digest = expected_inputs_digest(stage);
  manifest_.stages[name] = record;
  manifest_.save(run_dir_ / "manifest.json");

  result.errors = execute(stage);

  record.status = "complete";
  record.errors = result.errors;
  for (const auto& file : stage_outputs(stage)) record.outputs[file] = file_digest(run_dir_ / file);
  manifest_.stages[name] = record;
  manifest_.save(run_dir_ / "manifest.json");
  return result;
}

std::vector<StageResult> Orchestrator::run_all(bool force) {
  std::vector<StageResult> out;
  for (Stage s : all_stages()) {
    if (s == Stage::RankReport && !config_.rankings) continue;
    out.push_back(run_stage(s, force));
  }
  return out;
}

std::size_t Orchestrator::execute(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return ingest();
    case Stage::GenPersonas: return gen_personas();
    case Stage::Normalize: return normalize();
    case Stage::ScoreGoals: return score_goals_stage();
    case Stage::GenQuestions: return gen_questions();
    case Stage::Gates: return gates();
    case Stage::Eval: return eval();
    case Stage::RankReport: return rank_report();
    case Stage::AssembleFt: return assemble_ft();
    case Stage::Stats: return stats();
  }
  return 0;
}

void Orchestrator::write_errors(Stage stage, const std::vector<Json>& errors) const {
  const fs::path p = run_dir_ / "errors" / (std::string(to_string(stage)) + ".jsonl");
  write_file_atomic(p, to_jsonl(errors));
  for (const auto& e : errors) {
    spdlog::warn("{}: {} failed: {}", to_string(stage), e.value("item", ""), e.value("message", ""));
  }
}

namespace {

RunState load_state(const fs::path& dir, bool with_raw, bool with_groups) {
  RunState s;
  for (const auto& row : read_jsonl(dir / "documents.jsonl")) {
    s.documents.push_back(document_from_json(row));
    const auto& domain = s.documents.back().domain;
    if (std::find(s.domains.begin(), s.domains.end(), domain) == s.domains.end()) s.domains.push_back(domain);
  }
  if (with_raw) {
    for (const auto& row : read_jsonl(dir / "raw_personas.jsonl")) {
      auto& gen = s.raw[row.at("doc_id").get<std::string>()];
      gen.doc_id = row.at("doc_id").get<std::string>();
      gen.entries.emplace_back(row.at("profession").get<std::string>(),
                               row.at("goals").get<std::vector<std::string>>());
    }
  }
  if (with_groups) {
    for (const auto& row : read_jsonl(dir / "persona_groups.jsonl")) {
      s.groups[row.at("domain").get<std::string>()].emplace_back(row.at("canonical").get<std::string>(),
                                                                 row.at("members").get<std::vector<std::string>>());
    }
  }
  return s;
}

}  // namespace

std::size_t Orchestrator::ingest() {
  const fs::path& corpus = config_.corpus;
  if (corpus.empty()) fail(ErrorCode::ConfigInvalid, "no corpus path configured");
  std::vector<Document> docs =
      fs::is_directory(corpus) ? load_corpus_directory(corpus, config_.corpus_defaults) : load_corpus_jsonl(corpus);
  std::set<std::string> ids;
  for (const auto& d : docs) {
    if (!ids.insert(d.id).second) fail(ErrorCode::ConfigInvalid, "duplicate document id '" + d.id + "' in corpus");
  }

  std::vector<Json> documents, chunks, excluded;
  for (const auto& d : docs) {
    try {
      for (const auto& c : chunk_document(d, config_.chunking)) {
        chunks.push_back({{"doc_id", c.doc_id},
                          {"index", c.index},
                          {"start_token", c.start_token},
                          {"end_token", c.end_token},
                          {"text", c.text}});
      }
      documents.push_back(document_json(d));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DocumentTooShort) throw;
      excluded.push_back({{"doc_id", d.id}, {"token_count", d.token_count}, {"reason", to_string(e.code())}});
    }
  }
  write_file_atomic(path("documents.jsonl"), to_jsonl(documents));
  write_file_atomic(path("chunks.jsonl"), to_jsonl(chunks));
  write_file_atomic(path("excluded.jsonl"), to_jsonl(excluded));
  write_errors(Stage::Ingest, {});
  return 0;
}

std::size_t Orchestrator::gen_personas() {
  const RunState state = load_state(run_dir_, false, false);
  const std::size_t n = state.documents.size();
  std::vector<std::optional<RawPersonaGeneration>> results(n);
  std::vector<std::optional<Json>> errors(n);
  parallel_for(n, config_.concurrency, [&](std::size_t i) {
    const Document& d = state.documents[i];
    try {
      results[i] = generate_personas(*chat_, DocumentView{d, config_.context_budget_tokens});
    } catch (const Error& e) {
      errors[i] = error_row("gen-personas", d.id, e);
    }
  });

  std::vector<Json> rows, error_rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) error_rows.push_back(*errors[i]);
    if (!results[i]) continue;
    for (const auto& [profession, goals] : results[i]->entries) {
      rows.push_back({{"doc_id", results[i]->doc_id}, {"profession", profession}, {"goals", goals}});
    }
  }
  write_file_atomic(path("raw_personas.jsonl"), to_jsonl(rows));
  write_errors(Stage::GenPersonas, error_rows);
  return error_rows.size();
}

std::size_t Orchestrator::normalize() {
  const RunState state = load_state(run_dir_, true, false);
  const std::size_t n = state.domains.size();
  std::vector<std::vector<std::string>> names(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& d : state.documents) {
      if (d.domain != state.domains[i]) continue;
      auto it = state.raw.find(d.id);
      if (it == state.raw.end()) continue;
      for (const auto& [profession, goals] : it->second.entries) {
        if (std::find(names[i].begin(), names[i].end(), profession) == names[i].end()) names[i].push_back(profession);
      }
    }
  }

  std::vector<PersonaGroups> results(n);
  std::vector<std::optional<Json>> errors(n);
  parallel_for(n, config_.concurrency, [&](std::size_t i) {
    if (names[i].empty()) return;
    try {
      results[i] = normalize_personas(*chat_, names[i]);
    } catch (const Error& e) {
      errors[i] = error_row("normalize", state.domains[i], e);
    }
  });

  std::vector<Json> rows, error_rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) error_rows.push_back(*errors[i]);
    for (const auto& [canonical, members] : results[i]) {
      rows.push_back({{"domain", state.domains[i]}, {"canonical", canonical}, {"members", members}});
    }
  }
  write_file_atomic(path("persona_groups.jsonl"), to_jsonl(rows));
  write_errors(Stage::Normalize, error_rows);
  return error_rows.size();
}

std::size_t Orchestrator::score_goals_stage() {
  const RunState state = load_state(run_dir_, true, true);
  struct Task {
    std::string domain;
    std::string persona;
    std::vector<std::string> goals;
  };
  std::vector<Task> tasks;
  std::vector<Json> error_rows;
  for (const auto& domain : state.domains) {
    auto g = state.groups.find(domain);
    if (g == state.groups.end()) continue;
    std::vector<RawPersonaGeneration> raws;
    for (const auto& d : state.documents) {
      auto it = state.raw.find(d.id);
      if (d.domain == domain && it != state.raw.end()) raws.push_back(it->second);
    }
    try {
      PersonaGoalTable table = aggregate_goals(domain, g->second, raws);
      for (auto& [persona, goals] : table.rows) {
        tasks.push_back({domain, persona, std::move(goals)});
      }
    } catch (const Error& e) {
      error_rows.push_back(error_row("score-goals", domain, e));
    }
  }

  std::vector<std::vector<ScoredGoal>> results(tasks.size());
  std::vector<std::optional<Json>> errors(tasks.size());
  parallel_for(tasks.size(), config_.concurrency, [&](std::size_t i) {
    try {
      results[i] = score_goals(*chat_, tasks[i].persona, tasks[i].goals, config_.persona.goal_min_score);
    } catch (const Error& e) {
      errors[i] = error_row("score-goals", tasks[i].domain + "/" + tasks[i].persona, e);
    }
  });

  std::vector<Json> rows;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (errors[i]) error_rows.push_back(*errors[i]);
    for (const auto& g : results[i]) {
      rows.push_back({{"domain", tasks[i].domain},
                      {"persona", tasks[i].persona},
                      {"goal", g.goal},
                      {"score", g.score},
                      {"kept", g.kept}});
    }
  }
  write_file_atomic(path("scored_goals.jsonl"), to_jsonl(rows));
  write_errors(Stage::ScoreGoals, error_rows);
  return error_rows.size();
}

std::size_t Orchestrator::gen_questions() {
  const RunState state = load_state(run_dir_, true, true);
  std::map<std::string, std::vector<std::pair<std::string, std::vector<ScoredGoal>>>> scored;
  for (const auto& row : read_jsonl(path("scored_goals.jsonl"))) {
    auto& list = scored[row.at("domain").get<std::string>()];
    const std::string persona = row.at("persona").get<std::string>();
    if (list.empty() || list.back().first != persona) list.emplace_back(persona, std::vector<ScoredGoal>{});
    list.back().second.push_back(
        {row.at("goal").get<std::string>(), row.at("score").get<int>(), row.at("kept").get<bool>()});
  }
  std::map<std::string, PersonaGoalTable> tables;
  for (const auto& [domain, list] : scored) tables[domain] = filter_goal_table(domain, list);

  struct Task {
    const Document* doc;
    std::string persona;
    std::vector<std::string> goals;
  };
  std::vector<Task> tasks;
  std::vector<Json> sampled_rows;
  for (const auto& d : state.documents) {
    for (const auto& persona : state.personas_of(d)) {
      const std::vector<std::string>* pool = nullptr;
      if (auto t = tables.find(d.domain); t != tables.end()) pool = t->second.goals_of(persona);
      const std::vector<std::string> empty;
      auto sample = sample_goals(pool ? *pool : empty, config_.persona.goals_per_persona,
                                 derive_seed(config_.sampling_seed, d.id, persona));
      sampled_rows.push_back({{"doc_id", d.id},
                              {"domain", d.domain},
                              {"persona", persona},
                              {"goals", sample ? *sample : std::vector<std::string>{}},
                              {"dropped", !sample.has_value()}});
      if (sample) tasks.push_back({&d, persona, std::move(*sample)});
    }
  }

  std::vector<std::vector<SuggestedQuestion>> results(tasks.size());
  std::vector<std::optional<Json>> errors(tasks.size());
  parallel_for(tasks.size(), config_.concurrency, [&](std::size_t i) {
    try {
      results[i] = generate_questions(*chat_, DocumentView{*tasks[i].doc, config_.context_budget_tokens},
                                      tasks[i].persona, tasks[i].goals);
    } catch (const Error& e) {
      errors[i] = error_row("gen-questions", tasks[i].doc->id + "/" + tasks[i].persona, e);
    }
  });

  std::vector<Json> rows, error_rows;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (errors[i]) error_rows.push_back(*errors[i]);
    for (const auto& q : results[i]) {
      rows.push_back({{"doc_id", q.doc_id},
                      {"domain", tasks[i].doc->domain},
                      {"persona", q.persona},
                      {"goals_used", q.goals_used},
                      {"question", q.text},
                      {"token_count", q.token_count}});
    }
  }
  write_file_atomic(path("sampled_goals.jsonl"), to_jsonl(sampled_rows));
  write_file_atomic(path("raw_questions.jsonl"), to_jsonl(rows));
  write_errors(Stage::GenQuestions, error_rows);
  return error_rows.size();
}

std::size_t Orchestrator::gates() {
  const RunState state = load_state(run_dir_, true, true);
  struct Task {
    const Document* doc;
    std::string persona;
    std::vector<std::string> goals;
    std::vector<SuggestedQuestion> raw;
    std::vector<std::string> others;
  };
  std::vector<Task> tasks;
  for (const auto& row : read_jsonl(path("sampled_goals.jsonl"))) {
    if (row.at("dropped").get<bool>()) continue;
    const Document* d = state.doc(row.at("doc_id").get<std::string>());
    if (!d) continue;
    Task t{d, row.at("persona").get<std::string>(), row.at("goals").get<std::vector<std::string>>(), {}, {}};
    for (const auto& p : state.personas_of(*d)) {
      if (p != t.persona) t.others.push_back(p);
    }
    tasks.push_back(std::move(t));
  }
  for (const auto& row : read_jsonl(path("raw_questions.jsonl"))) {
    const std::string doc_id = row.at("doc_id").get<std::string>();
    const std::string persona = row.at("persona").get<std::string>();
    auto it = std::find_if(tasks.begin(), tasks.end(),
                           [&](const Task& t) { return t.doc->id == doc_id && t.persona == persona; });
    if (it == tasks.end()) continue;
    SuggestedQuestion q;
    q.doc_id = doc_id;
    q.persona = persona;
    q.goals_used = row.at("goals_used").get<std::vector<std::string>>();
    q.text = row.at("question").get<std::string>();
    q.token_count = row.at("token_count").get<std::size_t>();
    it->raw.push_back(std::move(q));
  }

  std::vector<GateOutcome> results(tasks.size());
  std::vector<std::optional<Json>> errors(tasks.size());
  parallel_for(tasks.size(), config_.concurrency, [&](std::size_t i) {
    Task& t = tasks[i];
    const std::vector<SuggestedQuestion> raw = t.raw;
    try {
      results[i] = apply_gates(*chat_, DocumentView{*t.doc, config_.context_budget_tokens}, t.persona, t.goals,
                               t.raw, t.others, config_.gates);
    } catch (const Error& e) {
      errors[i] = error_row("gates", t.doc->id + "/" + t.persona, e);
      GateOutcome failed;
      failed.report.generated = raw.size();
      const std::string reason = "error:" + std::string(to_string(e.code()));
      for (auto q : raw) {
        q.status = QuestionStatus::Dropped;
        q.drop_reason = reason;
        failed.dropped.push_back(std::move(q));
      }
      if (!raw.empty()) failed.report.drop_reasons[reason] = raw.size();
      results[i] = std::move(failed);
    }
  });

  std::vector<Json> final_rows, dropped_rows, group_rows, error_rows;
  GateReport totals;
  std::map<std::string, std::size_t> per_doc_count;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (errors[i]) error_rows.push_back(*errors[i]);
    const GateOutcome& out = results[i];
    totals += out.report;
    Json g = report_json(out.report);
    g["doc_id"] = tasks[i].doc->id;
    g["persona"] = tasks[i].persona;
    group_rows.push_back(std::move(g));
    for (const auto& q : out.final_questions) {
      final_rows.push_back({{"question_id", question_id(q.doc_id, per_doc_count[q.doc_id]++)},
                            {"doc_id", q.doc_id},
                            {"domain", tasks[i].doc->domain},
                            {"persona", q.persona},
                            {"goals_used", q.goals_used},
                            {"question", q.text},
                            {"token_count", q.token_count},
                            {"quality_score", q.quality_score ? Json(*q.quality_score) : Json(nullptr)},
                            {"other_persona", optional_json(q.other_persona)},
                            {"answer", optional_json(q.answer)},
                            {"reference", optional_json(q.reference)},
                            {"reference_verified", q.reference_verified}});
    }
    for (const auto& q : out.dropped) {
      dropped_rows.push_back({{"doc_id", q.doc_id},
                              {"persona", q.persona},
                              {"question", q.text},
                              {"token_count", q.token_count},
                              {"quality_score", q.quality_score ? Json(*q.quality_score) : Json(nullptr)},
                              {"other_persona", optional_json(q.other_persona)},
                              {"drop_reason", q.drop_reason}});
    }
  }
  Json report;
  report["totals"] = report_json(totals);
  report["groups"] = group_rows;
  write_file_atomic(path("final_sqs.jsonl"), to_jsonl(final_rows));
  write_file_atomic(path("dropped_sqs.jsonl"), to_jsonl(dropped_rows));
  write_file_atomic(path("gate_report.json"), report.dump(2) + "\n");
  write_errors(Stage::Gates, error_rows);
  return error_rows.size();
}

std::size_t Orchestrator::eval() {
  const RunState state = load_state(run_dir_, true, true);
  struct Final {
    std::string id;
    const Document* doc;
    std::string persona;
    std::string question;
  };
  std::vector<Final> finals;
  for (const auto& row : read_jsonl(path("final_sqs.jsonl"))) {
    const Document* d = state.doc(row.at("doc_id").get<std::string>());
    if (!d) continue;
    finals.push_back({row.at("question_id").get<std::string>(), d, row.at("persona").get<std::string>(),
                      row.at("question").get<std::string>()});
  }
  std::vector<Json> error_rows;
  const std::size_t nd = state.documents.size();
  std::vector<std::vector<std::string>> candidates(nd);
  for (std::size_t i = 0; i < nd; ++i) candidates[i] = state.personas_of(state.documents[i]);
  auto doc_index = [&](const Document* d) { return static_cast<std::size_t>(d - state.documents.data()); };

  // Semantic diversity per document.
  std::vector<Json> per_doc(nd);
  std::vector<std::optional<Json>> sim_errors(nd);
  parallel_for(nd, config_.concurrency, [&](std::size_t i) {
    const Document& d = state.documents[i];
    std::vector<std::string> texts;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> slots;
    for (const auto& persona : candidates[i]) {
      std::vector<std::size_t> idx;
      for (const auto& f : finals) {
        if (f.doc == &d && f.persona == persona) {
          idx.push_back(texts.size());
          texts.push_back(f.question);
        }
      }
      if (!idx.empty()) slots.emplace_back(persona, std::move(idx));
    }
    Json row = {{"doc_id", d.id}, {"domain", d.domain}, {"questions", texts.size()}};
    row["personas"] = Json::array();
    for (const auto& s : slots) row["personas"].push_back(s.first);
    row["sim_eq2"] = nullptr;
    row["sim_mean_pairs"] = nullptr;
    try {
      if (slots.size() < 2) fail(ErrorCode::DegenerateDocument, "fewer than two personas with final questions");
      const auto vectors = chat_->embed(texts);
      std::vector<PersonaQuestions> by_persona;
      for (const auto& [persona, idx] : slots) {
        PersonaQuestions pq{persona, {}};
        for (auto k : idx) pq.embeddings.push_back(vectors[k].values);
        by_persona.push_back(std::move(pq));
      }
      const SimilarityMatrix m = pairwise_persona_similarity(by_persona);
      const DocumentSimilarity s = document_similarity(m);
      row["sim_eq2"] = s.sim_eq2;
      row["sim_mean_pairs"] = s.sim_mean_pairs;
      Json matrix = Json::array();
      for (std::size_t a = 0; a < m.size(); ++a) {
        Json r = Json::array();
        for (std::size_t b = 0; b < m.size(); ++b) r.push_back(a == b ? Json(nullptr) : Json(m.at(a, b)));
        matrix.push_back(std::move(r));
      }
      row["matrix"] = std::move(matrix);
    } catch (const Error& e) {
      row["excluded"] = to_string(e.code());
      if (e.code() != ErrorCode::DegenerateDocument) sim_errors[i] = error_row("eval", d.id + "/similarity", e);
    }
    per_doc[i] = std::move(row);
  });
  for (auto& e : sim_errors) {
    if (e) error_rows.push_back(*e);
  }
  std::vector<double> eq2_scores, pair_scores;
  for (const auto& row : per_doc) {
    if (row["sim_mean_pairs"].is_number()) {
      eq2_scores.push_back(row["sim_eq2"].get<double>());
      pair_scores.push_back(row["sim_mean_pairs"].get<double>());
    }
  }

  // Document inputs for the ranking prompt.
  std::vector<std::string> summaries(nd);
  std::vector<std::optional<Json>> summary_errors(nd);
  parallel_for(nd, config_.concurrency, [&](std::size_t i) {
    try {
      summaries[i] = summarize_document(config_.summary.enabled ? chat_.get() : nullptr, state.documents[i],
                                        config_.summary);
    } catch (const Error& e) {
      summary_errors[i] = error_row("eval", state.documents[i].id + "/summary", e);
      summaries[i] = head_tokens(state.documents[i].text, config_.summary.budget_tokens);
    }
  });
  for (auto& e : summary_errors) {
    if (e) error_rows.push_back(*e);
  }

  // Reverse ranking.
  std::vector<std::optional<PersonaRanking>> rankings(finals.size());
  std::vector<std::optional<Json>> rank_errors(finals.size());
  parallel_for(finals.size(), config_.concurrency, [&](std::size_t i) {
    const Final& f = finals[i];
    const std::size_t di = doc_index(f.doc);
    try {
      rankings[i] = reverse_rank_personas(*judge_, summaries[di], f.question, candidates[di], f.id);
    } catch (const Error& e) {
      rank_errors[i] = error_row("eval", f.id + "/ranking", e);
    }
  });

  // Likert judging.
  const auto& metrics_list = config_.judge_metrics;
  const std::size_t nj = finals.size() * metrics_list.size();
  std::vector<std::optional<int>> scores(nj);
  std::vector<std::optional<Json>> judge_errors(nj);
  parallel_for(nj, config_.concurrency, [&](std::size_t k) {
    const Final& f = finals[k / metrics_list.size()];
    const std::string& metric = metrics_list[k % metrics_list.size()];
    try {
      scores[k] = judge_question_quality(*judge_, DocumentView{*f.doc, config_.context_budget_tokens}.prompt_text(),
                                         f.question, metric);
    } catch (const Error& e) {
      judge_errors[k] = error_row("eval", f.id + "/" + metric, e);
    }
  });

  std::vector<Json> ranking_rows, score_rows;
  std::map<std::string, PersonaRanking> ranking_by_id;
  for (std::size_t i = 0; i < finals.size(); ++i) {
    if (rank_errors[i]) error_rows.push_back(*rank_errors[i]);
    if (!rankings[i]) continue;
    ranking_rows.push_back({{"question_id", finals[i].id},
                            {"doc_id", finals[i].doc->id},
                            {"persona", finals[i].persona},
                            {"ordered_personas", rankings[i]->ordered_personas}});
    ranking_by_id[finals[i].id] = *rankings[i];
  }
  std::map<std::string, std::pair<double, std::size_t>> judge_sums;
  for (std::size_t k = 0; k < nj; ++k) {
    if (judge_errors[k]) error_rows.push_back(*judge_errors[k]);
    if (!scores[k]) continue;
    const std::string& metric = metrics_list[k % metrics_list.size()];
    score_rows.push_back({{"question_id", finals[k / metrics_list.size()].id}, {"metric", metric}, {"score", *scores[k]}});
    judge_sums[metric].first += *scores[k];
    ++judge_sums[metric].second;
  }

  // Coverage per domain; the headline averages over every (domain, persona).
  const std::size_t K = config_.top_k;
  Json per_persona = Json::array();
  Json per_domain = Json::object();
  std::vector<double> top_sum(K, 0.0);
  std::size_t rows_seen = 0;
  std::vector<double> rank1_all;
  Json skew_domains = Json::object();
  for (const auto& domain : state.domains) {
    std::vector<RankedQuestion> qs;
    for (const auto& f : finals) {
      if (f.doc->domain == domain && ranking_by_id.contains(f.id)) qs.push_back({f.id, f.doc->id, f.persona});
    }
    if (qs.empty()) continue;
    const CoverageTable table = coverage_ratio(qs, ranking_by_id, K);
    std::vector<double> rank1;
    for (const auto& row : table.personas) {
      per_persona.push_back({{"domain", domain},
                             {"persona", row.persona},
                             {"total_questions", row.total_questions},
                             {"hits", row.hits},
                             {"ratio", row.ratio},
                             {"top_k", row.top_k}});
      for (std::size_t k = 0; k < K; ++k) top_sum[k] += row.top_k[k];
      ++rows_seen;
      rank1.push_back(row.ratio[0]);
      rank1_all.push_back(row.ratio[0]);
    }
    Json cells = Json::array();
    for (const auto& cell : table.per_document) {
      Json counts = Json::object();
      for (const auto& [persona, c] : cell.counts) counts[persona] = c;
      cells.push_back(
          {{"doc_id", cell.doc_id}, {"persona", cell.persona}, {"questions", cell.questions}, {"counts", counts}});
    }
    per_domain[domain] = {{"topK", table.mean_top_k}, {"per_document", cells}};
    const auto skew = coverage_skewness(rank1);
    skew_domains[domain] = skew ? Json(*skew) : Json(nullptr);
  }
  std::vector<double> headline;
  if (rows_seen > 0) {
    for (double s : top_sum) headline.push_back(s / static_cast<double>(rows_seen));
  }
  const auto overall_skew = coverage_skewness(rank1_all);

  // Rank-1 distribution per document.
  Json distribution = Json::array();
  for (const auto& d : state.documents) {
    std::vector<PersonaRanking> doc_rankings;
    for (const auto& f : finals) {
      if (f.doc == &d && ranking_by_id.contains(f.id)) doc_rankings.push_back(ranking_by_id[f.id]);
    }
    if (doc_rankings.empty()) continue;
    const PersonaDistribution dist = persona_distribution(doc_rankings);
    Json counts = Json::object(), ratios = Json::object();
    for (const auto& [p, c] : dist.rank1_counts) counts[p] = c;
    for (const auto& [p, r] : dist.ratios) ratios[p] = r;
    distribution.push_back({{"doc_id", d.id},
                            {"total_questions", dist.total_questions},
                            {"rank1_counts", counts},
                            {"ratios", ratios},
                            {"normalized_entropy", dist.normalized_entropy}});
  }

  Json judge_scores = Json::object();
  for (const auto& [metric, sum] : judge_sums) judge_scores[metric] = sum.first / static_cast<double>(sum.second);

  Json aggregates = nullptr;
  if (config_.rankings) {
    try {
      aggregates = Json::object();
      for (const auto& [method, a] : aggregate_rankings(load_ranking_records(*config_.rankings))) {
        aggregates[method] = {{"avg_rank", a.avg_rank}, {"win_ratio", a.win_ratio}, {"mrr", a.mrr}, {"records", a.records}};
      }
    } catch (const Error& e) {
      aggregates = nullptr;
      error_rows.push_back(error_row("eval", "rankings", e));
    }
  }

  Json metrics;
  Json sim;
  if (!pair_scores.empty()) {
    sim["mean_pairs"] = corpus_similarity(pair_scores);
    sim["eq2"] = corpus_similarity(eq2_scores);
    sim["mean_pairs_percent"] = percent_string(sim["mean_pairs"].get<double>());
  } else {
    sim["mean_pairs"] = nullptr;
    sim["eq2"] = nullptr;
    sim["mean_pairs_percent"] = nullptr;
  }
  sim["documents"] = pair_scores.size();
  metrics["corpus_similarity"] = sim;
  metrics["per_doc"] = per_doc;
  metrics["coverage"] = {{"max_rank", K}, {"per_persona", per_persona}, {"topK", headline}, {"per_domain", per_domain}};
  metrics["skewness"] = {{"overall", overall_skew ? Json(*overall_skew) : Json(nullptr)}, {"per_domain", skew_domains}};
  metrics["distribution"] = distribution;
  metrics["judge_scores"] = judge_scores;
  metrics["ranking_aggregates"] = aggregates;

  write_file_atomic(path("rankings.jsonl"), to_jsonl(ranking_rows));
  write_file_atomic(path("judge_scores.jsonl"), to_jsonl(score_rows));
  write_file_atomic(path("metrics.json"), metrics.dump(2) + "\n");
  write_file_atomic(path("report.txt"), emit_report(run_dir_, ReportFormat::Text));
  write_file_atomic(path("report.json"), emit_report(run_dir_, ReportFormat::Json));
  write_errors(Stage::Eval, error_rows);
  return error_rows.size();
}

std::size_t Orchestrator::rank_report() {
  if (!config_.rankings) fail(ErrorCode::ConfigInvalid, "rank-report needs a 'rankings' file in the config");
  const auto records = load_ranking_records(*config_.rankings);
  Json out = Json::object();
  for (const auto& [method, a] : aggregate_rankings(records)) {
    out[method] = {{"avg_rank", a.avg_rank}, {"win_ratio", a.win_ratio}, {"mrr", a.mrr}, {"records", a.records}};
  }
  write_file_atomic(path("ranking_aggregates.json"), out.dump(2) + "\n");
  write_errors(Stage::RankReport, {});
  return 0;
}

std::size_t Orchestrator::assemble_ft() {
  std::map<std::string, std::vector<Chunk>> chunks;
  for (const auto& row : read_jsonl(path("chunks.jsonl"))) {
    Chunk c;
    c.doc_id = row.at("doc_id").get<std::string>();
    c.index = row.at("index").get<std::size_t>();
    c.start_token = row.at("start_token").get<std::size_t>();
    c.end_token = row.at("end_token").get<std::size_t>();
    c.text = row.at("text").get<std::string>();
    chunks[c.doc_id].push_back(std::move(c));
  }
  const bool persona = config_.finetune_variant != "plain";
  const bool plain = config_.finetune_variant != "persona";

  std::vector<ChatExample> examples;
  std::vector<Json> error_rows;
  for (const auto& row : read_jsonl(path("final_sqs.jsonl"))) {
    const std::string doc_id = row.at("doc_id").get<std::string>();
    auto it = chunks.find(doc_id);
    if (it == chunks.end() || it->second.empty()) continue;
    const Chunk* chunk = &it->second.front();
    if (row.value("reference_verified", false) && row["reference"].is_string()) {
      const std::string ref = row["reference"].get<std::string>();
      for (const auto& c : it->second) {
        if (text::contains_normalized(c.text, ref)) {
          chunk = &c;
          break;
        }
      }
    }
    const std::string question = row.at("question").get<std::string>();
    try {
      if (persona) {
        examples.push_back(assemble_persona_example(
            *chunk,
            persona_description(row.at("persona").get<std::string>(),
                                row.at("goals_used").get<std::vector<std::string>>()),
            question, config_.max_chunk_tokens));
      }
      if (plain) examples.push_back(assemble_plain_example(*chunk, question, config_.max_chunk_tokens));
    } catch (const Error& e) {
      error_rows.push_back(error_row("assemble-ft", row.value("question_id", doc_id), e));
    }
  }

  const DatasetSplit split = split_dataset(examples, config_.split, config_.split_seed);
  auto rows = [](const std::vector<ChatExample>& xs) {
    std::vector<Json> out;
    for (const auto& x : xs) out.push_back(to_json(x));
    return out;
  };
  auto doc_count = [](const std::vector<ChatExample>& xs) {
    std::set<std::string> ids;
    for (const auto& x : xs) ids.insert(x.doc_id);
    return ids.size();
  };
  Json metadata;
  metadata["variant"] = config_.finetune_variant;
  metadata["hyperparameters"] = {{"epochs", config_.training.epochs},
                                 {"learning_rate", config_.training.learning_rate},
                                 {"per_device_batch_size", config_.training.per_device_batch_size},
                                 {"gradient_accumulation_steps", config_.training.gradient_accumulation_steps}};
  metadata["chunking"] = {{"chunk_size", config_.chunking.chunk_size},
                          {"overlap", config_.chunking.overlap},
                          {"max_chunk_tokens", config_.max_chunk_tokens}};
  metadata["split"] = {
      {"ratios", {config_.split.train, config_.split.validation, config_.split.test}},
      {"seed", config_.split_seed},
      {"examples", {{"train", split.train.size()}, {"validation", split.validation.size()}, {"test", split.test.size()}}},
      {"documents",
       {{"train", doc_count(split.train)}, {"validation", doc_count(split.validation)}, {"test", doc_count(split.test)}}}};

  write_file_atomic(path("train.jsonl"), to_jsonl(rows(split.train)));
  write_file_atomic(path("validation.jsonl"), to_jsonl(rows(split.validation)));
  write_file_atomic(path("test.jsonl"), to_jsonl(rows(split.test)));
  write_file_atomic(path("metadata.json"), metadata.dump(2) + "\n");
  write_errors(Stage::AssembleFt, error_rows);
  return error_rows.size();
}

std::size_t Orchestrator::stats() {
  const RunState state = load_state(run_dir_, false, false);
  std::vector<QuestionRecord> records;
  for (const auto& row : read_jsonl(path("final_sqs.jsonl"))) {
    const Document* d = state.doc(row.at("doc_id").get<std::string>());
    if (!d) continue;
    records.push_back({d->id, canonical_vertical(d->vertical.value_or("")), row.at("question").get<std::string>()});
  }
  Json out = to_json(dataset_stats(records));
  Json examples = Json::object();
  for (const char* split : {"train", "validation", "test"}) {
    examples[split] = read_jsonl(path(std::string(split) + ".jsonl")).size();
  }
  out["examples"] = examples;
  write_file_atomic(path("stats.json"), out.dump(2) + "\n");
  write_errors(Stage::Stats, {});
  return 0;
}

}  // namespace personasq

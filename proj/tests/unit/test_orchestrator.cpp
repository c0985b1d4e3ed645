#include <gtest/gtest.h>

#include <chrono>
#include <fstream>

#include "personasq/error.hpp"
#include "personasq/jsonl.hpp"
#include "personasq/orchestrator.hpp"
#include "personasq/report.hpp"
#include "test_support.hpp"

namespace personasq {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

const fs::path kSample = fs::path(PERSONASQ_TEST_DATA) / "sample";

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

RunConfig sample_config(CacheMode mode, fs::path cache_dir = kSample / "cache") {
  RunConfig c = load_run_config(kSample / "config.json");
  c.cache_mode = mode;
  c.cache_dir = std::move(cache_dir);
  return c;
}

std::vector<std::string> all_outputs() {
  std::vector<std::string> files;
  for (Stage s : all_stages()) {
    for (const auto& f : stage_outputs(s)) files.push_back(f);
  }
  return files;
}

void expect_matches_golden(const fs::path& run_dir) {
  for (const auto& f : all_outputs()) {
    ASSERT_TRUE(fs::exists(run_dir / f)) << f;
    EXPECT_EQ(read_file(run_dir / f), read_file(kSample / "golden" / f)) << f << " differs from the golden copy";
  }
  for (const auto& entry : fs::directory_iterator(run_dir / "errors")) {
    EXPECT_EQ(fs::file_size(entry.path()), 0u) << entry.path();
  }
}

TEST(StageGraph, NamesAndPrerequisites) {
  for (Stage s : all_stages()) EXPECT_EQ(parse_stage(to_string(s)), s);
  EXPECT_EQ(all_stages().size(), 10u);
  EXPECT_EQ(to_string(Stage::GenQuestions), "gen-questions");
  EXPECT_EQ(prerequisite(Stage::Gates), Stage::GenQuestions);
  EXPECT_EQ(prerequisite(Stage::AssembleFt), Stage::Gates);
  EXPECT_FALSE(prerequisite(Stage::Ingest).has_value());
  EXPECT_FALSE(prerequisite(Stage::RankReport).has_value());
  EXPECT_EQ(code_of([] { parse_stage("bake"); }), ErrorCode::InvalidArgument);
}

TEST(Manifest, JsonRoundTrip) {
  RunManifest m;
  m.run_id = "r";
  m.config_digest = "c";
  m.stages["ingest"] = StageRecord{"complete", "d", {{"documents.jsonl", "h"}}, 2};
  const RunManifest back = RunManifest::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  TempDir dir;
  m.save(dir / "manifest.json");
  EXPECT_EQ(RunManifest::load(dir / "manifest.json")->to_json(), m.to_json());
  EXPECT_FALSE(RunManifest::load(dir / "absent.json").has_value());
}

TEST(RunLockTest, SecondHolderRejected) {
  TempDir dir;
  {
    RunLock first(dir.path());
    EXPECT_EQ(code_of([&] { RunLock second(dir.path()); }), ErrorCode::RunLocked);
  }
  EXPECT_NO_THROW(RunLock again(dir.path()));
}

TEST(OrchestratorTest, PrerequisiteMissing) {
  TempDir dir;
  Orchestrator o(sample_config(CacheMode::Replay), dir / "run");
  EXPECT_EQ(code_of([&] { o.run_stage(Stage::Gates); }), ErrorCode::PrerequisiteMissing);
  EXPECT_EQ(code_of([&] { o.run_stage(Stage::GenPersonas); }), ErrorCode::PrerequisiteMissing);
}

TEST(OrchestratorTest, ConcurrentRunOnSameDirectory) {
  TempDir dir;
  Orchestrator first(sample_config(CacheMode::Replay), dir / "run");
  EXPECT_EQ(code_of([&] { Orchestrator second(sample_config(CacheMode::Replay), dir / "run"); }),
            ErrorCode::RunLocked);
}

TEST(OrchestratorTest, InvalidConfigRejected) {
  TempDir dir;
  RunConfig c = sample_config(CacheMode::Replay);
  c.concurrency = 0;
  EXPECT_EQ(code_of([&] { Orchestrator o(c, dir / "run"); }), ErrorCode::ConfigInvalid);
}

TEST(OrchestratorTest, UpToDateForceAndStaleness) {
  TempDir dir;
  {
    Orchestrator o(sample_config(CacheMode::Replay), dir / "run");
    EXPECT_FALSE(o.run_stage(Stage::Ingest).up_to_date);
    EXPECT_TRUE(o.run_stage(Stage::Ingest).up_to_date);
    EXPECT_FALSE(o.run_stage(Stage::Ingest, true).up_to_date);
    EXPECT_FALSE(o.run_stage(Stage::GenPersonas).up_to_date);
    EXPECT_EQ(o.manifest().stages.at("ingest").status, "complete");
  }
  {
    Orchestrator o(sample_config(CacheMode::Replay), dir / "run");
    EXPECT_TRUE(o.run_stage(Stage::GenPersonas).up_to_date);
  }
  {
    RunConfig changed = sample_config(CacheMode::Replay);
    changed.chunking.overlap = 10;
    Orchestrator o(changed, dir / "run");
    EXPECT_EQ(code_of([&] { o.run_stage(Stage::Normalize); }), ErrorCode::PrerequisiteMissing);
  }
  {
    std::ofstream(dir / "run" / "documents.jsonl", std::ios::app) << "\n";
    Orchestrator o(sample_config(CacheMode::Replay), dir / "run");
    EXPECT_FALSE(o.run_stage(Stage::Ingest).up_to_date);
    // Re-ingesting restores identical bytes, so downstream stages stay current.
    EXPECT_TRUE(o.run_stage(Stage::GenPersonas).up_to_date);
  }
}

TEST(EndToEnd, ReplayFromBundledCacheMatchesGolden) {
  TempDir dir;
  const auto start = std::chrono::steady_clock::now();
  Orchestrator o(sample_config(CacheMode::Replay), dir / "run");
  const auto results = o.run_all();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(results.size(), 10u);
  for (const auto& r : results) EXPECT_EQ(r.errors, 0u) << to_string(r.stage);
  expect_matches_golden(dir / "run");
  EXPECT_LT(seconds, 10.0);
}

TEST(EndToEnd, RecordThenReplayIsIdentical) {
  TempDir dir;
  {
    Orchestrator o(sample_config(CacheMode::Record, dir / "cache"), dir / "recorded");
    o.run_all();
  }
  expect_matches_golden(dir / "recorded");
  {
    Orchestrator o(sample_config(CacheMode::Replay, dir / "cache"), dir / "replayed");
    o.run_all();
  }
  expect_matches_golden(dir / "replayed");
}

TEST(EndToEnd, ReplayMissIsRecordedAsItemErrors) {
  TempDir dir;
  fs::create_directories(dir / "empty-cache");
  Orchestrator o(sample_config(CacheMode::Replay, dir / "empty-cache"), dir / "run");
  o.run_stage(Stage::Ingest);
  const StageResult r = o.run_stage(Stage::GenPersonas);
  EXPECT_EQ(r.errors, 3u);
  const auto errors = read_jsonl(dir / "run" / "errors" / "gen-personas.jsonl");
  ASSERT_EQ(errors.size(), 3u);
  EXPECT_NE(errors[0].dump().find("ReplayMiss"), std::string::npos);
}

TEST(Report, EmptyRunDirectory) {
  TempDir dir;
  const RunReport r = load_run_report(dir.path());
  EXPECT_TRUE(r.domains.empty());
  EXPECT_FALSE(r.corpus_similarity.has_value());
  EXPECT_NO_THROW(render_text(r));
  EXPECT_TRUE(to_json(r).is_object());
}

TEST(Report, GoldenRunSummary) {
  const fs::path golden = kSample / "golden";
  const RunReport r = load_run_report(golden);
  ASSERT_EQ(r.domains.size(), 2u);
  EXPECT_EQ(r.domains[0].domain, "Healthcare");
  EXPECT_EQ(r.domains[0].documents, 2u);
  EXPECT_EQ(r.domains[0].final_questions, 10u);
  EXPECT_EQ(r.domains[1].domain, "Legal");
  EXPECT_EQ(r.domains[1].final_questions, 6u);
  ASSERT_TRUE(r.corpus_similarity && r.corpus_similarity_eq2);
  EXPECT_DOUBLE_EQ(*r.corpus_similarity_eq2, *r.corpus_similarity / 2.0);
  ASSERT_EQ(r.top_k.size(), 3u);
  EXPECT_LE(r.top_k[0], r.top_k[1]);
  EXPECT_LE(r.top_k[1], r.top_k[2]);
  EXPECT_EQ(emit_report(golden, ReportFormat::Text), read_file(golden / "report.txt"));
  EXPECT_EQ(Json::parse(emit_report(golden, ReportFormat::Json)), Json::parse(read_file(golden / "report.json")));
}

}  // namespace
}  // namespace personasq

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "personasq/jsonl.hpp"
#include "personasq/model_gateway.hpp"
#include "personasq/run_config.hpp"

namespace personasq {

enum class Stage { Ingest, GenPersonas, Normalize, ScoreGoals, GenQuestions, Gates, Eval, RankReport, AssembleFt, Stats };

std::string_view to_string(Stage stage) noexcept;

/// Throws InvalidArgument for an unknown stage name.
Stage parse_stage(std::string_view name);

/// Stages in pipeline order.
const std::vector<Stage>& all_stages();

/// The stage that must be complete first, if any.
std::optional<Stage> prerequisite(Stage stage);

/// Files a stage writes into the run directory.
const std::vector<std::string>& stage_outputs(Stage stage);

struct StageRecord {
  std::string status;  // "running" or "complete"
  std::string inputs_digest;
  std::map<std::string, std::string> outputs;  // file name -> sha256
  std::size_t errors = 0;
};

struct RunManifest {
  std::string run_id;
  std::string config_digest;
  std::map<std::string, StageRecord> stages;

  Json to_json() const;
  static RunManifest from_json(const Json& j);
  static std::optional<RunManifest> load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Exclusive ownership of a run directory through a `.lock` file. Throws
/// RunLocked when the file already exists.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct Backends {
  std::shared_ptr<ChatBackend> chat;
  std::shared_ptr<ChatBackend> judge;
  std::shared_ptr<EmbeddingBackend> embedding;
};

/// Instantiates the backends named in the config.
Backends make_backends(const RunConfig& config);

struct StageResult {
  Stage stage = Stage::Ingest;
  bool up_to_date = false;
  std::size_t errors = 0;  // recoverable per-item failures, see errors/<stage>.jsonl
  std::vector<std::string> outputs;
};

class Orchestrator {
 public:
  /// Takes the run lock for the lifetime of the object.
  Orchestrator(RunConfig config, std::filesystem::path run_dir, std::optional<Backends> backends = std::nullopt);

  /// Runs one stage. Throws PrerequisiteMissing when the previous stage is not
  /// complete or was produced from different inputs.
  StageResult run_stage(Stage stage, bool force = false);

  /// Every stage in order; rank-report only when a rankings file is configured.
  std::vector<StageResult> run_all(bool force = false);

  const RunManifest& manifest() const noexcept { return manifest_; }
  const std::filesystem::path& run_dir() const noexcept { return run_dir_; }
  const RunConfig& config() const noexcept { return config_; }

 private:
  std::string expected_inputs_digest(Stage stage) const;
  bool is_current(Stage stage) const;
  std::size_t execute(Stage stage);

  std::size_t ingest();
  std::size_t gen_personas();
  std::size_t normalize();
  std::size_t score_goals_stage();
  std::size_t gen_questions();
  std::size_t gates();
  std::size_t eval();
  std::size_t rank_report();
  std::size_t assemble_ft();
  std::size_t stats();

  void write_errors(Stage stage, const std::vector<Json>& errors) const;
  std::filesystem::path path(const std::string& name) const { return run_dir_ / name; }

  RunConfig config_;
  std::filesystem::path run_dir_;
  std::unique_ptr<RunLock> lock_;
  Backends backends_;
  std::shared_ptr<ResponseCache> cache_;
  std::unique_ptr<ModelGateway> chat_;
  std::unique_ptr<ModelGateway> judge_;
  RunManifest manifest_;
};

}  // namespace personasq

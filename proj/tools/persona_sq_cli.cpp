#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>

#include "personasq/orchestrator.hpp"
#include "personasq/report.hpp"

namespace {

using namespace personasq;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::PrerequisiteMissing: return 3;
    case ErrorCode::ConfigInvalid: return 4;
    case ErrorCode::RunLocked: return 5;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persona-conditioned suggested question generation and evaluation"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string run_dir = "run";
  std::string cache_mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> concurrency;
  bool force = false;
  std::string format = "text";
  bool verbose = false;

  app.add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--run-dir", run_dir, "Directory holding stage outputs and the manifest");
  app.add_option("--cache-mode", cache_mode, "Response cache mode")
      ->check(CLI::IsMember({"record", "replay", "live"}));
  app.add_option("--seed", seed, "Seed for goal sampling and dataset splits");
  app.add_option("--concurrency", concurrency, "Maximum concurrent backend requests")->check(CLI::Range(1, 1024));
  app.add_flag("--force", force, "Rerun the stage even when its inputs are unchanged");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  for (Stage s : all_stages()) {
    std::string name(to_string(s));
    app.add_subcommand(name, "Run the " + name + " stage")->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    RunConfig config = load_run_config(config_path);
    if (!cache_mode.empty()) config.cache_mode = parse_cache_mode(cache_mode);
    if (seed) {
      config.sampling_seed = *seed;
      config.split_seed = *seed;
    }
    if (concurrency) config.concurrency = *concurrency;

    const Stage stage = parse_stage(app.get_subcommands().front()->get_name());
    Orchestrator orchestrator(config, run_dir);
    const StageResult result = orchestrator.run_stage(stage, force);
    const std::string status = result.up_to_date ? "up-to-date" : "complete";

    if (format == "json") {
      Json out;
      out["stage"] = to_string(stage);
      out["status"] = status;
      out["errors"] = result.errors;
      out["outputs"] = result.outputs;
      if (stage == Stage::Eval) out["report"] = to_json(load_run_report(orchestrator.run_dir()));
      std::cout << out.dump(2) << "\n";
    } else {
      std::cout << to_string(stage) << ": " << status;
      if (result.errors) std::cout << " (" << result.errors << " item errors, see errors/" << to_string(stage) << ".jsonl)";
      std::cout << "\n";
      if (stage == Stage::Eval) std::cout << "\n" << emit_report(orchestrator.run_dir(), ReportFormat::Text);
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

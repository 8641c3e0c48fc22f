#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "core/config.hpp"
#include "core/scores.hpp"

namespace atdkit {

// A score function together with the artifacts that keep it alive.
struct ResolvedScore {
  std::string method;  // display name: score kind
  std::unique_ptr<ClassifierModel> classifier;
  std::unique_ptr<AtdBundle> bundle;
  std::unique_ptr<ScoreFunction> fn;
};

// Loads checkpoints / detector files / bundles named by the spec, checks
// fingerprints, and puts every model in eval mode.
ResolvedScore resolve_score(const ScoreSpec& spec);

struct RunResult {
  std::filesystem::path out_dir;
  nlohmann::json manifest;
};

// Executes one run and writes its artifacts plus run_manifest.json into
// cfg.out_dir. On failure the manifest is still written, with status
// "failed" and the error record, before the exception propagates.
RunResult execute_run(const RunConfig& cfg);

}  // namespace atdkit

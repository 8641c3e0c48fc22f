#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/atd.hpp"
#include "core/attacks.hpp"
#include "core/data.hpp"
#include "core/toy_lab.hpp"
#include "core/training.hpp"

namespace atdkit {

enum class RunKind {
  Pretrain,
  TrainBaseline,
  TrainAtd,
  Evaluate,
  Transfer,
  CrossAttack,
  Sweep,
  Toy,
};

const char* run_kind_name(RunKind kind);
RunKind run_kind_from_name(const std::string& name);

// Recipe for a detection score: which score, and which artifacts feed it.
//   msp            -> classifier (checkpoint path)
//   md | rmd |
//   openmax        -> detector (detector.json from a train-baseline run);
//                     classifier optionally overrides the recorded path
//   discriminator  -> bundle (directory from a train-atd run)
struct ScoreSpec {
  std::string kind = "msp";
  std::string classifier;
  std::string detector;
  std::string bundle;

  void validate(const std::string& path) const;
};

// Inline feature-extractor pretraining for train-atd runs. Ignored when a
// checkpoint is given. The objective is not a free knob: it follows the
// atd.robust_extractor flag (robust -> inner-maximized training, otherwise
// plain cross-entropy).
struct ExtractorSpec {
  std::string checkpoint;
  std::string arch = "mlp[2,64,64]";
  int epochs = 10;
  int batch_size = 64;
  OptimizerSpec optimizer;
  AttackConfig attack;
};

// One declarative run. Only the sections used by `kind` are parsed, echoed,
// and hashed; unknown keys anywhere are rejected so typos cannot silently
// fall back to defaults.
struct RunConfig {
  RunKind kind = RunKind::Evaluate;
  std::uint64_t seed = 0;
  std::string out_dir = "run-out";
  std::vector<DatasetSpec> datasets;

  // pretrain
  std::string arch = "mlp[2,64,64]";
  TrainConfig train;

  // train-baseline
  std::string baseline_kind = "md";
  std::string baseline_classifier;
  double baseline_lambda_rel = 1e-6;
  int baseline_tail_size = 20;
  int baseline_alpha_top = -1;

  // train-atd
  AtdConfig atd;
  ExtractorSpec extractor;

  // evaluate | transfer | cross-attack | sweep
  ScoreSpec score;
  AttackConfig attack;
  bool keep_scores = false;
  std::vector<ScoreSpec> transfer_sources;
  double transfer_epsilon = 8.0 / 255.0;
  std::optional<ClampRange> transfer_clamp;
  std::string cross_classifier;
  std::vector<int> sweep_steps = {1, 5, 10, 25, 50, 100};

  // toy
  std::string toy_variant = "discriminator";  // or "at-msp"
  ToyRunConfig toy;
  ToyAtMspConfig toy_at_msp;

  // Canonical form: every consulted field explicit, keys sorted by the
  // serializer. Two configs behave identically iff their echoes match.
  nlohmann::json echo() const;
  std::string config_hash() const;
};

// Validation failures name the offending field path (e.g. "attack.epsilon").
RunConfig parse_run_config(const nlohmann::json& j);

// Reads a JSON config file. seed_override replaces the top-level seed before
// parsing, so everything derived from it (dataset seeds included) follows.
RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override = {},
                          const std::string& out_dir_override = "");

}  // namespace atdkit

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core/attacks.hpp"
#include "core/data.hpp"
#include "core/model_kit.hpp"
#include "core/scores.hpp"
#include "core/training.hpp"

namespace atdkit {

enum class AtdMode { Feature, Pixel };

const char* atd_mode_name(AtdMode mode);
AtdMode atd_mode_from_name(const std::string& name);

// Discriminator-vs-generator training against a perturbation adversary.
// Each step the discriminator maximizes
//   mean log D(x_in*) + alpha * mean log(1 - D(x_out*))
//                     + (1 - alpha) * mean log(1 - D(G(z)))
// where x_in* and x_out* are fresh inner attacks on the real data against
// the current discriminator, while the generator minimizes its term through
// the usual non-saturating surrogate. Generated samples are never attacked
// (they are already worst-case-ish negatives; the attack_generated flag
// exists as an ablation). Weight-zero terms are skipped outright, not
// multiplied by zero, so alpha 0 and alpha 1 shrink the computation graph.
struct AtdConfig {
  AtdMode mode = AtdMode::Feature;
  double alpha_mix = 0.5;  // real-outlier weight; 1 - alpha_mix on generated
  int epochs = 20;
  int batch_size = 64;
  std::size_t latent_dim = 16;
  std::vector<std::size_t> g_hidden = {64, 64};
  std::vector<std::size_t> d_hidden = {64, 64};
  OptimizerSpec d_optimizer{"adam", 1e-4};
  OptimizerSpec g_optimizer{"adam", 1e-4};
  AttackConfig attack;              // inner attacks on real data
  bool adversarial_training = true;  // ablation: false trains on clean data
  bool attack_generated = false;     // ablation: true attacks G's output too
  bool robust_extractor = true;      // echoed; consumed by extractor pretraining
  std::uint64_t seed = 0;

  void validate() const;
};

struct AtdEpochStats {
  int epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double mean_sigma_in = 0.0;
  double mean_sigma_gen = 0.0;
  double val_auroc = 0.0;
  bool improved = false;
};

struct AtdHistory {
  std::vector<AtdEpochStats> epochs;
  std::uint64_t d_steps = 0;
  std::uint64_t g_steps = 0;
  std::uint64_t attacks_on_in = 0;
  std::uint64_t attacks_on_out = 0;
  std::uint64_t attacks_on_generated = 0;
};

struct BestRecord {
  double val_auroc = -1.0;
  int epoch = -1;
};

struct AtdBundle {
  AtdMode mode = AtdMode::Feature;
  FeatureExtractor extractor;  // invalid in pixel mode
  Discriminator disc;          // best-validation weights, eval mode
  Generator gen;
  BestRecord best;
  AtdHistory history;
  std::string config_hash;
  std::uint64_t extractor_hash_before = 0;
  std::uint64_t extractor_hash_after = 0;

  // Score view over the bundle; the bundle must outlive it.
  DiscriminatorScore score();
};

// Validation runs once per epoch in strict eval mode on held-out clean data
// (never the exposure set); the best discriminator by validation AUROC is
// what the bundle keeps. extractor is consumed; pass an empty one in pixel
// mode.
AtdBundle train_atd(FeatureExtractor extractor, const SampleBatch& in_train,
                    const SampleBatch* out_exposure,
                    const SampleBatch& val_in, const SampleBatch& val_out,
                    const AtdConfig& cfg);

// Bundle directory: discriminator/generator (and extractor in feature mode)
// checkpoints plus a manifest tying them together.
void save_bundle(const AtdBundle& bundle, const std::filesystem::path& dir);
AtdBundle load_bundle(const std::filesystem::path& dir);

}  // namespace atdkit

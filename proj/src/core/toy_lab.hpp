#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "core/data.hpp"
#include "core/model_kit.hpp"
#include "core/training.hpp"

namespace atdkit {

// Planar detector study: a small discriminator learns in-region vs
// out-region vs resampled pseudo-outliers, with inner attacks switchable per
// data family. The toggles isolate which attacks during training buy which
// kind of robustness.
struct ToyToggles {
  bool attack_in = false;
  bool attack_out = false;
  bool attack_generated = false;
};

struct ToyRunConfig {
  std::string layout = "pair";
  double epsilon = 1.0;
  ToyToggles toggles;
  int epochs = 150;
  int batch_size = 64;
  std::size_t n_per_rect = 200;
  int attack_steps = 40;  // training and robust evaluation
  OptimizerSpec optimizer{"adam", 1e-3};
  std::vector<std::size_t> d_hidden = {64, 64};
  std::size_t grid_resolution = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

// Detector probability sampled over the layout frame; values are row-major
// with y advancing per row.
struct DecisionMap {
  std::size_t resolution = 0;
  Rect bounds{0, 0, 0, 0, 0};
  std::vector<double> values;
};

struct ToyMetrics {
  double clean_acc_in = 0.0;
  double clean_acc_out = 0.0;
  double clean_acc_gen = 0.0;
  double robust_in_acc = 0.0;      // attacked in-points still above threshold
  double robust_out_detect = 0.0;  // attacked out-points still below threshold
  double robust_auroc_both = 0.0;
  std::size_t resampler_calls_during_training = 0;
};

struct ToyRunResult {
  Discriminator disc;
  DecisionMap map;
  ToyMetrics metrics;
  SampleBatch in_points;
  SampleBatch out_points;
};

ToyRunResult run_toy(const ToyRunConfig& cfg);

// Companion study: an adversarially trained classifier on the multi-class
// layout, scored by max softmax probability over the same frame. Shows how
// far a classifier-derived detector gets without a dedicated discriminator.
struct ToyAtMspConfig {
  std::string layout = "triad";
  double epsilon = 1.0;
  int epochs = 60;
  int batch_size = 64;
  std::size_t n_per_rect = 200;
  int train_attack_steps = 10;
  int eval_attack_steps = 40;
  OptimizerSpec optimizer{"adam", 1e-3};
  std::string arch = "mlp[2,64,64]";
  std::size_t grid_resolution = 200;
  std::uint64_t seed = 0;
};

struct ToyAtMspResult {
  ClassifierModel model;
  DecisionMap map;  // max softmax probability over the frame
  double clean_auroc = 0.0;
  double robust_auroc_both = 0.0;
};

ToyAtMspResult run_toy_at_msp(const ToyAtMspConfig& cfg);

void write_decision_map_csv(const DecisionMap& map,
                            const std::filesystem::path& path);

}  // namespace atdkit

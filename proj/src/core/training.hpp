#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/attacks.hpp"
#include "core/data.hpp"
#include "core/model_kit.hpp"

namespace atdkit {

struct OptimizerSpec {
  std::string kind = "adam";  // "sgd" | "adam"
  double lr = 1e-3;
  double momentum = 0.9;  // sgd only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

class Optimizer {
public:
  virtual ~Optimizer() = default;
  virtual void step() = 0;

  // Binds parameter/gradient buffers once; callers keep them alive.
  static std::unique_ptr<Optimizer> create(const OptimizerSpec& spec,
                                           std::vector<Tensor*> params,
                                           std::vector<Tensor*> grads);
};

// Classification objectives, all sharing one loop:
//   Standard      cross-entropy on clean inputs
//   AT            cross-entropy on inner-maximized inputs
//   AOE           AT plus lambda * uniformity loss on clean outliers
//   ALOE          AT plus lambda * uniformity loss on attacked outliers
// Reductions are wired so each row of the ladder degenerates exactly into
// the previous one: ALOE with lambda 0 skips the outlier branch entirely
// (no extra randomness, no zero-weighted arithmetic), and AT with epsilon 0
// returns inputs bit-identically, so parameter trajectories coincide.
enum class TrainObjective { Standard, AT, AOE, ALOE };

const char* objective_name(TrainObjective objective);
TrainObjective objective_from_name(const std::string& name);

struct TrainConfig {
  TrainObjective objective = TrainObjective::Standard;
  int epochs = 10;
  int batch_size = 64;
  OptimizerSpec optimizer;
  AttackConfig attack;          // inner maximization for AT/ALOE
  double lambda_outlier = 0.5;  // weight on the outlier term
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_acc = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::uint64_t optimizer_steps = 0;
  // Fresh inner attacks per optimizer step, counted separately per side;
  // tests pin these to the step count.
  std::uint64_t attacks_on_in = 0;
  std::uint64_t attacks_on_out = 0;
};

// Trains in place. out_exposure may be null except for AOE/ALOE with a
// nonzero outlier weight. Leaves the model in eval mode.
TrainHistory train_classifier(ClassifierModel& model,
                              const SampleBatch& in_train,
                              const SampleBatch* out_exposure,
                              const TrainConfig& cfg);

// Builds, trains (typically with the AT objective), and strips the head.
FeatureExtractor pretrain_extractor(const std::string& arch,
                                    const SampleBatch& in_train,
                                    const TrainConfig& cfg,
                                    const std::string& provenance);

}  // namespace atdkit

#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/errors.hpp"
#include "core/losses.hpp"
#include "core/model_kit.hpp"
#include "core/rng.hpp"
#include "core/scores.hpp"
#include "core/training.hpp"
#include "support.hpp"

using namespace atdkit;

namespace {

SampleBatch in_blobs(std::uint64_t seed) {
  return testsup::blob_batch(seed, 40, {{0.0, 0.0}, {2.5, 2.5}}, 0.4);
}

SampleBatch out_blobs(std::uint64_t seed) {
  return testsup::blob_batch(seed, 40, {{-3.0, 3.0}}, 0.4, false,
                             Role::OutExposure, "exposure");
}

ClassifierModel fresh_model(std::uint64_t seed) {
  RngStream init = RngStream::derive(seed, "init");
  return build_classifier("mlp[2,16,16]", 2, init);
}

std::vector<double> trained_params(TrainObjective objective, double lambda,
                                   double epsilon, std::uint64_t seed) {
  ClassifierModel model = fresh_model(900);  // identical start every time
  TrainConfig cfg;
  cfg.objective = objective;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  cfg.lambda_outlier = lambda;
  cfg.attack.epsilon = epsilon;
  cfg.attack.steps = 3;
  cfg.seed = seed;
  SampleBatch in = in_blobs(901);
  SampleBatch out = out_blobs(902);
  const SampleBatch* exposure =
      (objective == TrainObjective::AOE || objective == TrainObjective::ALOE)
          ? &out
          : nullptr;
  train_classifier(model, in, exposure, cfg);
  return flatten_values(model.params());
}

}  // namespace

TEST_CASE("adam and sgd reduce a quadratic") {
  // Minimize |p - t|^2 by hand-fed gradients; both optimizers must converge.
  for (const char* kind : {"adam", "sgd"}) {
    Tensor p({4});
    Tensor g({4});
    const double target[4] = {1.0, -2.0, 0.5, 3.0};
    p.fill(0.0);

    OptimizerSpec spec;
    spec.kind = kind;
    spec.lr = 0.05;
    auto opt = Optimizer::create(spec, {&p}, {&g});
    for (int it = 0; it < 800; ++it) {
      for (std::size_t j = 0; j < 4; ++j) g[j] = 2.0 * (p[j] - target[j]);
      opt->step();
    }
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(p[j] - target[j]) < 1e-2);
    }
  }

  OptimizerSpec bad;
  bad.kind = "newton";
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = OptimizerSpec{};
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("objective names round-trip") {
  for (auto obj : {TrainObjective::Standard, TrainObjective::AT,
                   TrainObjective::AOE, TrainObjective::ALOE}) {
    CHECK(objective_from_name(objective_name(obj)) == obj);
  }
  CHECK_THROWS_AS(objective_from_name("fancy"), Error);
}

TEST_CASE("standard training learns separable blobs") {
  ClassifierModel model = fresh_model(910);
  SampleBatch in = in_blobs(911);

  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.seed = 7;
  TrainHistory hist = train_classifier(model, in, nullptr, cfg);

  REQUIRE(hist.epochs.size() == 20);
  CHECK(hist.epochs.back().train_acc > 0.95);
  CHECK(hist.epochs.back().mean_loss < hist.epochs.front().mean_loss);
  CHECK_FALSE(model.training());  // left in eval mode

  // counters: steps = epochs * ceil(N / batch), no attacks for Standard
  const std::uint64_t steps_per_epoch = (80 + 16 - 1) / 16;
  CHECK(hist.optimizer_steps == 20 * steps_per_epoch);
  CHECK(hist.attacks_on_in == 0);
  CHECK(hist.attacks_on_out == 0);

  const double acc = loss::accuracy(model.logits(in.inputs), in.labels);
  CHECK(acc > 0.95);
}

TEST_CASE("adversarial training counts one inner attack per step") {
  ClassifierModel model = fresh_model(912);
  SampleBatch in = in_blobs(913);

  TrainConfig cfg;
  cfg.objective = TrainObjective::AT;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.attack.epsilon = 0.25;
  cfg.attack.steps = 4;
  cfg.seed = 8;
  TrainHistory hist = train_classifier(model, in, nullptr, cfg);

  const std::uint64_t steps_per_epoch = (80 + 32 - 1) / 32;
  CHECK(hist.optimizer_steps == 3 * steps_per_epoch);
  CHECK(hist.attacks_on_in == hist.optimizer_steps);
  CHECK(hist.attacks_on_out == 0);
}

TEST_CASE("outlier objectives require exposure data only when weighted") {
  ClassifierModel model = fresh_model(914);
  SampleBatch in = in_blobs(915);

  TrainConfig cfg;
  cfg.objective = TrainObjective::ALOE;
  cfg.epochs = 1;
  cfg.lambda_outlier = 0.5;
  CHECK_THROWS_AS(train_classifier(model, in, nullptr, cfg), Error);

  // lambda 0 skips the outlier branch, so no exposure set is needed
  cfg.lambda_outlier = 0.0;
  TrainHistory hist = train_classifier(model, in, nullptr, cfg);
  CHECK(hist.attacks_on_out == 0);
}

TEST_CASE("aloe attacks outliers, aoe leaves them clean") {
  SampleBatch in = in_blobs(916);
  SampleBatch out = out_blobs(917);

  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 40;
  cfg.lambda_outlier = 0.5;
  cfg.attack.epsilon = 0.25;
  cfg.attack.steps = 2;
  cfg.seed = 9;

  cfg.objective = TrainObjective::ALOE;
  ClassifierModel m1 = fresh_model(918);
  TrainHistory aloe = train_classifier(m1, in, &out, cfg);
  CHECK(aloe.attacks_on_in == aloe.optimizer_steps);
  CHECK(aloe.attacks_on_out == aloe.optimizer_steps);

  cfg.objective = TrainObjective::AOE;
  ClassifierModel m2 = fresh_model(918);
  TrainHistory aoe = train_classifier(m2, in, &out, cfg);
  CHECK(aoe.attacks_on_in == aoe.optimizer_steps);
  CHECK(aoe.attacks_on_out == 0);
}

TEST_CASE("objective ladder degenerates exactly") {
  // ALOE with lambda 0 must follow AT's parameter trajectory bit for bit,
  // and AT with epsilon 0 must follow Standard's.
  auto at = trained_params(TrainObjective::AT, 0.0, 0.25, 42);
  auto aloe0 = trained_params(TrainObjective::ALOE, 0.0, 0.25, 42);
  REQUIRE(at.size() == aloe0.size());
  for (std::size_t i = 0; i < at.size(); ++i) CHECK(at[i] == aloe0[i]);

  auto standard = trained_params(TrainObjective::Standard, 0.0, 0.25, 42);
  auto at0 = trained_params(TrainObjective::AT, 0.0, 0.0, 42);
  REQUIRE(standard.size() == at0.size());
  for (std::size_t i = 0; i < standard.size(); ++i) {
    CHECK(standard[i] == at0[i]);
  }
}

TEST_CASE("training is deterministic in the seed") {
  auto a = trained_params(TrainObjective::AT, 0.0, 0.25, 1);
  auto b = trained_params(TrainObjective::AT, 0.0, 0.25, 1);
  auto c = trained_params(TrainObjective::AT, 0.0, 0.25, 2);
  REQUIRE(a.size() == b.size());
  bool all_same = true, any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_same &= (a[i] == b[i]);
    any_diff |= (a[i] != c[i]);
  }
  CHECK(all_same);
  CHECK(any_diff);
}

TEST_CASE("adversarial training flattens confidence off-manifold") {
  // The AT model should be harder to push around than the Standard one:
  // under the same attack, its accuracy drops less.
  SampleBatch in = in_blobs(920);

  TrainConfig std_cfg;
  std_cfg.epochs = 25;
  std_cfg.batch_size = 16;
  std_cfg.seed = 10;
  ClassifierModel plain = fresh_model(921);
  train_classifier(plain, in, nullptr, std_cfg);

  TrainConfig at_cfg = std_cfg;
  at_cfg.objective = TrainObjective::AT;
  at_cfg.attack.epsilon = 0.5;
  at_cfg.attack.steps = 5;
  ClassifierModel robust = fresh_model(921);
  train_classifier(robust, in, nullptr, at_cfg);

  AttackConfig eval_attack;
  eval_attack.epsilon = 0.5;
  eval_attack.steps = 10;

  Tensor adv_plain = attack_classifier_ce(plain, in.inputs, in.labels,
                                          eval_attack, 99);
  Tensor adv_robust = attack_classifier_ce(robust, in.inputs, in.labels,
                                           eval_attack, 99);
  const double acc_plain =
      loss::accuracy(plain.logits(adv_plain), in.labels);
  const double acc_robust =
      loss::accuracy(robust.logits(adv_robust), in.labels);
  CHECK(acc_robust > acc_plain);
}

TEST_CASE("pretrain_extractor yields a frozen feature map") {
  SampleBatch in = in_blobs(922);
  TrainConfig cfg;
  cfg.objective = TrainObjective::AT;
  cfg.epochs = 3;
  cfg.attack.epsilon = 0.25;
  cfg.attack.steps = 2;
  cfg.seed = 11;

  FeatureExtractor ext =
      pretrain_extractor("mlp[2,16,16]", in, cfg, "robust features");
  CHECK(ext.valid());
  CHECK(ext.output_dim() == 16);
  CHECK(ext.provenance() == "robust features");

  Tensor x = testsup::random_tensor({5, 2}, 930);
  Tensor f1 = ext.features(x);
  const auto h = ext.params_hash();
  Tensor f2 = ext.features(x);
  CHECK(ext.params_hash() == h);  // forward passes never move parameters
  for (std::size_t i = 0; i < f1.size(); ++i) CHECK(f1[i] == f2[i]);
}

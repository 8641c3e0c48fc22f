#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/attacks.hpp"
#include "core/model_kit.hpp"
#include "core/tensor.hpp"

namespace atdkit {

// --- class-conditional Gaussian fit ---

// Per-class means with one covariance pooled across classes (scatter around
// each sample's own class mean, divided by the total count), plus a single
// background Gaussian over all samples ignoring labels. Solves go through a
// Cholesky factorization of the ridge-stabilized covariance; no inverse is
// ever formed.
struct GaussianBank {
  Eigen::MatrixXd means;  // K x d
  Eigen::VectorXd mean0;  // d
  Eigen::MatrixXd cov;    // pooled within-class, before the ridge
  Eigen::MatrixXd cov0;   // label-free, before the ridge
  Eigen::LLT<Eigen::MatrixXd> chol;   // of cov + lambda * I
  Eigen::LLT<Eigen::MatrixXd> chol0;  // of cov0 + lambda0 * I
  double lambda = 0.0;
  double lambda0 = 0.0;
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::size_t fitted_on = 0;
};

// lambda_rel scales the ridge: lambda = lambda_rel * trace(cov) / dim.
GaussianBank fit_gaussian_bank(const Tensor& features,
                               std::span<const int> labels,
                               std::size_t classes,
                               double lambda_rel = 1e-6);

// Round-trips are exact: the stored matrices are refactorized on load, which
// reproduces the original solves bit for bit.
nlohmann::json gaussian_bank_to_json(const GaussianBank& bank);
GaussianBank gaussian_bank_from_json(const nlohmann::json& j);

// Squared Mahalanobis distance to class k under the shared covariance.
double md_class(const GaussianBank& bank, std::span<const double> z,
                std::size_t k);
std::vector<double> md_all(const GaussianBank& bank, std::span<const double> z);
double md_background(const GaussianBank& bank, std::span<const double> z);

// --- extreme-value recalibration ---

struct WeibullTail {
  double shape = 1.0;
  double scale = 1.0;
  double shift = 0.0;
};

// Per-class mean activation vectors over correctly classified fit samples,
// with a Weibull fit on the largest distances to each mean.
struct WeibullBank {
  Eigen::MatrixXd mav;  // K x K (activation space = logit space)
  std::vector<WeibullTail> tails;
  std::size_t classes = 0;
  int alpha_top = 0;
  int tail_size = 0;
  bool fitted = false;
};

// alpha_top < 0 selects min(3, classes).
WeibullBank fit_weibull_bank(const Tensor& logits, std::span<const int> labels,
                             std::size_t classes, int tail_size = 20,
                             int alpha_top = -1);

double weibull_cdf(const WeibullTail& tail, double distance);

nlohmann::json weibull_bank_to_json(const WeibullBank& bank);
WeibullBank weibull_bank_from_json(const nlohmann::json& j);

// Probabilities over K+1 outcomes; index 0 is the unknown bucket.
std::vector<double> openmax_probs(const WeibullBank& bank,
                                  std::span<const double> logits);

// --- detection scores ---

// A detection score maps inputs to per-sample reals, higher = more
// in-distribution. Attacks differentiate `objective_grad`, whose values are
// monotone in the reported score but may live on a better-behaved surface
// (raw logits instead of saturated probabilities); `attack_surface` names it.
// Scoring requires the wrapped models to be in eval mode: detection must
// never run in training mode, where batch-statistics layers (none here, by
// construction) could leak batch composition into per-sample outputs.
class ScoreFunction {
public:
  virtual ~ScoreFunction() = default;
  virtual std::string kind() const = 0;
  virtual std::vector<double> score(const Tensor& x) = 0;
  virtual ObjectiveEval objective_grad(const Tensor& x) = 0;
  virtual std::string attack_surface() const { return "score"; }
};

// Maximum softmax probability.
class MspScore final : public ScoreFunction {
public:
  explicit MspScore(ClassifierModel& model) : model_(model) {}
  std::string kind() const override { return "msp"; }
  std::vector<double> score(const Tensor& x) override;
  ObjectiveEval objective_grad(const Tensor& x) override;

private:
  ClassifierModel& model_;
};

// Negated minimum class-conditional Mahalanobis distance in feature space.
class MdScore final : public ScoreFunction {
public:
  MdScore(ClassifierModel& model, GaussianBank bank)
      : model_(model), bank_(std::move(bank)) {}
  std::string kind() const override { return "md"; }
  std::vector<double> score(const Tensor& x) override;
  ObjectiveEval objective_grad(const Tensor& x) override;
  std::string attack_surface() const override {
    return "score (achieving-class subgradient)";
  }
  const GaussianBank& bank() const { return bank_; }

private:
  ClassifierModel& model_;
  GaussianBank bank_;
};

// Background-relative variant: subtracts the label-free Mahalanobis distance
// before taking the minimum.
class RmdScore final : public ScoreFunction {
public:
  RmdScore(ClassifierModel& model, GaussianBank bank)
      : model_(model), bank_(std::move(bank)) {}
  std::string kind() const override { return "rmd"; }
  std::vector<double> score(const Tensor& x) override;
  ObjectiveEval objective_grad(const Tensor& x) override;
  std::string attack_surface() const override {
    return "score (achieving-class subgradient)";
  }

private:
  ClassifierModel& model_;
  GaussianBank bank_;
};

// One minus the recalibrated unknown-class probability.
class OpenMaxScore final : public ScoreFunction {
public:
  OpenMaxScore(ClassifierModel& model, WeibullBank bank)
      : model_(model), bank_(std::move(bank)) {}
  std::string kind() const override { return "openmax"; }
  std::vector<double> score(const Tensor& x) override;
  // Surrogate: max softmax over the raw logits, before recalibration. The
  // recalibration itself is piecewise in the sort order and the tail CDFs
  // saturate; the surrogate is smooth and monotone in the same direction.
  ObjectiveEval objective_grad(const Tensor& x) override;
  std::string attack_surface() const override { return "pre-recalibration msp"; }

private:
  ClassifierModel& model_;
  WeibullBank bank_;
};

// Sigmoid of a binary discriminator over extracted features (or raw inputs
// when no extractor is attached). Attacks target the raw logit so gradients
// survive sigmoid saturation.
class DiscriminatorScore final : public ScoreFunction {
public:
  DiscriminatorScore(FeatureExtractor* extractor, Discriminator& disc)
      : extractor_(extractor), disc_(disc) {}
  std::string kind() const override { return "discriminator"; }
  std::vector<double> score(const Tensor& x) override;
  ObjectiveEval objective_grad(const Tensor& x) override;
  std::string attack_surface() const override { return "discriminator logit"; }

private:
  FeatureExtractor* extractor_;  // nullable
  Discriminator& disc_;
};

// Raw-logit objective over a discriminator, optionally through a frozen
// extractor. Shared by DiscriminatorScore and by training loops that attack
// a discriminator still in training mode.
ObjectiveEval discriminator_logit_objective(FeatureExtractor* extractor,
                                            Discriminator& disc,
                                            const Tensor& x);

// --- attack entry points over scores and classifiers ---

// Which side of the detection threshold the attacked samples belong to.
// In-distribution samples are pushed toward lower scores, out-of-distribution
// samples toward higher ones; both directions make detection harder.
enum class DetectorRole { In, Out };

Tensor attack_score_pgd(ScoreFunction& fn, const Tensor& x,
                        const AttackConfig& cfg, DetectorRole role,
                        std::uint64_t seed, AttackTrace* trace = nullptr);
Tensor attack_score_fgsm(ScoreFunction& fn, const Tensor& x, double epsilon,
                         const std::optional<ClampRange>& clamp,
                         DetectorRole role);

// Untargeted classification attack: maximizes cross-entropy against the
// given labels. When labels are absent the model's own clean predictions
// stand in (used for unlabeled sets).
Tensor attack_classifier_ce(ClassifierModel& model, const Tensor& x,
                            std::span<const int> labels,
                            const AttackConfig& cfg, std::uint64_t seed);
Tensor attack_classifier_ce_predicted(ClassifierModel& model, const Tensor& x,
                                      const AttackConfig& cfg,
                                      std::uint64_t seed);

}  // namespace atdkit

#include "core/training.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/losses.hpp"
#include "core/scores.hpp"

namespace atdkit {

void OptimizerSpec::validate() const {
  require(kind == "adam" || kind == "sgd", ErrorCode::Config,
          "optimizer.kind: unknown '", kind, "'");
  require(lr > 0.0 && std::isfinite(lr), ErrorCode::Config,
          "optimizer.lr: must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::Config,
          "optimizer.momentum: must be in [0, 1)");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          ErrorCode::Config, "optimizer.betas: must be in [0, 1)");
  require(eps > 0.0, ErrorCode::Config, "optimizer.eps: must be > 0");
}

namespace {

class SgdOptimizer final : public Optimizer {
public:
  SgdOptimizer(const OptimizerSpec& spec, std::vector<Tensor*> params,
               std::vector<Tensor*> grads)
      : spec_(spec), params_(std::move(params)), grads_(std::move(grads)) {
    for (Tensor* p : params_) velocity_.emplace_back(p->shape());
  }

  void step() override {
    for (std::size_t t = 0; t < params_.size(); ++t) {
      Tensor& p = *params_[t];
      const Tensor& g = *grads_[t];
      Tensor& v = velocity_[t];
      for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = spec_.momentum * v[i] + g[i];
        p[i] -= spec_.lr * v[i];
      }
    }
  }

private:
  OptimizerSpec spec_;
  std::vector<Tensor*> params_;
  std::vector<Tensor*> grads_;
  std::vector<Tensor> velocity_;
};

class AdamOptimizer final : public Optimizer {
public:
  AdamOptimizer(const OptimizerSpec& spec, std::vector<Tensor*> params,
                std::vector<Tensor*> grads)
      : spec_(spec), params_(std::move(params)), grads_(std::move(grads)) {
    for (Tensor* p : params_) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }

  void step() override {
    ++t_;
    const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
    for (std::size_t t = 0; t < params_.size(); ++t) {
      Tensor& p = *params_[t];
      const Tensor& g = *grads_[t];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m_[t][i] = spec_.beta1 * m_[t][i] + (1.0 - spec_.beta1) * g[i];
        v_[t][i] = spec_.beta2 * v_[t][i] + (1.0 - spec_.beta2) * g[i] * g[i];
        const double mhat = m_[t][i] / bc1;
        const double vhat = v_[t][i] / bc2;
        p[i] -= spec_.lr * mhat / (std::sqrt(vhat) + spec_.eps);
      }
    }
  }

private:
  OptimizerSpec spec_;
  std::vector<Tensor*> params_;
  std::vector<Tensor*> grads_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace

std::unique_ptr<Optimizer> Optimizer::create(const OptimizerSpec& spec,
                                             std::vector<Tensor*> params,
                                             std::vector<Tensor*> grads) {
  spec.validate();
  require(params.size() == grads.size(), ErrorCode::Contract,
          "optimizer: param/grad count mismatch");
  if (spec.kind == "sgd") {
    return std::make_unique<SgdOptimizer>(spec, std::move(params),
                                          std::move(grads));
  }
  return std::make_unique<AdamOptimizer>(spec, std::move(params),
                                         std::move(grads));
}

const char* objective_name(TrainObjective objective) {
  switch (objective) {
    case TrainObjective::Standard: return "standard";
    case TrainObjective::AT: return "at";
    case TrainObjective::AOE: return "aoe";
    case TrainObjective::ALOE: return "aloe";
  }
  return "?";
}

TrainObjective objective_from_name(const std::string& name) {
  if (name == "standard") return TrainObjective::Standard;
  if (name == "at") return TrainObjective::AT;
  if (name == "aoe") return TrainObjective::AOE;
  if (name == "aloe") return TrainObjective::ALOE;
  raise(ErrorCode::Config, "training.objective: unknown '", name, "'");
}

void TrainConfig::validate() const {
  require(epochs >= 0, ErrorCode::Config, "training.epochs: must be >= 0");
  require(batch_size >= 1, ErrorCode::Config,
          "training.batch_size: must be >= 1");
  require(lambda_outlier >= 0.0 && std::isfinite(lambda_outlier),
          ErrorCode::Config, "training.lambda_outlier: must be >= 0");
  optimizer.validate();
  attack.validate();
}

TrainHistory train_classifier(ClassifierModel& model,
                              const SampleBatch& in_train,
                              const SampleBatch* out_exposure,
                              const TrainConfig& cfg) {
  cfg.validate();
  require(in_train.labeled(), ErrorCode::Contract,
          "training: in-distribution set needs labels");
  const bool wants_outliers =
      (cfg.objective == TrainObjective::AOE ||
       cfg.objective == TrainObjective::ALOE) &&
      cfg.lambda_outlier != 0.0;
  require(!wants_outliers || (out_exposure && out_exposure->size() > 0),
          ErrorCode::Config,
          "training: outlier-exposure objective without an out-exposure set");
  const bool attack_inputs = cfg.objective != TrainObjective::Standard;

  TrainHistory history;
  if (cfg.epochs == 0) {
    model.set_training(false);
    return history;
  }

  model.set_training(true);
  auto optimizer =
      Optimizer::create(cfg.optimizer, model.params(), model.param_grads());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle_in =
        RngStream::derive(cfg.seed, "shuffle-in", static_cast<std::uint64_t>(epoch));
    const std::vector<SampleBatch> batches =
        make_batches(in_train, static_cast<std::size_t>(cfg.batch_size),
                     &shuffle_in);

    std::vector<SampleBatch> out_batches;
    std::size_t out_cursor = 0;
    if (wants_outliers) {
      RngStream shuffle_out = RngStream::derive(
          cfg.seed, "shuffle-out", static_cast<std::uint64_t>(epoch));
      out_batches = make_batches(
          *out_exposure, static_cast<std::size_t>(cfg.batch_size), &shuffle_out);
    }

    double loss_acc = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const SampleBatch& batch = batches[bi];
      const std::uint64_t step_id =
          static_cast<std::uint64_t>(epoch) * 1000000ULL + bi;

      Tensor inputs = batch.inputs;
      if (attack_inputs) {
        inputs = attack_classifier_ce(model, batch.inputs, batch.labels,
                                      cfg.attack,
                                      mix_seed(cfg.seed, "attack-in", step_id));
        ++history.attacks_on_in;
      }

      Tensor out_inputs;
      if (wants_outliers) {
        const SampleBatch& ob = out_batches[out_cursor];
        out_cursor = (out_cursor + 1) % out_batches.size();
        if (cfg.objective == TrainObjective::ALOE) {
          // Push outliers away from the uniform prediction the loss asks for.
          auto objective = [&model](const Tensor& v) {
            Tensor logits = model.logits(v);
            loss::PerSampleLossGrad per = loss::ce_uniform_per_sample(logits);
            ObjectiveEval out;
            out.values = std::move(per.values);
            out.grad = model.backward_from_logits(per.grad);
            out.grad =
                out.grad.reshaped({v.batch(), out.grad.size() / v.batch()});
            return out;
          };
          out_inputs = pgd(
              ob.inputs.reshaped({ob.inputs.batch(), ob.inputs.sample_size()}),
              objective, Direction::Maximize, cfg.attack,
              mix_seed(cfg.seed, "attack-out", step_id));
          ++history.attacks_on_out;
        } else {
          out_inputs = ob.inputs;
        }
      }

      model.zero_grads();
      Tensor logits = model.logits(inputs);
      loss::LossGrad main = loss::ce_labels(logits, batch.labels);
      model.backward_from_logits(main.grad);
      double total = main.value;

      if (wants_outliers) {
        Tensor out_logits = model.logits(out_inputs);
        loss::LossGrad unif = loss::ce_uniform(out_logits);
        for (std::size_t i = 0; i < unif.grad.size(); ++i) {
          unif.grad[i] *= cfg.lambda_outlier;
        }
        model.backward_from_logits(unif.grad);
        total += cfg.lambda_outlier * unif.value;
      }

      require(std::isfinite(total), ErrorCode::Numeric,
              "training: non-finite loss at epoch ", epoch, " step ", bi);
      optimizer->step();
      ++history.optimizer_steps;
      loss_acc += total;
    }

    model.set_training(false);
    const double acc = loss::accuracy(model.logits(in_train.inputs),
                                      in_train.labels);
    model.set_training(true);
    history.epochs.push_back(
        {epoch, loss_acc / static_cast<double>(batches.size()), acc});
  }

  model.set_training(false);
  return history;
}

FeatureExtractor pretrain_extractor(const std::string& arch,
                                    const SampleBatch& in_train,
                                    const TrainConfig& cfg,
                                    const std::string& provenance) {
  require(in_train.labeled(), ErrorCode::Contract,
          "pretrain: in-distribution set needs labels");
  int hi = 0;
  for (int y : in_train.labels) hi = std::max(hi, y);
  RngStream init = RngStream::derive(cfg.seed, "init");
  ClassifierModel model =
      build_classifier(arch, static_cast<std::size_t>(hi + 1), init);
  train_classifier(model, in_train, nullptr, cfg);
  return FeatureExtractor::strip_head(model, provenance);
}

}  // namespace atdkit

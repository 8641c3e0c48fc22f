#include "core/toy_lab.hpp"

#include <cmath>
#include <fstream>

#include "core/errors.hpp"
#include "core/evaluation.hpp"
#include "core/losses.hpp"
#include "core/scores.hpp"
#include "core/textio.hpp"

namespace atdkit {

void ToyRunConfig::validate() const {
  require(epsilon > 0.0, ErrorCode::Config, "toy.epsilon: must be > 0");
  require(epochs >= 1, ErrorCode::Config, "toy.epochs: must be >= 1");
  require(batch_size >= 1, ErrorCode::Config, "toy.batch_size: must be >= 1");
  require(n_per_rect >= 1, ErrorCode::Config, "toy.n_per_rect: must be >= 1");
  require(attack_steps >= 1, ErrorCode::Config, "toy.attack_steps: must be >= 1");
  require(grid_resolution >= 2, ErrorCode::Config,
          "toy.grid_resolution: must be >= 2");
  optimizer.validate();
}

namespace {

DecisionMap render_map(const ToyLayout& layout, std::size_t resolution,
                       const std::function<std::vector<double>(const Tensor&)>& prob) {
  DecisionMap map;
  map.resolution = resolution;
  map.bounds = layout.frame;
  map.values.reserve(resolution * resolution);
  const double dx = (layout.frame.hi_x - layout.frame.lo_x) /
                    static_cast<double>(resolution - 1);
  const double dy = (layout.frame.hi_y - layout.frame.lo_y) /
                    static_cast<double>(resolution - 1);
  Tensor row({resolution, 2});
  for (std::size_t iy = 0; iy < resolution; ++iy) {
    const double y = layout.frame.lo_y + dy * static_cast<double>(iy);
    for (std::size_t ix = 0; ix < resolution; ++ix) {
      row.row(ix)[0] = layout.frame.lo_x + dx * static_cast<double>(ix);
      row.row(ix)[1] = y;
    }
    const std::vector<double> values = prob(row);
    map.values.insert(map.values.end(), values.begin(), values.end());
  }
  return map;
}

}  // namespace

ToyRunResult run_toy(const ToyRunConfig& cfg) {
  cfg.validate();
  const ToyLayout layout = toy_layout(cfg.layout, cfg.epsilon);

  ToyRunResult result;
  result.in_points = sample_in_rects(layout, cfg.n_per_rect, cfg.seed,
                                     "toy-in", Role::InTrain);
  result.out_points = sample_out_rects(layout, cfg.n_per_rect, cfg.seed,
                                       "toy-out", Role::OutExposure);
  ToyResampler resampler(layout, cfg.seed);

  RngStream init = RngStream::derive(cfg.seed, "toy-init");
  result.disc = build_discriminator(2, cfg.d_hidden, init);
  Discriminator& disc = result.disc;
  auto optimizer =
      Optimizer::create(cfg.optimizer, disc.params(), disc.param_grads());

  AttackConfig attack;
  attack.epsilon = cfg.epsilon;
  attack.steps = cfg.attack_steps;
  attack.rand_init = true;
  attack.clamp.reset();  // the plane is unbounded

  auto logit_objective = [&disc](const Tensor& v) {
    return discriminator_logit_objective(nullptr, disc, v);
  };

  const std::size_t n_gen = result.in_points.size();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fresh pseudo-outliers each epoch.
    Tensor gen_points = resampler.sample(n_gen);
    SampleBatch gen_batchable;
    gen_batchable.inputs = std::move(gen_points);

    RngStream sh_in = RngStream::derive(cfg.seed, "toy-shuffle-in",
                                        static_cast<std::uint64_t>(epoch));
    RngStream sh_out = RngStream::derive(cfg.seed, "toy-shuffle-out",
                                         static_cast<std::uint64_t>(epoch));
    RngStream sh_gen = RngStream::derive(cfg.seed, "toy-shuffle-gen",
                                         static_cast<std::uint64_t>(epoch));
    const auto in_batches = make_batches(
        result.in_points, static_cast<std::size_t>(cfg.batch_size), &sh_in);
    const auto out_batches = make_batches(
        result.out_points, static_cast<std::size_t>(cfg.batch_size), &sh_out);
    const auto gen_batches = make_batches(
        gen_batchable, static_cast<std::size_t>(cfg.batch_size), &sh_gen);

    for (std::size_t bi = 0; bi < in_batches.size(); ++bi) {
      const std::uint64_t step_id =
          static_cast<std::uint64_t>(epoch) * 1000000ULL + bi;
      Tensor x_in = in_batches[bi].inputs;
      Tensor x_out = out_batches[bi % out_batches.size()].inputs;
      Tensor x_gen = gen_batches[bi % gen_batches.size()].inputs;
      if (cfg.toggles.attack_in) {
        x_in = pgd(x_in, logit_objective, Direction::Minimize, attack,
                   mix_seed(cfg.seed, "toy-attack-in", step_id));
      }
      if (cfg.toggles.attack_out) {
        x_out = pgd(x_out, logit_objective, Direction::Maximize, attack,
                    mix_seed(cfg.seed, "toy-attack-out", step_id));
      }
      if (cfg.toggles.attack_generated) {
        x_gen = pgd(x_gen, logit_objective, Direction::Maximize, attack,
                    mix_seed(cfg.seed, "toy-attack-gen", step_id));
      }

      Tensor all = concat_rows({&x_in, &x_out, &x_gen});
      disc.zero_grads();
      Tensor logit = disc.logit(all);
      const std::size_t n_in = x_in.batch(), n_out = x_out.batch(),
                        n_ge = x_gen.batch();
      Tensor glogit({logit.size()});
      double loss_value = 0.0;
      for (std::size_t i = 0; i < n_in; ++i) {
        loss_value -= loss::log_sigmoid(logit[i]) / static_cast<double>(n_in);
        glogit[i] = -(1.0 - loss::sigmoid(logit[i])) / static_cast<double>(n_in);
      }
      for (std::size_t i = 0; i < n_out + n_ge; ++i) {
        const std::size_t at = n_in + i;
        const double norm =
            static_cast<double>(i < n_out ? n_out : n_ge);
        loss_value -= loss::log_sigmoid(-logit[at]) / norm;
        glogit[at] = loss::sigmoid(logit[at]) / norm;
      }
      require(std::isfinite(loss_value), ErrorCode::Numeric,
              "toy: non-finite loss at epoch ", epoch, " step ", bi);
      disc.backward(glogit);
      optimizer->step();
    }
  }
  result.metrics.resampler_calls_during_training = resampler.calls();
  disc.set_training(false);

  // Metrics on the training points plus one held-out resample.
  Tensor gen_eval = resampler.sample(n_gen);
  auto frac = [](const std::vector<double>& sigma, bool above) {
    std::size_t hits = 0;
    for (double s : sigma) {
      if (above ? s > 0.5 : s < 0.5) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(sigma.size());
  };
  result.metrics.clean_acc_in = frac(disc.probability(result.in_points.inputs), true);
  result.metrics.clean_acc_out =
      frac(disc.probability(result.out_points.inputs), false);
  result.metrics.clean_acc_gen = frac(disc.probability(gen_eval), false);

  DiscriminatorScore score(nullptr, disc);
  Tensor in_adv =
      attack_score_pgd(score, result.in_points.inputs, attack, DetectorRole::In,
                       mix_seed(cfg.seed, "toy-eval-in"));
  Tensor out_adv = attack_score_pgd(score, result.out_points.inputs, attack,
                                    DetectorRole::Out,
                                    mix_seed(cfg.seed, "toy-eval-out"));
  const std::vector<double> sig_in = disc.probability(in_adv);
  const std::vector<double> sig_out = disc.probability(out_adv);
  result.metrics.robust_in_acc = frac(sig_in, true);
  result.metrics.robust_out_detect = frac(sig_out, false);
  result.metrics.robust_auroc_both = auroc(sig_in, sig_out);

  result.map = render_map(layout, cfg.grid_resolution, [&disc](const Tensor& x) {
    return disc.probability(x);
  });
  return result;
}

ToyAtMspResult run_toy_at_msp(const ToyAtMspConfig& cfg) {
  const ToyLayout layout = toy_layout(cfg.layout, cfg.epsilon);
  require(layout.num_classes() >= 2, ErrorCode::Config,
          "toy-at-msp: layout needs >= 2 classes");

  SampleBatch in_points = sample_in_rects(layout, cfg.n_per_rect, cfg.seed,
                                          "toy-in", Role::InTrain);
  SampleBatch out_points = sample_out_rects(layout, cfg.n_per_rect, cfg.seed,
                                            "toy-out", Role::OutTest);

  RngStream init = RngStream::derive(cfg.seed, "toy-at-init");
  ToyAtMspResult result;
  result.model = build_classifier(cfg.arch, layout.num_classes(), init);

  TrainConfig train;
  train.objective = TrainObjective::AT;
  train.epochs = cfg.epochs;
  train.batch_size = cfg.batch_size;
  train.optimizer = cfg.optimizer;
  train.attack.epsilon = cfg.epsilon;
  train.attack.steps = cfg.train_attack_steps;
  train.attack.rand_init = true;
  train.attack.clamp.reset();
  train.seed = cfg.seed;
  train_classifier(result.model, in_points, nullptr, train);

  MspScore score(result.model);
  AttackConfig eval_attack;
  eval_attack.epsilon = cfg.epsilon;
  eval_attack.steps = cfg.eval_attack_steps;
  eval_attack.rand_init = true;
  eval_attack.clamp.reset();

  result.clean_auroc =
      auroc(score.score(in_points.inputs), score.score(out_points.inputs));
  Tensor in_adv = attack_score_pgd(score, in_points.inputs, eval_attack,
                                   DetectorRole::In,
                                   mix_seed(cfg.seed, "toy-at-eval-in"));
  Tensor out_adv = attack_score_pgd(score, out_points.inputs, eval_attack,
                                    DetectorRole::Out,
                                    mix_seed(cfg.seed, "toy-at-eval-out"));
  result.robust_auroc_both = auroc(score.score(in_adv), score.score(out_adv));

  result.map = render_map(layout, cfg.grid_resolution,
                          [&score](const Tensor& x) { return score.score(x); });
  return result;
}

void write_decision_map_csv(const DecisionMap& map,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "decision map: cannot write ",
          path.string());
  out << "x,y,value\n";
  const double dx = (map.bounds.hi_x - map.bounds.lo_x) /
                    static_cast<double>(map.resolution - 1);
  const double dy = (map.bounds.hi_y - map.bounds.lo_y) /
                    static_cast<double>(map.resolution - 1);
  for (std::size_t iy = 0; iy < map.resolution; ++iy) {
    for (std::size_t ix = 0; ix < map.resolution; ++ix) {
      const double x = map.bounds.lo_x + dx * static_cast<double>(ix);
      const double y = map.bounds.lo_y + dy * static_cast<double>(iy);
      out << format_double(x) << ',' << format_double(y) << ','
          << format_double(map.values[iy * map.resolution + ix]) << '\n';
    }
  }
  require(out.good(), ErrorCode::Io, "decision map: write failed for ",
          path.string());
}

}  // namespace atdkit

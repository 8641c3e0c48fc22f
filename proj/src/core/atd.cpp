#include "core/atd.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "core/errors.hpp"
#include "core/evaluation.hpp"
#include "core/losses.hpp"

namespace atdkit {

using nlohmann::json;

const char* atd_mode_name(AtdMode mode) {
  return mode == AtdMode::Feature ? "feature" : "pixel";
}

AtdMode atd_mode_from_name(const std::string& name) {
  if (name == "feature") return AtdMode::Feature;
  if (name == "pixel") return AtdMode::Pixel;
  raise(ErrorCode::Config, "atd.mode: unknown '", name, "'");
}

void AtdConfig::validate() const {
  require(alpha_mix >= 0.0 && alpha_mix <= 1.0, ErrorCode::Config,
          "atd.alpha_mix: must be in [0, 1]");
  require(epochs >= 0, ErrorCode::Config, "atd.epochs: must be >= 0");
  require(batch_size >= 1, ErrorCode::Config, "atd.batch_size: must be >= 1");
  require(latent_dim >= 1, ErrorCode::Config, "atd.latent_dim: must be >= 1");
  d_optimizer.validate();
  g_optimizer.validate();
  attack.validate();
}

DiscriminatorScore AtdBundle::score() {
  return DiscriminatorScore(
      mode == AtdMode::Feature && extractor.valid() ? &extractor : nullptr,
      disc);
}

namespace {

double stable_sigmoid(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                  : std::exp(v) / (1.0 + std::exp(v));
}

double run_validation(AtdBundle& bundle, const SampleBatch& val_in,
                      const SampleBatch& val_out) {
  bundle.disc.set_training(false);
  DiscriminatorScore score = bundle.score();
  const std::vector<double> s_in = score.score(val_in.inputs);
  const std::vector<double> s_out = score.score(val_out.inputs);
  bundle.disc.set_training(true);
  return auroc(s_in, s_out);
}

}  // namespace

AtdBundle train_atd(FeatureExtractor extractor, const SampleBatch& in_train,
                    const SampleBatch* out_exposure,
                    const SampleBatch& val_in, const SampleBatch& val_out,
                    const AtdConfig& cfg) {
  cfg.validate();
  require(in_train.size() > 0, ErrorCode::Contract, "atd: empty in-train set");
  require(val_in.size() > 0 && val_out.size() > 0, ErrorCode::Config,
          "atd: validation needs non-empty in and out sets");
  const bool use_real_outliers = cfg.alpha_mix > 0.0;
  const bool use_generated = cfg.alpha_mix < 1.0;
  require(!use_real_outliers || (out_exposure && out_exposure->size() > 0),
          ErrorCode::Config,
          "atd: alpha_mix > 0 requires an outlier-exposure set");

  AtdBundle bundle;
  bundle.mode = cfg.mode;
  std::size_t disc_input = 0;
  if (cfg.mode == AtdMode::Feature) {
    require(extractor.valid(), ErrorCode::Config,
            "atd: feature mode requires a feature extractor");
    bundle.extractor = std::move(extractor);
    disc_input = bundle.extractor.output_dim();
  } else {
    disc_input = in_train.inputs.sample_size();
  }
  bundle.extractor_hash_before =
      bundle.extractor.valid() ? bundle.extractor.params_hash() : 0;

  AttackConfig attack = cfg.attack;
  if (in_train.pixel_space && !attack.clamp) attack.clamp = ClampRange{0.0, 1.0};

  RngStream init_d = RngStream::derive(cfg.seed, "atd-init-d");
  RngStream init_g = RngStream::derive(cfg.seed, "atd-init-g");
  bundle.disc = build_discriminator(disc_input, cfg.d_hidden, init_d);
  const bool bounded_gen = cfg.mode == AtdMode::Pixel && in_train.pixel_space;
  bundle.gen = build_generator(cfg.latent_dim, cfg.g_hidden, disc_input,
                               bounded_gen, init_g);

  FeatureExtractor* fx =
      cfg.mode == AtdMode::Feature ? &bundle.extractor : nullptr;
  auto embed = [&](const Tensor& x) {
    Tensor z = fx ? fx->features(x) : x;
    return z.reshaped({z.batch(), z.size() / z.batch()});
  };

  auto d_optimizer = Optimizer::create(cfg.d_optimizer, bundle.disc.params(),
                                       bundle.disc.param_grads());
  auto g_optimizer = Optimizer::create(cfg.g_optimizer, bundle.gen.params(),
                                       bundle.gen.param_grads());
  RngStream latent = RngStream::derive(cfg.seed, "atd-latent");

  std::vector<double> best_params;
  auto record_if_best = [&](double val, int epoch) {
    if (val > bundle.best.val_auroc) {
      bundle.best.val_auroc = val;
      bundle.best.epoch = epoch;
      best_params = flatten_values(bundle.disc.params());
      return true;
    }
    return false;
  };

  const std::size_t bs =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                            in_train.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle_in = RngStream::derive(cfg.seed, "atd-shuffle-in",
                                             static_cast<std::uint64_t>(epoch));
    const std::vector<SampleBatch> in_batches =
        make_batches(in_train, bs, &shuffle_in);

    std::vector<SampleBatch> out_batches;
    std::size_t out_cursor = 0;
    if (use_real_outliers) {
      RngStream shuffle_out = RngStream::derive(
          cfg.seed, "atd-shuffle-out", static_cast<std::uint64_t>(epoch));
      out_batches = make_batches(*out_exposure, bs, &shuffle_out);
    }

    AtdEpochStats stats;
    stats.epoch = epoch;
    double sigma_in_acc = 0.0, sigma_gen_acc = 0.0;
    std::size_t sigma_in_n = 0, sigma_gen_n = 0;

    for (std::size_t bi = 0; bi < in_batches.size(); ++bi) {
      const std::uint64_t step_id =
          static_cast<std::uint64_t>(epoch) * 1000000ULL + bi;
      const SampleBatch& in_batch = in_batches[bi];

      auto disc_objective = [&](const Tensor& v) {
        return discriminator_logit_objective(fx, bundle.disc, v);
      };

      // Inner attacks on the real data; the score is pushed down on the
      // in side and up on the out side.
      Tensor x_in = in_batch.inputs;
      if (cfg.adversarial_training && attack.epsilon > 0.0) {
        x_in = pgd(in_batch.inputs.reshaped(
                       {in_batch.inputs.batch(), in_batch.inputs.sample_size()}),
                   disc_objective, Direction::Minimize, attack,
                   mix_seed(cfg.seed, "atd-attack-in", step_id));
        ++bundle.history.attacks_on_in;
      }
      Tensor f_in = embed(x_in);

      Tensor f_out;
      if (use_real_outliers) {
        const SampleBatch& ob = out_batches[out_cursor];
        out_cursor = (out_cursor + 1) % out_batches.size();
        Tensor x_out = ob.inputs;
        if (cfg.adversarial_training && attack.epsilon > 0.0) {
          x_out = pgd(
              ob.inputs.reshaped({ob.inputs.batch(), ob.inputs.sample_size()}),
              disc_objective, Direction::Maximize, attack,
              mix_seed(cfg.seed, "atd-attack-out", step_id));
          ++bundle.history.attacks_on_out;
        }
        f_out = embed(x_out);
      }

      Tensor f_gen;
      if (use_generated) {
        Tensor z({in_batch.inputs.batch(), cfg.latent_dim});
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = latent.normal();
        f_gen = bundle.gen.forward(z);  // constants for the D step
        if (cfg.attack_generated) {
          // Ablation: treat generated samples like attackable outliers in
          // the discriminator's input space.
          auto gen_objective = [&](const Tensor& v) {
            return discriminator_logit_objective(nullptr, bundle.disc, v);
          };
          AttackConfig gen_attack = attack;
          if (cfg.mode == AtdMode::Feature) gen_attack.clamp.reset();
          f_gen = pgd(f_gen, gen_objective, Direction::Maximize, gen_attack,
                      mix_seed(cfg.seed, "atd-attack-gen", step_id));
          ++bundle.history.attacks_on_generated;
        }
      }

      // Discriminator ascent on the mixed objective, one concatenated
      // forward so backward pairing holds.
      std::vector<const Tensor*> parts{&f_in};
      if (use_real_outliers) parts.push_back(&f_out);
      if (use_generated) parts.push_back(&f_gen);
      Tensor f_all = concat_rows(parts);
      bundle.disc.zero_grads();
      Tensor logit = bundle.disc.logit(f_all);

      const std::size_t n_in = f_in.batch();
      const std::size_t n_out = use_real_outliers ? f_out.batch() : 0;
      const std::size_t n_gen = use_generated ? f_gen.batch() : 0;
      Tensor glogit({logit.size()});
      double d_loss = 0.0;
      for (std::size_t i = 0; i < n_in; ++i) {
        d_loss -= loss::log_sigmoid(logit[i]) / static_cast<double>(n_in);
        glogit[i] = -(1.0 - stable_sigmoid(logit[i])) / static_cast<double>(n_in);
        sigma_in_acc += stable_sigmoid(logit[i]);
      }
      sigma_in_n += n_in;
      for (std::size_t i = 0; i < n_out; ++i) {
        const double l = logit[n_in + i];
        // log(1 - sigmoid(l)) = log_sigmoid(-l)
        d_loss -= cfg.alpha_mix * loss::log_sigmoid(-l) /
                  static_cast<double>(n_out);
        glogit[n_in + i] =
            cfg.alpha_mix * stable_sigmoid(l) / static_cast<double>(n_out);
      }
      for (std::size_t i = 0; i < n_gen; ++i) {
        const double l = logit[n_in + n_out + i];
        d_loss -= (1.0 - cfg.alpha_mix) * loss::log_sigmoid(-l) /
                  static_cast<double>(n_gen);
        glogit[n_in + n_out + i] = (1.0 - cfg.alpha_mix) * stable_sigmoid(l) /
                                   static_cast<double>(n_gen);
        sigma_gen_acc += stable_sigmoid(l);
      }
      sigma_gen_n += n_gen;
      require(std::isfinite(d_loss), ErrorCode::Numeric,
              "atd: non-finite discriminator loss at epoch ", epoch, " step ",
              bi);
      bundle.disc.backward(glogit);
      d_optimizer->step();
      ++bundle.history.d_steps;
      stats.d_loss += d_loss;

      // Generator step against the updated discriminator, fresh latents,
      // non-saturating surrogate.
      Tensor z2({in_batch.inputs.batch(), cfg.latent_dim});
      for (std::size_t i = 0; i < z2.size(); ++i) z2[i] = latent.normal();
      bundle.gen.zero_grads();
      bundle.disc.zero_grads();
      Tensor f_g2 = bundle.gen.forward(z2);
      Tensor logit_g = bundle.disc.logit(f_g2);
      double g_loss = 0.0;
      Tensor glogit_g({logit_g.size()});
      for (std::size_t i = 0; i < logit_g.size(); ++i) {
        g_loss -= loss::log_sigmoid(logit_g[i]) /
                  static_cast<double>(logit_g.size());
        glogit_g[i] = -(1.0 - stable_sigmoid(logit_g[i])) /
                      static_cast<double>(logit_g.size());
      }
      require(std::isfinite(g_loss), ErrorCode::Numeric,
              "atd: non-finite generator loss at epoch ", epoch, " step ", bi);
      Tensor gfeat = bundle.disc.backward(glogit_g);
      bundle.gen.backward(gfeat);
      g_optimizer->step();
      ++bundle.history.g_steps;
      stats.g_loss += g_loss;
    }

    stats.d_loss /= static_cast<double>(in_batches.size());
    stats.g_loss /= static_cast<double>(in_batches.size());
    stats.mean_sigma_in =
        sigma_in_n ? sigma_in_acc / static_cast<double>(sigma_in_n) : 0.0;
    stats.mean_sigma_gen =
        sigma_gen_n ? sigma_gen_acc / static_cast<double>(sigma_gen_n) : 0.0;
    stats.val_auroc = run_validation(bundle, val_in, val_out);
    stats.improved = record_if_best(stats.val_auroc, epoch);
    bundle.history.epochs.push_back(stats);
  }

  if (cfg.epochs == 0) {
    record_if_best(run_validation(bundle, val_in, val_out), -1);
  }

  assign_values(bundle.disc.params(), best_params);
  bundle.disc.set_training(false);
  bundle.extractor_hash_after =
      bundle.extractor.valid() ? bundle.extractor.params_hash() : 0;
  require(bundle.extractor_hash_after == bundle.extractor_hash_before,
          ErrorCode::Contract, "atd: extractor parameters moved during training");
  return bundle;
}

void save_bundle(const AtdBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto& self = const_cast<AtdBundle&>(bundle);

  json manifest{
      {"schema_version", 1},
      {"mode", atd_mode_name(bundle.mode)},
      {"config_hash", bundle.config_hash},
      {"best", {{"val_auroc", bundle.best.val_auroc}, {"epoch", bundle.best.epoch}}},
      {"extractor_hash",
       bundle.extractor.valid() ? std::to_string(bundle.extractor_hash_after)
                                : ""},
      {"files", json::array({"discriminator.ckpt", "generator.ckpt"})},
  };

  Checkpoint d = snapshot(self.disc);
  d.metrics["val_auroc"] = bundle.best.val_auroc;
  d.step = static_cast<std::uint64_t>(std::max(0, bundle.best.epoch));
  d.config_hash = bundle.config_hash;
  write_checkpoint(d, dir / "discriminator.ckpt");

  Checkpoint g = snapshot(self.gen);
  g.config_hash = bundle.config_hash;
  write_checkpoint(g, dir / "generator.ckpt");

  if (bundle.extractor.valid()) {
    Checkpoint fx = snapshot(bundle.extractor);
    fx.config_hash = bundle.config_hash;
    write_checkpoint(fx, dir / "extractor.ckpt");
    manifest["files"].push_back("extractor.ckpt");
  }

  std::ofstream out(dir / "bundle.json");
  require(out.good(), ErrorCode::Io, "bundle: cannot write manifest in ",
          dir.string());
  out << manifest.dump(2) << "\n";
}

AtdBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream in(dir / "bundle.json");
  require(in.good(), ErrorCode::Io, "bundle: missing manifest in ", dir.string());
  json manifest = json::parse(in, nullptr, false);
  require(!manifest.is_discarded(), ErrorCode::Io,
          "bundle: unparseable manifest in ", dir.string());

  AtdBundle bundle;
  bundle.mode = atd_mode_from_name(manifest.at("mode").get<std::string>());
  bundle.config_hash = manifest.value("config_hash", "");
  bundle.best.val_auroc = manifest.at("best").at("val_auroc").get<double>();
  bundle.best.epoch = manifest.at("best").at("epoch").get<int>();
  bundle.disc = restore_discriminator(read_checkpoint(dir / "discriminator.ckpt"));
  bundle.disc.set_training(false);
  bundle.gen = restore_generator(read_checkpoint(dir / "generator.ckpt"));
  if (bundle.mode == AtdMode::Feature) {
    bundle.extractor = restore_extractor(read_checkpoint(dir / "extractor.ckpt"));
    bundle.extractor_hash_after = bundle.extractor.params_hash();
  }
  return bundle;
}

}  // namespace atdkit

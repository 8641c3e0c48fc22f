#include "core/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "core/errors.hpp"
#include "core/hash.hpp"
#include "core/rng.hpp"

namespace atdkit {

using nlohmann::json;

const char* run_kind_name(RunKind kind) {
  switch (kind) {
    case RunKind::Pretrain: return "pretrain";
    case RunKind::TrainBaseline: return "train-baseline";
    case RunKind::TrainAtd: return "train-atd";
    case RunKind::Evaluate: return "evaluate";
    case RunKind::Transfer: return "transfer";
    case RunKind::CrossAttack: return "cross-attack";
    case RunKind::Sweep: return "sweep";
    case RunKind::Toy: return "toy";
  }
  return "?";
}

RunKind run_kind_from_name(const std::string& name) {
  if (name == "pretrain") return RunKind::Pretrain;
  if (name == "train-baseline") return RunKind::TrainBaseline;
  if (name == "train-atd") return RunKind::TrainAtd;
  if (name == "evaluate") return RunKind::Evaluate;
  if (name == "transfer") return RunKind::Transfer;
  if (name == "cross-attack") return RunKind::CrossAttack;
  if (name == "sweep") return RunKind::Sweep;
  if (name == "toy") return RunKind::Toy;
  raise(ErrorCode::Config, "kind: unknown run kind '", name, "'");
}

namespace {

// Walks a JSON object with a dotted field path carried along, so every
// error names exactly where in the file the problem sits.
class Cursor {
public:
  Cursor(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorCode::Config, path_, ": expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const char* key) const { return j_.contains(key); }

  Cursor sub(const char* key) const {
    return Cursor(member(key), join(key));
  }

  // Rejects keys outside the documented schema; a typo must fail loudly
  // instead of silently falling back to a default.
  void allow(std::initializer_list<const char*> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      const bool known = std::any_of(keys.begin(), keys.end(),
                                     [&](const char* k) { return it.key() == k; });
      require(known, ErrorCode::Config, join(it.key().c_str()),
              ": unknown field");
    }
  }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = member(key);
    require(v.is_number(), ErrorCode::Config, join(key), ": expected a number");
    return v.get<double>();
  }

  int integer(const char* key, int fallback) const {
    if (!has(key)) return fallback;
    const json& v = member(key);
    require(v.is_number_integer(), ErrorCode::Config, join(key),
            ": expected an integer");
    return v.get<int>();
  }

  std::uint64_t uinteger(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = member(key);
    require(v.is_number_unsigned() ||
                (v.is_number_integer() && v.get<long long>() >= 0),
            ErrorCode::Config, join(key), ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = member(key);
    require(v.is_boolean(), ErrorCode::Config, join(key), ": expected a bool");
    return v.get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = member(key);
    require(v.is_string(), ErrorCode::Config, join(key), ": expected a string");
    return v.get<std::string>();
  }

  std::string required_text(const char* key) const {
    require(has(key), ErrorCode::Config, join(key), ": required field missing");
    return text(key, "");
  }

  std::vector<std::size_t> size_list(const char* key,
                                     std::vector<std::size_t> fallback) const {
    if (!has(key)) return fallback;
    const json& v = member(key);
    require(v.is_array(), ErrorCode::Config, join(key),
            ": expected an array of sizes");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      require(e.is_number_integer() && e.get<long long>() >= 1,
              ErrorCode::Config, join(key), ": entries must be integers >= 1");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  std::vector<int> int_list(const char* key, std::vector<int> fallback) const {
    if (!has(key)) return fallback;
    const json& v = member(key);
    require(v.is_array(), ErrorCode::Config, join(key),
            ": expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      require(e.is_number_integer(), ErrorCode::Config, join(key),
              ": entries must be integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  std::optional<ClampRange> clamp(const char* key) const {
    if (!has(key)) return std::nullopt;
    const json& v = member(key);
    if (v.is_null()) return std::nullopt;
    require(v.is_array() && v.size() == 2 && v[0].is_number() &&
                v[1].is_number(),
            ErrorCode::Config, join(key), ": expected null or [lo, hi]");
    return ClampRange{v[0].get<double>(), v[1].get<double>()};
  }

  const json& raw(const char* key) const { return member(key); }

private:
  std::string join(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }
  const json& member(const char* key) const {
    require(j_.contains(key), ErrorCode::Config, join(key),
            ": required field missing");
    return j_.at(key);
  }

  const json& j_;
  std::string path_;
};

json clamp_to_json(const std::optional<ClampRange>& clamp) {
  if (!clamp) return nullptr;
  return json::array({clamp->lo, clamp->hi});
}

AttackConfig parse_attack(const Cursor& c, AttackConfig base) {
  c.allow({"epsilon", "steps", "step_size", "rand_init", "restarts", "clamp"});
  base.epsilon = c.number("epsilon", base.epsilon);
  base.steps = c.integer("steps", base.steps);
  base.step_size = c.number("step_size", base.step_size);
  base.rand_init = c.boolean("rand_init", base.rand_init);
  base.restarts = c.integer("restarts", base.restarts);
  if (c.has("clamp")) base.clamp = c.clamp("clamp");
  base.validate();
  return base;
}

json attack_to_json(const AttackConfig& a) {
  return json{{"epsilon", a.epsilon},     {"steps", a.steps},
              {"step_size", a.step_size}, {"rand_init", a.rand_init},
              {"restarts", a.restarts},   {"clamp", clamp_to_json(a.clamp)}};
}

OptimizerSpec parse_optimizer(const Cursor& c, OptimizerSpec base) {
  c.allow({"kind", "lr", "momentum", "beta1", "beta2", "eps"});
  base.kind = c.text("kind", base.kind);
  base.lr = c.number("lr", base.lr);
  base.momentum = c.number("momentum", base.momentum);
  base.beta1 = c.number("beta1", base.beta1);
  base.beta2 = c.number("beta2", base.beta2);
  base.eps = c.number("eps", base.eps);
  base.validate();
  return base;
}

json optimizer_to_json(const OptimizerSpec& o) {
  return json{{"kind", o.kind},   {"lr", o.lr},       {"momentum", o.momentum},
              {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}};
}

TrainConfig parse_train(const Cursor& c, TrainConfig base) {
  c.allow({"objective", "epochs", "batch_size", "lambda_outlier", "optimizer",
           "attack"});
  base.objective =
      objective_from_name(c.text("objective", objective_name(base.objective)));
  base.epochs = c.integer("epochs", base.epochs);
  base.batch_size = c.integer("batch_size", base.batch_size);
  base.lambda_outlier = c.number("lambda_outlier", base.lambda_outlier);
  if (c.has("optimizer")) base.optimizer = parse_optimizer(c.sub("optimizer"), base.optimizer);
  if (c.has("attack")) base.attack = parse_attack(c.sub("attack"), base.attack);
  base.validate();
  return base;
}

json train_to_json(const TrainConfig& t) {
  return json{{"objective", objective_name(t.objective)},
              {"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"lambda_outlier", t.lambda_outlier},
              {"optimizer", optimizer_to_json(t.optimizer)},
              {"attack", attack_to_json(t.attack)}};
}

AtdConfig parse_atd(const Cursor& c, AtdConfig base) {
  c.allow({"mode", "alpha_mix", "epochs", "batch_size", "latent_dim",
           "g_hidden", "d_hidden", "d_optimizer", "g_optimizer", "attack",
           "adversarial_training", "attack_generated", "robust_extractor"});
  base.mode = atd_mode_from_name(c.text("mode", atd_mode_name(base.mode)));
  base.alpha_mix = c.number("alpha_mix", base.alpha_mix);
  base.epochs = c.integer("epochs", base.epochs);
  base.batch_size = c.integer("batch_size", base.batch_size);
  base.latent_dim = c.uinteger("latent_dim", base.latent_dim);
  base.g_hidden = c.size_list("g_hidden", base.g_hidden);
  base.d_hidden = c.size_list("d_hidden", base.d_hidden);
  if (c.has("d_optimizer")) base.d_optimizer = parse_optimizer(c.sub("d_optimizer"), base.d_optimizer);
  if (c.has("g_optimizer")) base.g_optimizer = parse_optimizer(c.sub("g_optimizer"), base.g_optimizer);
  if (c.has("attack")) base.attack = parse_attack(c.sub("attack"), base.attack);
  base.adversarial_training =
      c.boolean("adversarial_training", base.adversarial_training);
  base.attack_generated = c.boolean("attack_generated", base.attack_generated);
  base.robust_extractor = c.boolean("robust_extractor", base.robust_extractor);
  base.validate();
  return base;
}

json atd_to_json(const AtdConfig& a) {
  return json{{"mode", atd_mode_name(a.mode)},
              {"alpha_mix", a.alpha_mix},
              {"epochs", a.epochs},
              {"batch_size", a.batch_size},
              {"latent_dim", a.latent_dim},
              {"g_hidden", a.g_hidden},
              {"d_hidden", a.d_hidden},
              {"d_optimizer", optimizer_to_json(a.d_optimizer)},
              {"g_optimizer", optimizer_to_json(a.g_optimizer)},
              {"attack", attack_to_json(a.attack)},
              {"adversarial_training", a.adversarial_training},
              {"attack_generated", a.attack_generated},
              {"robust_extractor", a.robust_extractor}};
}

ScoreSpec parse_score_spec(const Cursor& c) {
  c.allow({"kind", "classifier", "detector", "bundle"});
  ScoreSpec s;
  s.kind = c.required_text("kind");
  s.classifier = c.text("classifier", "");
  s.detector = c.text("detector", "");
  s.bundle = c.text("bundle", "");
  s.validate(c.path());
  return s;
}

json score_spec_to_json(const ScoreSpec& s) {
  return json{{"kind", s.kind},
              {"classifier", s.classifier},
              {"detector", s.detector},
              {"bundle", s.bundle}};
}

ExtractorSpec parse_extractor(const Cursor& c, ExtractorSpec base) {
  c.allow({"checkpoint", "arch", "epochs", "batch_size", "optimizer", "attack"});
  base.checkpoint = c.text("checkpoint", base.checkpoint);
  base.arch = c.text("arch", base.arch);
  base.epochs = c.integer("epochs", base.epochs);
  base.batch_size = c.integer("batch_size", base.batch_size);
  if (c.has("optimizer")) base.optimizer = parse_optimizer(c.sub("optimizer"), base.optimizer);
  if (c.has("attack")) base.attack = parse_attack(c.sub("attack"), base.attack);
  require(base.epochs >= 0, ErrorCode::Config, c.path(),
          ".epochs: must be >= 0");
  require(base.batch_size >= 1, ErrorCode::Config, c.path(),
          ".batch_size: must be >= 1");
  return base;
}

json extractor_to_json(const ExtractorSpec& e) {
  return json{{"checkpoint", e.checkpoint},
              {"arch", e.arch},
              {"epochs", e.epochs},
              {"batch_size", e.batch_size},
              {"optimizer", optimizer_to_json(e.optimizer)},
              {"attack", attack_to_json(e.attack)}};
}

DatasetSpec parse_dataset(const Cursor& c, std::uint64_t run_seed) {
  c.allow({"name", "role", "source", "params", "cap", "seed"});
  DatasetSpec d;
  d.name = c.required_text("name");
  require(!d.name.empty(), ErrorCode::Config, c.path(),
          ".name: must be non-empty");
  d.role = role_from_name(c.required_text("role"));
  d.source = c.required_text("source");
  if (c.has("params")) {
    const json& p = c.raw("params");
    require(p.is_object(), ErrorCode::Config, c.path(),
            ".params: expected an object");
    d.params = p;
  }
  if (c.has("cap")) {
    const json& cap = c.raw("cap");
    if (!cap.is_null()) {
      require(cap.is_number_integer() && cap.get<long long>() >= 1,
              ErrorCode::Config, c.path(), ".cap: expected null or integer >= 1");
      d.cap = cap.get<std::size_t>();
    }
  }
  d.seed = c.uinteger("seed", mix_seed(run_seed, "dataset/" + d.name));
  return d;
}

json dataset_to_json(const DatasetSpec& d) {
  return json{{"name", d.name},
              {"role", role_name(d.role)},
              {"source", d.source},
              {"params", d.params},
              {"cap", d.cap ? json(*d.cap) : json(nullptr)},
              {"seed", d.seed}};
}

ToyRunConfig parse_toy(const Cursor& c, ToyRunConfig base) {
  c.allow({"layout", "epsilon", "attack_in", "attack_out", "attack_generated",
           "epochs", "batch_size", "n_per_rect", "attack_steps", "optimizer",
           "d_hidden", "grid_resolution"});
  base.layout = c.text("layout", base.layout);
  base.epsilon = c.number("epsilon", base.epsilon);
  base.toggles.attack_in = c.boolean("attack_in", base.toggles.attack_in);
  base.toggles.attack_out = c.boolean("attack_out", base.toggles.attack_out);
  base.toggles.attack_generated =
      c.boolean("attack_generated", base.toggles.attack_generated);
  base.epochs = c.integer("epochs", base.epochs);
  base.batch_size = c.integer("batch_size", base.batch_size);
  base.n_per_rect = c.uinteger("n_per_rect", base.n_per_rect);
  base.attack_steps = c.integer("attack_steps", base.attack_steps);
  if (c.has("optimizer")) base.optimizer = parse_optimizer(c.sub("optimizer"), base.optimizer);
  base.d_hidden = c.size_list("d_hidden", base.d_hidden);
  base.grid_resolution = c.uinteger("grid_resolution", base.grid_resolution);
  base.validate();
  return base;
}

json toy_to_json(const ToyRunConfig& t) {
  return json{{"layout", t.layout},
              {"epsilon", t.epsilon},
              {"attack_in", t.toggles.attack_in},
              {"attack_out", t.toggles.attack_out},
              {"attack_generated", t.toggles.attack_generated},
              {"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"n_per_rect", t.n_per_rect},
              {"attack_steps", t.attack_steps},
              {"optimizer", optimizer_to_json(t.optimizer)},
              {"d_hidden", t.d_hidden},
              {"grid_resolution", t.grid_resolution}};
}

ToyAtMspConfig parse_toy_at_msp(const Cursor& c, ToyAtMspConfig base) {
  c.allow({"layout", "epsilon", "epochs", "batch_size", "n_per_rect",
           "train_attack_steps", "eval_attack_steps", "optimizer", "arch",
           "grid_resolution"});
  base.layout = c.text("layout", base.layout);
  base.epsilon = c.number("epsilon", base.epsilon);
  base.epochs = c.integer("epochs", base.epochs);
  base.batch_size = c.integer("batch_size", base.batch_size);
  base.n_per_rect = c.uinteger("n_per_rect", base.n_per_rect);
  base.train_attack_steps =
      c.integer("train_attack_steps", base.train_attack_steps);
  base.eval_attack_steps =
      c.integer("eval_attack_steps", base.eval_attack_steps);
  if (c.has("optimizer")) base.optimizer = parse_optimizer(c.sub("optimizer"), base.optimizer);
  base.arch = c.text("arch", base.arch);
  base.grid_resolution = c.uinteger("grid_resolution", base.grid_resolution);
  require(base.epsilon >= 0.0 && std::isfinite(base.epsilon),
          ErrorCode::Config, c.path(), ".epsilon: must be >= 0");
  require(base.epochs >= 0, ErrorCode::Config, c.path(),
          ".epochs: must be >= 0");
  require(base.batch_size >= 1, ErrorCode::Config, c.path(),
          ".batch_size: must be >= 1");
  require(base.train_attack_steps >= 1 && base.eval_attack_steps >= 1,
          ErrorCode::Config, c.path(), ": attack steps must be >= 1");
  require(base.grid_resolution >= 2, ErrorCode::Config, c.path(),
          ".grid_resolution: must be >= 2");
  return base;
}

json toy_at_msp_to_json(const ToyAtMspConfig& t) {
  return json{{"layout", t.layout},
              {"epsilon", t.epsilon},
              {"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"n_per_rect", t.n_per_rect},
              {"train_attack_steps", t.train_attack_steps},
              {"eval_attack_steps", t.eval_attack_steps},
              {"optimizer", optimizer_to_json(t.optimizer)},
              {"arch", t.arch},
              {"grid_resolution", t.grid_resolution}};
}

bool uses_eval_attack(RunKind kind) {
  return kind == RunKind::Evaluate || kind == RunKind::CrossAttack ||
         kind == RunKind::Sweep;
}

}  // namespace

void ScoreSpec::validate(const std::string& path) const {
  const auto need = [&](const std::string& field, const std::string& value) {
    require(!value.empty(), ErrorCode::Config, path, ".", field,
            ": required for kind '", kind, "'");
  };
  const auto forbid = [&](const std::string& field, const std::string& value) {
    require(value.empty(), ErrorCode::Config, path, ".", field,
            ": not used by kind '", kind, "'");
  };
  if (kind == "msp") {
    need("classifier", classifier);
    forbid("detector", detector);
    forbid("bundle", bundle);
  } else if (kind == "md" || kind == "rmd" || kind == "openmax") {
    need("detector", detector);
    forbid("bundle", bundle);
  } else if (kind == "discriminator") {
    need("bundle", bundle);
    forbid("classifier", classifier);
    forbid("detector", detector);
  } else {
    raise(ErrorCode::Config, path, ".kind: unknown score kind '", kind, "'");
  }
}

RunConfig parse_run_config(const json& j) {
  Cursor root(j, "");
  RunConfig cfg;
  cfg.kind = run_kind_from_name(root.required_text("kind"));
  require(root.has("seed"), ErrorCode::Config, "seed: required field missing");
  cfg.seed = root.uinteger("seed", 0);
  cfg.out_dir = root.text("out_dir", cfg.out_dir);
  require(!cfg.out_dir.empty(), ErrorCode::Config,
          "out_dir: must be non-empty");

  std::vector<const char*> allowed = {"kind", "seed", "out_dir"};
  const auto allow_for = [&](RunKind k) -> std::vector<const char*> {
    switch (k) {
      case RunKind::Pretrain: return {"datasets", "arch", "train"};
      case RunKind::TrainBaseline: return {"datasets", "baseline"};
      case RunKind::TrainAtd: return {"datasets", "atd", "extractor"};
      case RunKind::Evaluate: return {"datasets", "score", "attack", "keep_scores"};
      case RunKind::Transfer: return {"datasets", "score", "sources", "epsilon", "clamp"};
      case RunKind::CrossAttack: return {"datasets", "classifier", "score", "attack"};
      case RunKind::Sweep: return {"datasets", "score", "attack", "steps"};
      case RunKind::Toy: return {"variant", "toy"};
    }
    return {};
  };
  for (const char* k : allow_for(cfg.kind)) allowed.push_back(k);
  {
    // Cursor::allow takes an initializer_list; route through the vector.
    for (auto it = j.begin(); it != j.end(); ++it) {
      const bool known =
          std::any_of(allowed.begin(), allowed.end(),
                      [&](const char* k) { return it.key() == k; });
      require(known, ErrorCode::Config, it.key(),
              ": unknown field for kind '", run_kind_name(cfg.kind), "'");
    }
  }

  if (cfg.kind != RunKind::Toy) {
    require(root.has("datasets"), ErrorCode::Config,
            "datasets: required field missing");
    const json& ds = root.raw("datasets");
    require(ds.is_array() && !ds.empty(), ErrorCode::Config,
            "datasets: expected a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string path = "datasets[" + std::to_string(i) + "]";
      Cursor dc(ds[i], path);
      DatasetSpec spec = parse_dataset(dc, cfg.seed);
      require(names.insert(spec.name).second, ErrorCode::Config, path,
              ".name: duplicate dataset name '", spec.name, "'");
      cfg.datasets.push_back(std::move(spec));
    }
  }

  switch (cfg.kind) {
    case RunKind::Pretrain: {
      cfg.arch = root.text("arch", cfg.arch);
      if (root.has("train")) cfg.train = parse_train(root.sub("train"), cfg.train);
      cfg.train.seed = cfg.seed;
      break;
    }
    case RunKind::TrainBaseline: {
      Cursor b = root.sub("baseline");
      b.allow({"kind", "classifier", "lambda_rel", "tail_size", "alpha_top"});
      cfg.baseline_kind = b.text("kind", cfg.baseline_kind);
      require(cfg.baseline_kind == "md" || cfg.baseline_kind == "rmd" ||
                  cfg.baseline_kind == "openmax",
              ErrorCode::Config, "baseline.kind: expected md, rmd, or openmax",
              " (msp has nothing to fit), got '", cfg.baseline_kind, "'");
      cfg.baseline_classifier = b.required_text("classifier");
      cfg.baseline_lambda_rel = b.number("lambda_rel", cfg.baseline_lambda_rel);
      require(cfg.baseline_lambda_rel >= 0.0, ErrorCode::Config,
              "baseline.lambda_rel: must be >= 0");
      cfg.baseline_tail_size = b.integer("tail_size", cfg.baseline_tail_size);
      require(cfg.baseline_tail_size >= 2, ErrorCode::Config,
              "baseline.tail_size: must be >= 2");
      cfg.baseline_alpha_top = b.integer("alpha_top", cfg.baseline_alpha_top);
      break;
    }
    case RunKind::TrainAtd: {
      if (root.has("atd")) cfg.atd = parse_atd(root.sub("atd"), cfg.atd);
      cfg.atd.seed = cfg.seed;
      if (cfg.atd.mode == AtdMode::Pixel) {
        require(!root.has("extractor"), ErrorCode::Config,
                "extractor: not used in pixel mode");
      } else if (root.has("extractor")) {
        cfg.extractor = parse_extractor(root.sub("extractor"), cfg.extractor);
      }
      break;
    }
    case RunKind::Evaluate: {
      cfg.score = parse_score_spec(root.sub("score"));
      cfg.keep_scores = root.boolean("keep_scores", cfg.keep_scores);
      break;
    }
    case RunKind::Transfer: {
      cfg.score = parse_score_spec(root.sub("score"));
      require(root.has("sources"), ErrorCode::Config,
              "sources: required field missing");
      const json& srcs = root.raw("sources");
      require(srcs.is_array() && !srcs.empty(), ErrorCode::Config,
              "sources: expected a non-empty array");
      for (std::size_t i = 0; i < srcs.size(); ++i) {
        const std::string path = "sources[" + std::to_string(i) + "]";
        cfg.transfer_sources.push_back(parse_score_spec(Cursor(srcs[i], path)));
      }
      cfg.transfer_epsilon = root.number("epsilon", cfg.transfer_epsilon);
      require(cfg.transfer_epsilon >= 0.0 && std::isfinite(cfg.transfer_epsilon),
              ErrorCode::Config, "epsilon: must be >= 0");
      cfg.transfer_clamp = root.clamp("clamp");
      break;
    }
    case RunKind::CrossAttack: {
      cfg.cross_classifier = root.required_text("classifier");
      cfg.score = parse_score_spec(root.sub("score"));
      break;
    }
    case RunKind::Sweep: {
      cfg.score = parse_score_spec(root.sub("score"));
      cfg.sweep_steps = root.int_list("steps", cfg.sweep_steps);
      require(!cfg.sweep_steps.empty(), ErrorCode::Config,
              "steps: must be non-empty");
      for (std::size_t i = 0; i < cfg.sweep_steps.size(); ++i) {
        require(cfg.sweep_steps[i] >= 1, ErrorCode::Config,
                "steps: entries must be >= 1");
        require(i == 0 || cfg.sweep_steps[i] > cfg.sweep_steps[i - 1],
                ErrorCode::Config, "steps: must be strictly ascending");
      }
      break;
    }
    case RunKind::Toy: {
      cfg.toy_variant = root.text("variant", cfg.toy_variant);
      require(cfg.toy_variant == "discriminator" || cfg.toy_variant == "at-msp",
              ErrorCode::Config, "variant: expected 'discriminator' or 'at-msp'");
      if (cfg.toy_variant == "discriminator") {
        if (root.has("toy")) cfg.toy = parse_toy(root.sub("toy"), cfg.toy);
        cfg.toy.seed = cfg.seed;
      } else {
        if (root.has("toy")) cfg.toy_at_msp = parse_toy_at_msp(root.sub("toy"), cfg.toy_at_msp);
        cfg.toy_at_msp.seed = cfg.seed;
      }
      break;
    }
  }

  if (uses_eval_attack(cfg.kind)) {
    // Iterated evaluation attacks default to a heavier schedule against the
    // discriminator score, whose landscape keeps moving under more steps,
    // and a lighter one for the fixed-model baselines.
    AttackConfig base;
    base.steps = (cfg.score.kind == "discriminator") ? 100 : 10;
    cfg.attack = root.has("attack") ? parse_attack(root.sub("attack"), base)
                                    : base;
  }
  return cfg;
}

// out_dir is deliberately absent: where artifacts land never changes what
// gets computed, so it must not perturb the config hash.
json RunConfig::echo() const {
  json j;
  j["kind"] = run_kind_name(kind);
  j["seed"] = seed;
  if (kind != RunKind::Toy) {
    json ds = json::array();
    for (const DatasetSpec& d : datasets) ds.push_back(dataset_to_json(d));
    j["datasets"] = std::move(ds);
  }
  switch (kind) {
    case RunKind::Pretrain:
      j["arch"] = arch;
      j["train"] = train_to_json(train);
      break;
    case RunKind::TrainBaseline:
      j["baseline"] = json{{"kind", baseline_kind},
                           {"classifier", baseline_classifier},
                           {"lambda_rel", baseline_lambda_rel},
                           {"tail_size", baseline_tail_size},
                           {"alpha_top", baseline_alpha_top}};
      break;
    case RunKind::TrainAtd:
      j["atd"] = atd_to_json(atd);
      if (atd.mode == AtdMode::Feature) j["extractor"] = extractor_to_json(extractor);
      break;
    case RunKind::Evaluate:
      j["score"] = score_spec_to_json(score);
      j["attack"] = attack_to_json(attack);
      j["keep_scores"] = keep_scores;
      break;
    case RunKind::Transfer: {
      j["score"] = score_spec_to_json(score);
      json srcs = json::array();
      for (const ScoreSpec& s : transfer_sources) srcs.push_back(score_spec_to_json(s));
      j["sources"] = std::move(srcs);
      j["epsilon"] = transfer_epsilon;
      j["clamp"] = clamp_to_json(transfer_clamp);
      break;
    }
    case RunKind::CrossAttack:
      j["classifier"] = cross_classifier;
      j["score"] = score_spec_to_json(score);
      j["attack"] = attack_to_json(attack);
      break;
    case RunKind::Sweep:
      j["score"] = score_spec_to_json(score);
      j["attack"] = attack_to_json(attack);
      j["steps"] = sweep_steps;
      break;
    case RunKind::Toy:
      j["variant"] = toy_variant;
      j["toy"] = (toy_variant == "discriminator") ? toy_to_json(toy)
                                                  : toy_at_msp_to_json(toy_at_msp);
      break;
  }
  return j;
}

std::string RunConfig::config_hash() const { return sha256_hex(echo().dump()); }

RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override,
                          const std::string& out_dir_override) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "config: cannot open ", path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    raise(ErrorCode::Config, "config: ", path.string(), ": ", e.what());
  }
  require(j.is_object(), ErrorCode::Config, "config: ", path.string(),
          ": expected a JSON object");
  if (seed_override) j["seed"] = *seed_override;
  if (!out_dir_override.empty()) j["out_dir"] = out_dir_override;
  return parse_run_config(j);
}

}  // namespace atdkit

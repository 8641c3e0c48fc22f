#include "core/runner.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "core/errors.hpp"
#include "core/evaluation.hpp"
#include "core/hash.hpp"
#include "core/losses.hpp"
#include "core/textio.hpp"

namespace atdkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Collects what a run writes, hashing each file as it lands so the manifest
// can tie every artifact to its content.
class ArtifactSink {
public:
  explicit ArtifactSink(fs::path dir) : dir_(std::move(dir)) {}

  void write_text(const std::string& rel, const std::string& content) {
    const fs::path path = dir_ / rel;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::Io, "cannot open ", path.string(),
            " for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    require(out.good(), ErrorCode::Io, "write failed for ", path.string());
    out.close();
    entries_.push_back({{"path", rel},
                        {"sha256", sha256_hex(content)},
                        {"bytes", content.size()}});
  }

  // For files produced by lower-level writers (checkpoints, bundles).
  void add_file(const std::string& rel) {
    const fs::path path = dir_ / rel;
    require(fs::exists(path), ErrorCode::Internal, "artifact ", rel,
            " was not written");
    entries_.push_back({{"path", rel},
                        {"sha256", sha256_file_hex(path)},
                        {"bytes", fs::file_size(path)}});
  }

  const json& entries() const { return entries_; }
  const fs::path& dir() const { return dir_; }

private:
  fs::path dir_;
  json entries_ = json::array();
};

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << v;
  return os.str();
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// --- dataset plumbing ---

using RoleMap = std::map<Role, std::vector<SampleBatch>>;

RoleMap load_datasets(const RunConfig& cfg,
                      const std::vector<Role>& accepted) {
  RoleMap out;
  for (const DatasetSpec& spec : cfg.datasets) {
    const bool ok = std::find(accepted.begin(), accepted.end(), spec.role) !=
                    accepted.end();
    require(ok, ErrorCode::Config, "dataset '", spec.name, "': role '",
            role_name(spec.role), "' is not used by kind '",
            run_kind_name(cfg.kind), "'");
    out[spec.role].push_back(load_dataset(spec));
  }
  return out;
}

const SampleBatch& single(const RoleMap& data, Role role) {
  auto it = data.find(role);
  require(it != data.end() && !it->second.empty(), ErrorCode::Config,
          "datasets: a '", role_name(role), "' dataset is required");
  require(it->second.size() == 1, ErrorCode::Config,
          "datasets: exactly one '", role_name(role), "' dataset expected, got ",
          it->second.size());
  return it->second.front();
}

const SampleBatch* optional_single(const RoleMap& data, Role role) {
  auto it = data.find(role);
  if (it == data.end() || it->second.empty()) return nullptr;
  require(it->second.size() == 1, ErrorCode::Config,
          "datasets: at most one '", role_name(role), "' dataset expected");
  return &it->second.front();
}

const std::vector<SampleBatch>& many(const RoleMap& data, Role role) {
  auto it = data.find(role);
  require(it != data.end() && !it->second.empty(), ErrorCode::Config,
          "datasets: at least one '", role_name(role), "' dataset is required");
  return it->second;
}

std::size_t num_classes_of(const SampleBatch& batch) {
  require(batch.labeled(), ErrorCode::Config, "dataset '", batch.name,
          "': labels required");
  int max_label = 0;
  for (int l : batch.labels) max_label = std::max(max_label, l);
  return static_cast<std::size_t>(max_label) + 1;
}

void check_input_dims(const std::vector<std::size_t>& dims,
                      const SampleBatch& batch, const std::string& what) {
  std::size_t flat = 1;
  for (std::size_t d : dims) flat *= d;
  require(flat == batch.inputs.sample_size(), ErrorCode::Config, what,
          ": input size ", flat, " does not match dataset '", batch.name,
          "' sample size ", batch.inputs.sample_size());
}

Tensor batched_forward(ClassifierModel& model, const Tensor& x,
                       bool want_features) {
  const std::size_t n = x.batch();
  const std::size_t width =
      want_features ? model.feature_dim() : model.num_classes();
  const std::size_t chunk = 512;
  if (n <= chunk) return want_features ? model.features(x) : model.logits(x);
  Tensor out({n, width});
  for (std::size_t i = 0; i < n; i += chunk) {
    const std::size_t j = std::min(n, i + chunk);
    Tensor part_in = x.slice_rows(i, j);
    Tensor part = want_features ? model.features(part_in)
                                : model.logits(part_in);
    for (std::size_t r = i; r < j; ++r) out.set_row(r, part.row(r - i));
  }
  return out;
}

// --- CSV builders (all floats through the shortest round-trip printer) ---

std::string history_csv(const TrainHistory& hist) {
  std::ostringstream os;
  os << "epoch,mean_loss,train_acc\n";
  for (const EpochStats& e : hist.epochs) {
    os << e.epoch << ',' << format_double(e.mean_loss) << ','
       << format_double(e.train_acc) << '\n';
  }
  return os.str();
}

std::string atd_history_csv(const AtdHistory& hist) {
  std::ostringstream os;
  os << "epoch,d_loss,g_loss,mean_sigma_in,mean_sigma_gen,val_auroc,improved\n";
  for (const AtdEpochStats& e : hist.epochs) {
    os << e.epoch << ',' << format_double(e.d_loss) << ','
       << format_double(e.g_loss) << ',' << format_double(e.mean_sigma_in)
       << ',' << format_double(e.mean_sigma_gen) << ','
       << format_double(e.val_auroc) << ',' << (e.improved ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string eval_report_csv(const EvalReport& rep, const std::string& method,
                            const std::optional<double>& accuracy,
                            std::uint64_t seed) {
  std::ostringstream os;
  os << "method,in_dataset,out_dataset,setting,auroc,accuracy,seed\n";
  for (const EvalCell& c : rep.cells) {
    os << method << ',' << rep.in_dataset << ',' << c.out_dataset << ','
       << c.setting << ',' << format_double(c.auroc) << ','
       << (accuracy ? format_double(*accuracy) : "") << ',' << seed << '\n';
  }
  return os.str();
}

json eval_report_json(const EvalReport& rep, const std::string& method,
                      const std::optional<double>& accuracy,
                      std::uint64_t seed) {
  json cells = json::array();
  for (const EvalCell& c : rep.cells) {
    cells.push_back({{"setting", c.setting},
                     {"out_dataset", c.out_dataset},
                     {"auroc", c.auroc}});
  }
  json j{{"schema_version", 1},
         {"method", method},
         {"score_kind", rep.score_kind},
         {"attack_surface", rep.attack_surface},
         {"in_dataset", rep.in_dataset},
         {"seed", seed},
         {"cells", std::move(cells)},
         {"setting_means", rep.setting_means}};
  j["accuracy"] = accuracy ? json(*accuracy) : json(nullptr);
  return j;
}

std::string scores_csv(const EvalReport& rep) {
  std::ostringstream os;
  os << "setting,dataset,sample_id,is_in,score\n";
  for (const PerSampleScore& s : rep.per_sample) {
    os << s.setting << ',' << s.dataset << ',' << s.sample_id << ','
       << (s.is_in ? 1 : 0) << ',' << format_double(s.score) << '\n';
  }
  return os.str();
}

// Clean accuracy of the wrapped classifier on the labeled in-set, when the
// score has one; reported alongside detection numbers.
std::optional<double> clean_accuracy(ResolvedScore& rs,
                                     const SampleBatch& in_test) {
  if (!rs.classifier || !in_test.labeled()) return std::nullopt;
  Tensor logits = batched_forward(*rs.classifier, in_test.inputs, false);
  return loss::accuracy(logits, in_test.labels);
}

// --- per-kind runs ---

void run_pretrain(const RunConfig& cfg, ArtifactSink& sink) {
  RoleMap data = load_datasets(cfg, {Role::InTrain, Role::OutExposure});
  const SampleBatch& in_train = single(data, Role::InTrain);
  const SampleBatch* exposure = optional_single(data, Role::OutExposure);

  const std::size_t classes = num_classes_of(in_train);
  RngStream init = RngStream::derive(cfg.seed, "init");
  ClassifierModel model = build_classifier(cfg.arch, classes, init);
  check_input_dims(model.input_dims(), in_train, "arch '" + cfg.arch + "'");

  TrainHistory hist = train_classifier(model, in_train, exposure, cfg.train);

  std::ostringstream prov;
  prov << "pretrain objective=" << objective_name(cfg.train.objective)
       << " epochs=" << cfg.train.epochs << " seed=" << cfg.seed;

  Checkpoint ck = snapshot(model);
  ck.provenance = prov.str();
  ck.config_hash = cfg.config_hash();
  ck.step = hist.optimizer_steps;
  if (!hist.epochs.empty()) {
    ck.metrics["train_acc"] = hist.epochs.back().train_acc;
    ck.metrics["mean_loss"] = hist.epochs.back().mean_loss;
  }
  write_checkpoint(ck, sink.dir() / "classifier.ckpt");
  sink.add_file("classifier.ckpt");

  FeatureExtractor fx = FeatureExtractor::strip_head(model, prov.str());
  Checkpoint fck = snapshot(fx);
  fck.config_hash = cfg.config_hash();
  fck.step = hist.optimizer_steps;
  write_checkpoint(fck, sink.dir() / "extractor.ckpt");
  sink.add_file("extractor.ckpt");

  sink.write_text("history.csv", history_csv(hist));
  sink.write_text(
      "training_summary.json",
      dump_json(json{{"optimizer_steps", hist.optimizer_steps},
                     {"attacks_on_in", hist.attacks_on_in},
                     {"attacks_on_out", hist.attacks_on_out},
                     {"classes", classes},
                     {"classifier_fingerprint",
                      hex64(params_fingerprint(model.params()))}}));
}

void run_train_baseline(const RunConfig& cfg, ArtifactSink& sink) {
  RoleMap data = load_datasets(cfg, {Role::InTrain});
  const SampleBatch& fit_set = single(data, Role::InTrain);
  require(fit_set.labeled(), ErrorCode::Config, "dataset '", fit_set.name,
          "': baseline fitting requires labels");

  ClassifierModel model = load_classifier(cfg.baseline_classifier);
  model.set_training(false);
  check_input_dims(model.input_dims(), fit_set, "classifier");
  const std::size_t classes = model.num_classes();
  for (int l : fit_set.labels) {
    require(l >= 0 && static_cast<std::size_t>(l) < classes,
            ErrorCode::Config, "dataset '", fit_set.name,
            "': label out of the classifier's range");
  }

  json detector{{"schema_version", 1},
                {"kind", cfg.baseline_kind},
                {"classifier", cfg.baseline_classifier},
                {"classifier_fingerprint",
                 hex64(params_fingerprint(model.params()))},
                {"fit", json{{"dataset", fit_set.name},
                             {"samples", fit_set.size()}}}};

  if (cfg.baseline_kind == "md" || cfg.baseline_kind == "rmd") {
    Tensor features = batched_forward(model, fit_set.inputs, true);
    GaussianBank bank = fit_gaussian_bank(features, fit_set.labels, classes,
                                          cfg.baseline_lambda_rel);
    detector["gaussian"] = gaussian_bank_to_json(bank);
  } else {  // openmax
    Tensor logits = batched_forward(model, fit_set.inputs, false);
    WeibullBank bank =
        fit_weibull_bank(logits, fit_set.labels, classes,
                         cfg.baseline_tail_size, cfg.baseline_alpha_top);
    detector["weibull"] = weibull_bank_to_json(bank);
  }
  sink.write_text("detector.json", dump_json(detector));
}

void run_train_atd(const RunConfig& cfg, ArtifactSink& sink) {
  RoleMap data = load_datasets(
      cfg, {Role::InTrain, Role::OutExposure, Role::InVal, Role::OutVal});
  const SampleBatch& in_train = single(data, Role::InTrain);
  const SampleBatch& val_in = single(data, Role::InVal);
  const SampleBatch& val_out = single(data, Role::OutVal);
  const SampleBatch* exposure = optional_single(data, Role::OutExposure);
  if (cfg.atd.alpha_mix > 0.0) {
    require(exposure != nullptr, ErrorCode::Config,
            "datasets: an 'out-exposure' dataset is required when "
            "atd.alpha_mix > 0");
  } else {
    require(exposure == nullptr, ErrorCode::Config,
            "datasets: the 'out-exposure' dataset is unused when "
            "atd.alpha_mix == 0");
  }

  FeatureExtractor fx;
  if (cfg.atd.mode == AtdMode::Feature) {
    if (!cfg.extractor.checkpoint.empty()) {
      fx = load_extractor(cfg.extractor.checkpoint);
    } else {
      TrainConfig pc;
      pc.objective = cfg.atd.robust_extractor ? TrainObjective::AT
                                              : TrainObjective::Standard;
      pc.epochs = cfg.extractor.epochs;
      pc.batch_size = cfg.extractor.batch_size;
      pc.optimizer = cfg.extractor.optimizer;
      pc.attack = cfg.extractor.attack;
      pc.seed = mix_seed(cfg.seed, "extractor-pretrain");
      std::ostringstream prov;
      prov << "pretrained inline objective=" << objective_name(pc.objective)
           << " epochs=" << pc.epochs << " seed=" << cfg.seed;
      fx = pretrain_extractor(cfg.extractor.arch, in_train, pc, prov.str());
    }
    check_input_dims(fx.input_dims(), in_train, "extractor");
  }

  AtdBundle bundle = train_atd(std::move(fx), in_train, exposure, val_in,
                               val_out, cfg.atd);
  bundle.config_hash = cfg.config_hash();

  save_bundle(bundle, sink.dir() / "bundle");
  sink.add_file("bundle/bundle.json");
  sink.add_file("bundle/discriminator.ckpt");
  sink.add_file("bundle/generator.ckpt");
  if (bundle.mode == AtdMode::Feature) sink.add_file("bundle/extractor.ckpt");

  sink.write_text("atd_history.csv", atd_history_csv(bundle.history));
  sink.write_text(
      "atd_summary.json",
      dump_json(json{
          {"best", json{{"epoch", bundle.best.epoch},
                        {"val_auroc", bundle.best.val_auroc}}},
          {"d_steps", bundle.history.d_steps},
          {"g_steps", bundle.history.g_steps},
          {"attacks_on_in", bundle.history.attacks_on_in},
          {"attacks_on_out", bundle.history.attacks_on_out},
          {"attacks_on_generated", bundle.history.attacks_on_generated},
          {"extractor_hash", hex64(bundle.extractor_hash_after)}}));
}

void run_evaluate(const RunConfig& cfg, ArtifactSink& sink) {
  RoleMap data = load_datasets(cfg, {Role::InTest, Role::OutTest});
  const SampleBatch& in_test = single(data, Role::InTest);
  const std::vector<SampleBatch>& out_tests = many(data, Role::OutTest);

  ResolvedScore rs = resolve_score(cfg.score);
  EvalReport rep = evaluate(*rs.fn, in_test, out_tests,
                            standard_settings(cfg.attack), cfg.seed,
                            cfg.keep_scores);
  const std::optional<double> accuracy = clean_accuracy(rs, in_test);

  sink.write_text("eval_report.json",
                  dump_json(eval_report_json(rep, rs.method, accuracy,
                                             cfg.seed)));
  sink.write_text("eval_report.csv",
                  eval_report_csv(rep, rs.method, accuracy, cfg.seed));
  if (cfg.keep_scores) sink.write_text("scores.csv", scores_csv(rep));
}

void run_transfer(const RunConfig& cfg, ArtifactSink& sink) {
  RoleMap data = load_datasets(cfg, {Role::InTest, Role::OutTest});
  const SampleBatch& in_test = single(data, Role::InTest);
  const std::vector<SampleBatch>& out_tests = many(data, Role::OutTest);

  ResolvedScore target = resolve_score(cfg.score);
  std::vector<ResolvedScore> sources;
  std::vector<std::pair<std::string, ScoreFunction*>> pairs;
  std::map<std::string, int> seen;
  for (const ScoreSpec& spec : cfg.transfer_sources) {
    sources.push_back(resolve_score(spec));
    std::string name = sources.back().method;
    const int n = ++seen[name];
    if (n > 1) name += "#" + std::to_string(n);
    pairs.emplace_back(name, sources.back().fn.get());
  }

  TransferReport rep =
      transfer_eval(pairs, *target.fn, in_test, out_tests,
                    cfg.transfer_epsilon, cfg.transfer_clamp, cfg.seed);

  std::ostringstream csv;
  csv << "source,target,out_dataset,setting,auroc,seed\n";
  for (const TransferRow& r : rep.rows) {
    csv << r.source << ',' << target.method << ',' << r.out_dataset << ','
        << r.setting << ',' << format_double(r.auroc) << ',' << cfg.seed
        << '\n';
  }
  sink.write_text("transfer_report.csv", csv.str());

  json rows = json::array();
  for (const TransferRow& r : rep.rows) {
    rows.push_back({{"source", r.source},
                    {"setting", r.setting},
                    {"out_dataset", r.out_dataset},
                    {"auroc", r.auroc}});
  }
  sink.write_text("transfer_report.json",
                  dump_json(json{{"schema_version", 1},
                                 {"target", target.method},
                                 {"epsilon", cfg.transfer_epsilon},
                                 {"seed", cfg.seed},
                                 {"rows", std::move(rows)},
                                 {"means", rep.means}}));
}

void run_cross_attack(const RunConfig& cfg, ArtifactSink& sink) {
  RoleMap data = load_datasets(cfg, {Role::InTest, Role::OutTest});
  const SampleBatch& in_test = single(data, Role::InTest);
  const std::vector<SampleBatch>& out_tests = many(data, Role::OutTest);
  require(in_test.labeled(), ErrorCode::Config, "dataset '", in_test.name,
          "': the cross study needs labels on the in-set");

  ClassifierModel classifier = load_classifier(cfg.cross_classifier);
  classifier.set_training(false);
  check_input_dims(classifier.input_dims(), in_test, "classifier");
  ResolvedScore detector = resolve_score(cfg.score);

  CrossAttackReport rep = cross_attack_eval(classifier, *detector.fn, in_test,
                                            out_tests, cfg.attack, cfg.seed);

  std::ostringstream csv;
  csv << "attack,accuracy,detection_auroc\n";
  csv << "classification," << format_double(rep.acc_under_classifier_attack)
      << ',' << format_double(rep.auroc_under_classifier_attack) << '\n';
  csv << "detection," << format_double(rep.acc_under_detector_attack) << ','
      << format_double(rep.auroc_under_detector_attack) << '\n';
  sink.write_text("cross_report.csv", csv.str());

  sink.write_text(
      "cross_report.json",
      dump_json(json{
          {"schema_version", 1},
          {"detector", detector.method},
          {"seed", cfg.seed},
          {"accuracy", json{{"under_classification_attack",
                             rep.acc_under_classifier_attack},
                            {"under_detection_attack",
                             rep.acc_under_detector_attack}}},
          {"detection_auroc", json{{"under_classification_attack",
                                    rep.auroc_under_classifier_attack},
                                   {"under_detection_attack",
                                    rep.auroc_under_detector_attack}}}}));
}

void run_sweep(const RunConfig& cfg, ArtifactSink& sink) {
  RoleMap data = load_datasets(cfg, {Role::InTest, Role::OutTest});
  const SampleBatch& in_test = single(data, Role::InTest);
  const std::vector<SampleBatch>& out_tests = many(data, Role::OutTest);

  ResolvedScore rs = resolve_score(cfg.score);
  std::vector<SweepRow> rows = step_sweep(*rs.fn, in_test, out_tests,
                                          cfg.sweep_steps, cfg.attack,
                                          cfg.seed);

  std::ostringstream csv;
  csv << "steps,setting,auroc\n";
  for (const SweepRow& r : rows) {
    csv << r.steps << ',' << r.setting << ',' << format_double(r.auroc)
        << '\n';
  }
  sink.write_text("sweep.csv", csv.str());

  json jrows = json::array();
  for (const SweepRow& r : rows) {
    jrows.push_back(
        {{"steps", r.steps}, {"setting", r.setting}, {"auroc", r.auroc}});
  }
  json j{{"schema_version", 1},
         {"method", rs.method},
         {"seed", cfg.seed},
         {"rows", std::move(jrows)}};
  const bool has50 = std::find(cfg.sweep_steps.begin(), cfg.sweep_steps.end(),
                               50) != cfg.sweep_steps.end();
  const bool has100 = std::find(cfg.sweep_steps.begin(), cfg.sweep_steps.end(),
                                100) != cfg.sweep_steps.end();
  if (has50 && has100) j["stability_gap_50_100"] = sweep_gap(rows, 50, 100);
  sink.write_text("sweep.json", dump_json(j));
}

std::string toy_points_csv(const SampleBatch& in_points,
                           const SampleBatch& out_points) {
  std::ostringstream os;
  os << "set,x,y,label\n";
  for (std::size_t i = 0; i < in_points.size(); ++i) {
    auto r = in_points.inputs.row(i);
    os << "in," << format_double(r[0]) << ',' << format_double(r[1]) << ','
       << in_points.labels[i] << '\n';
  }
  for (std::size_t i = 0; i < out_points.size(); ++i) {
    auto r = out_points.inputs.row(i);
    os << "out," << format_double(r[0]) << ',' << format_double(r[1])
       << ",-1\n";
  }
  return os.str();
}

void run_toy_kind(const RunConfig& cfg, ArtifactSink& sink) {
  if (cfg.toy_variant == "discriminator") {
    ToyRunResult res = run_toy(cfg.toy);
    write_decision_map_csv(res.map, sink.dir() / "decision_map.csv");
    sink.add_file("decision_map.csv");
    sink.write_text("toy_points.csv",
                    toy_points_csv(res.in_points, res.out_points));
    sink.write_text(
        "toy_metrics.json",
        dump_json(json{
            {"clean_acc_in", res.metrics.clean_acc_in},
            {"clean_acc_out", res.metrics.clean_acc_out},
            {"clean_acc_gen", res.metrics.clean_acc_gen},
            {"robust_in_acc", res.metrics.robust_in_acc},
            {"robust_out_detect", res.metrics.robust_out_detect},
            {"robust_auroc_both", res.metrics.robust_auroc_both},
            {"resampler_calls_during_training",
             res.metrics.resampler_calls_during_training}}));
    Checkpoint ck = snapshot(res.disc);
    ck.config_hash = cfg.config_hash();
    write_checkpoint(ck, sink.dir() / "discriminator.ckpt");
    sink.add_file("discriminator.ckpt");
  } else {
    ToyAtMspResult res = run_toy_at_msp(cfg.toy_at_msp);
    write_decision_map_csv(res.map, sink.dir() / "decision_map.csv");
    sink.add_file("decision_map.csv");
    sink.write_text("toy_metrics.json",
                    dump_json(json{{"clean_auroc", res.clean_auroc},
                                   {"robust_auroc_both",
                                    res.robust_auroc_both}}));
    Checkpoint ck = snapshot(res.model);
    ck.config_hash = cfg.config_hash();
    write_checkpoint(ck, sink.dir() / "classifier.ckpt");
    sink.add_file("classifier.ckpt");
  }
}

}  // namespace

ResolvedScore resolve_score(const ScoreSpec& spec) {
  ResolvedScore out;
  out.method = spec.kind;
  if (spec.kind == "msp") {
    out.classifier =
        std::make_unique<ClassifierModel>(load_classifier(spec.classifier));
    out.classifier->set_training(false);
    out.fn = std::make_unique<MspScore>(*out.classifier);
    return out;
  }
  if (spec.kind == "discriminator") {
    out.bundle = std::make_unique<AtdBundle>(load_bundle(spec.bundle));
    FeatureExtractor* fx = (out.bundle->mode == AtdMode::Feature)
                               ? &out.bundle->extractor
                               : nullptr;
    out.fn = std::make_unique<DiscriminatorScore>(fx, out.bundle->disc);
    return out;
  }

  std::ifstream in(spec.detector);
  require(in.good(), ErrorCode::Io, "detector: cannot open ", spec.detector);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    raise(ErrorCode::Io, "detector: ", spec.detector, ": ", e.what());
  }

  const std::string classifier_path =
      !spec.classifier.empty() ? spec.classifier
                               : j.at("classifier").get<std::string>();
  out.classifier =
      std::make_unique<ClassifierModel>(load_classifier(classifier_path));
  out.classifier->set_training(false);
  const std::string expected =
      j.at("classifier_fingerprint").get<std::string>();
  const std::string actual = hex64(params_fingerprint(out.classifier->params()));
  require(actual == expected, ErrorCode::Contract,
          "detector: fitted against a different classifier (fingerprint ",
          expected, ", loaded ", actual, ")");

  if (spec.kind == "md" || spec.kind == "rmd") {
    require(j.contains("gaussian"), ErrorCode::Config,
            "detector: no gaussian fit in ", spec.detector);
    GaussianBank bank = gaussian_bank_from_json(j.at("gaussian"));
    if (spec.kind == "md") {
      out.fn = std::make_unique<MdScore>(*out.classifier, std::move(bank));
    } else {
      out.fn = std::make_unique<RmdScore>(*out.classifier, std::move(bank));
    }
  } else {  // openmax (spec.validate rejected everything else)
    require(j.contains("weibull"), ErrorCode::Config,
            "detector: no weibull fit in ", spec.detector);
    out.fn = std::make_unique<OpenMaxScore>(
        *out.classifier, weibull_bank_from_json(j.at("weibull")));
  }
  return out;
}

RunResult execute_run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  ArtifactSink sink(out_dir);

  json manifest{{"schema_version", 1},
                {"kind", run_kind_name(cfg.kind)},
                {"config", cfg.echo()},
                {"config_hash", cfg.config_hash()},
                {"seed", cfg.seed},
                {"out_dir", cfg.out_dir}};

  const auto finish = [&](const char* status) {
    manifest["status"] = status;
    manifest["artifacts"] = sink.entries();
    // Informational only; determinism comparisons go through the artifact
    // hashes, never this field.
    manifest["wall_time_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::ofstream m(out_dir / "run_manifest.json", std::ios::binary);
    require(m.good(), ErrorCode::Io, "cannot write run manifest");
    const std::string text = dump_json(manifest);
    m.write(text.data(), static_cast<std::streamsize>(text.size()));
  };

  try {
    switch (cfg.kind) {
      case RunKind::Pretrain: run_pretrain(cfg, sink); break;
      case RunKind::TrainBaseline: run_train_baseline(cfg, sink); break;
      case RunKind::TrainAtd: run_train_atd(cfg, sink); break;
      case RunKind::Evaluate: run_evaluate(cfg, sink); break;
      case RunKind::Transfer: run_transfer(cfg, sink); break;
      case RunKind::CrossAttack: run_cross_attack(cfg, sink); break;
      case RunKind::Sweep: run_sweep(cfg, sink); break;
      case RunKind::Toy: run_toy_kind(cfg, sink); break;
    }
  } catch (const Error& e) {
    manifest["error"] = {{"code", error_code_name(e.code())},
                         {"message", e.what()}};
    finish("failed");
    throw;
  } catch (const std::exception& e) {
    manifest["error"] = {{"code", "internal"}, {"message", e.what()}};
    finish("failed");
    throw;
  }
  finish("ok");
  return RunResult{out_dir, std::move(manifest)};
}

}  // namespace atdkit

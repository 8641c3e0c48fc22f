#include "core/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"
#include "core/losses.hpp"

namespace atdkit {

double auroc(std::span<const double> in_scores,
             std::span<const double> out_scores) {
  require(!in_scores.empty() && !out_scores.empty(), ErrorCode::Contract,
          "auroc: empty score list");
  for (double v : in_scores) {
    require(std::isfinite(v), ErrorCode::Contract, "auroc: non-finite in-score");
  }
  for (double v : out_scores) {
    require(std::isfinite(v), ErrorCode::Contract,
            "auroc: non-finite out-score");
  }
  const std::size_t n = in_scores.size(), m = out_scores.size();
  struct Entry {
    double value;
    bool is_in;
  };
  std::vector<Entry> all;
  all.reserve(n + m);
  for (double v : in_scores) all.push_back({v, true});
  for (double v : out_scores) all.push_back({v, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });

  // Midrank sum over the in-class. Rank values are integers or half-integers,
  // so the accumulation below is exact in doubles at any feasible size.
  double rank_sum_in = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].value == all[i].value) ++j;
    // Ranks i+1 .. j (1-based); every tied entry takes the midrank.
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].is_in) rank_sum_in += midrank;
    }
    i = j;
  }
  const double nn = static_cast<double>(n);
  const double u = rank_sum_in - nn * (nn + 1.0) / 2.0;
  return u / (nn * static_cast<double>(m));
}

const char* setting_name(SettingKind kind) {
  switch (kind) {
    case SettingKind::Clean: return "clean";
    case SettingKind::AttackIn: return "attack-in";
    case SettingKind::AttackOut: return "attack-out";
    case SettingKind::AttackBoth: return "attack-both";
  }
  return "?";
}

std::vector<EvalSetting> standard_settings(const AttackConfig& attack) {
  return {{SettingKind::Clean, attack},
          {SettingKind::AttackIn, attack},
          {SettingKind::AttackOut, attack},
          {SettingKind::AttackBoth, attack}};
}

namespace {

void collect(EvalReport& report, const std::string& setting,
             const SampleBatch& set, std::span<const double> scores,
             bool is_in, bool keep) {
  if (!keep) return;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    report.per_sample.push_back(
        {setting, set.name, set.ids.empty() ? "" : set.ids[i], is_in, scores[i]});
  }
}

}  // namespace

EvalReport evaluate(ScoreFunction& fn, const SampleBatch& in_test,
                    const std::vector<SampleBatch>& out_tests,
                    const std::vector<EvalSetting>& settings,
                    std::uint64_t seed, bool keep_scores) {
  require(in_test.size() > 0, ErrorCode::Contract, "evaluate: empty in-set");
  require(!out_tests.empty(), ErrorCode::Contract, "evaluate: no out-sets");
  for (const auto& o : out_tests) {
    require(o.size() > 0, ErrorCode::Contract, "evaluate: empty out-set '",
            o.name, "'");
  }

  EvalReport report;
  report.score_kind = fn.kind();
  report.attack_surface = fn.attack_surface();
  report.in_dataset = in_test.name;
  report.seed = seed;

  for (const EvalSetting& setting : settings) {
    const std::string sname = setting_name(setting.kind);
    const bool hit_in = setting.kind == SettingKind::AttackIn ||
                        setting.kind == SettingKind::AttackBoth;
    const bool hit_out = setting.kind == SettingKind::AttackOut ||
                         setting.kind == SettingKind::AttackBoth;

    // The in-set perturbation depends only on (seed, setting, in-set).
    Tensor in_inputs = in_test.inputs;
    if (hit_in) {
      in_inputs = attack_score_pgd(
          fn, in_test.inputs, setting.attack, DetectorRole::In,
          mix_seed(seed, sname + "/in/" + in_test.name));
    }
    const std::vector<double> in_scores = fn.score(in_inputs);
    collect(report, sname, in_test, in_scores, true, keep_scores);

    double mean_auroc = 0.0;
    for (const SampleBatch& out_set : out_tests) {
      Tensor out_inputs = out_set.inputs;
      if (hit_out) {
        out_inputs = attack_score_pgd(
            fn, out_set.inputs, setting.attack, DetectorRole::Out,
            mix_seed(seed, sname + "/out/" + out_set.name));
      }
      const std::vector<double> out_scores = fn.score(out_inputs);
      collect(report, sname, out_set, out_scores, false, keep_scores);
      const double a = auroc(in_scores, out_scores);
      report.cells.push_back({sname, out_set.name, a});
      mean_auroc += a;
    }
    report.setting_means[sname] =
        mean_auroc / static_cast<double>(out_tests.size());
  }
  return report;
}

TransferReport transfer_eval(
    const std::vector<std::pair<std::string, ScoreFunction*>>& sources,
    ScoreFunction& target, const SampleBatch& in_test,
    const std::vector<SampleBatch>& out_tests, double epsilon,
    const std::optional<ClampRange>& clamp, std::uint64_t seed) {
  require(!sources.empty(), ErrorCode::Contract, "transfer: no sources");
  (void)seed;  // single-step sign attacks draw no randomness

  TransferReport report;
  report.target = target.kind();
  const SettingKind kinds[] = {SettingKind::AttackIn, SettingKind::AttackOut,
                               SettingKind::AttackBoth};
  for (const auto& [source_name, source] : sources) {
    require(source != nullptr, ErrorCode::Contract, "transfer: null source");
    for (SettingKind kind : kinds) {
      const std::string sname = setting_name(kind);
      const bool hit_in =
          kind == SettingKind::AttackIn || kind == SettingKind::AttackBoth;
      const bool hit_out =
          kind == SettingKind::AttackOut || kind == SettingKind::AttackBoth;

      Tensor in_inputs = in_test.inputs;
      if (hit_in) {
        in_inputs = attack_score_fgsm(*source, in_test.inputs, epsilon, clamp,
                                      DetectorRole::In);
      }
      const std::vector<double> in_scores = target.score(in_inputs);

      double mean = 0.0;
      for (const SampleBatch& out_set : out_tests) {
        Tensor out_inputs = out_set.inputs;
        if (hit_out) {
          out_inputs = attack_score_fgsm(*source, out_set.inputs, epsilon,
                                         clamp, DetectorRole::Out);
        }
        const double a = auroc(in_scores, target.score(out_inputs));
        report.rows.push_back({source_name, sname, out_set.name, a});
        mean += a;
      }
      report.means[source_name][sname] =
          mean / static_cast<double>(out_tests.size());
    }
  }
  return report;
}

CrossAttackReport cross_attack_eval(ClassifierModel& classifier,
                                    ScoreFunction& detector,
                                    const SampleBatch& in_test,
                                    const std::vector<SampleBatch>& out_tests,
                                    const AttackConfig& attack,
                                    std::uint64_t seed) {
  require(in_test.labeled(), ErrorCode::Contract,
          "cross-attack: in-set needs labels");
  require(!out_tests.empty(), ErrorCode::Contract, "cross-attack: no out-sets");

  CrossAttackReport report;

  // Classification attack on both sides.
  Tensor in_cls = attack_classifier_ce(classifier, in_test.inputs,
                                       in_test.labels, attack,
                                       mix_seed(seed, "cls/in"));
  const bool was_training = classifier.training();
  classifier.set_training(false);
  report.acc_under_classifier_attack =
      loss::accuracy(classifier.logits(in_cls), in_test.labels);
  classifier.set_training(was_training);

  const std::vector<double> in_scores_cls = detector.score(in_cls);
  double mean_cls = 0.0;
  for (const SampleBatch& out_set : out_tests) {
    Tensor out_cls = attack_classifier_ce_predicted(
        classifier, out_set.inputs, attack,
        mix_seed(seed, "cls/out/" + out_set.name));
    mean_cls += auroc(in_scores_cls, detector.score(out_cls));
  }
  report.auroc_under_classifier_attack =
      mean_cls / static_cast<double>(out_tests.size());

  // Detection attack on both sides.
  Tensor in_det = attack_score_pgd(detector, in_test.inputs, attack,
                                   DetectorRole::In, mix_seed(seed, "det/in"));
  classifier.set_training(false);
  report.acc_under_detector_attack =
      loss::accuracy(classifier.logits(in_det), in_test.labels);
  classifier.set_training(was_training);

  const std::vector<double> in_scores_det = detector.score(in_det);
  double mean_det = 0.0;
  for (const SampleBatch& out_set : out_tests) {
    Tensor out_det = attack_score_pgd(detector, out_set.inputs, attack,
                                      DetectorRole::Out,
                                      mix_seed(seed, "det/out/" + out_set.name));
    mean_det += auroc(in_scores_det, detector.score(out_det));
  }
  report.auroc_under_detector_attack =
      mean_det / static_cast<double>(out_tests.size());
  return report;
}

std::vector<SweepRow> step_sweep(ScoreFunction& fn, const SampleBatch& in_test,
                                 const std::vector<SampleBatch>& out_tests,
                                 const std::vector<int>& steps_list,
                                 const AttackConfig& base_attack,
                                 std::uint64_t seed) {
  require(!steps_list.empty(), ErrorCode::Contract, "sweep: empty steps list");
  std::vector<SweepRow> rows;
  for (int steps : steps_list) {
    require(steps >= 1, ErrorCode::Config, "sweep: steps must be >= 1");
    AttackConfig attack = base_attack;
    attack.steps = steps;
    attack.step_size = 0.0;  // re-derive 2.5 * eps / steps per point
    const EvalReport report =
        evaluate(fn, in_test, out_tests, standard_settings(attack), seed);
    for (const auto& [sname, mean] : report.setting_means) {
      if (sname == "clean") continue;
      rows.push_back({steps, sname, mean});
    }
  }
  return rows;
}

double sweep_gap(const std::vector<SweepRow>& rows, int steps_a, int steps_b) {
  double gap = 0.0;
  bool found = false;
  for (const SweepRow& a : rows) {
    if (a.steps != steps_a) continue;
    for (const SweepRow& b : rows) {
      if (b.steps != steps_b || b.setting != a.setting) continue;
      gap = std::max(gap, std::abs(a.auroc - b.auroc));
      found = true;
    }
  }
  require(found, ErrorCode::Contract, "sweep: step counts ", steps_a, " and ",
          steps_b, " not both present");
  return gap;
}

}  // namespace atdkit

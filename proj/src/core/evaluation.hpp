#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/scores.hpp"

namespace atdkit {

// Area under the ROC curve via the rank statistic: the probability that a
// random in-score exceeds a random out-score, ties counted half. Exact for
// finite inputs (rank sums are integers and halves, which doubles represent
// exactly below 2^53). Raises on empty or non-finite inputs.
double auroc(std::span<const double> in_scores,
             std::span<const double> out_scores);

enum class SettingKind { Clean, AttackIn, AttackOut, AttackBoth };
const char* setting_name(SettingKind kind);

struct EvalSetting {
  SettingKind kind = SettingKind::Clean;
  AttackConfig attack;  // ignored for Clean
};

// The usual ladder: clean, attack-in, attack-out, attack-both, sharing one
// attack budget.
std::vector<EvalSetting> standard_settings(const AttackConfig& attack);

struct EvalCell {
  std::string setting;
  std::string out_dataset;
  double auroc = 0.0;
};

struct PerSampleScore {
  std::string setting;
  std::string dataset;
  std::string sample_id;
  bool is_in = false;
  double score = 0.0;
};

struct EvalReport {
  std::string score_kind;
  std::string attack_surface;
  std::string in_dataset;
  std::uint64_t seed = 0;
  std::vector<EvalCell> cells;
  // Mean AUROC per setting across out-datasets.
  std::map<std::string, double> setting_means;
  std::vector<PerSampleScore> per_sample;  // filled when keep_scores
};

// Runs the detection protocol. In-set perturbations are crafted once per
// setting (they do not depend on the out-sets); each out-set is attacked
// independently. AttackBoth perturbs both sides, each under its own full
// budget. Attack seeds derive from (seed, setting, dataset) so adding an
// out-set never shifts another set's perturbations.
EvalReport evaluate(ScoreFunction& fn, const SampleBatch& in_test,
                    const std::vector<SampleBatch>& out_tests,
                    const std::vector<EvalSetting>& settings,
                    std::uint64_t seed, bool keep_scores = false);

// --- transfer study ---

struct TransferRow {
  std::string source;  // score that crafted the perturbation
  std::string setting;
  std::string out_dataset;
  double auroc = 0.0;
};

struct TransferReport {
  std::string target;
  std::vector<TransferRow> rows;
  // source -> setting -> mean over out-datasets
  std::map<std::string, std::map<std::string, double>> means;
};

// Perturbations are crafted with single-step sign attacks against each
// source score, then *scored* by the target. Sources and target must share
// the input space.
TransferReport transfer_eval(
    const std::vector<std::pair<std::string, ScoreFunction*>>& sources,
    ScoreFunction& target, const SampleBatch& in_test,
    const std::vector<SampleBatch>& out_tests, double epsilon,
    const std::optional<ClampRange>& clamp, std::uint64_t seed);

// --- classifier-vs-detector cross study ---

struct CrossAttackReport {
  // Accuracy of the classifier on the perturbed in-set, AUROC of the
  // detector on perturbed in vs perturbed out, under each attack.
  double acc_under_classifier_attack = 0.0;
  double acc_under_detector_attack = 0.0;
  double auroc_under_classifier_attack = 0.0;
  double auroc_under_detector_attack = 0.0;
};

// The classification attack maximizes cross-entropy (true labels on the
// in-set, the classifier's own clean predictions on unlabeled out-sets);
// the detection attack pushes scores across the threshold from both sides.
CrossAttackReport cross_attack_eval(ClassifierModel& classifier,
                                    ScoreFunction& detector,
                                    const SampleBatch& in_test,
                                    const std::vector<SampleBatch>& out_tests,
                                    const AttackConfig& attack,
                                    std::uint64_t seed);

// --- attack-strength sweep ---

struct SweepRow {
  int steps = 0;
  std::string setting;
  double auroc = 0.0;  // mean over out-datasets
};

std::vector<SweepRow> step_sweep(ScoreFunction& fn, const SampleBatch& in_test,
                                 const std::vector<SampleBatch>& out_tests,
                                 const std::vector<int>& steps_list,
                                 const AttackConfig& base_attack,
                                 std::uint64_t seed);

// Largest |AUROC(a) - AUROC(b)| across settings for two step counts present
// in the sweep.
double sweep_gap(const std::vector<SweepRow>& rows, int steps_a, int steps_b);

}  // namespace atdkit

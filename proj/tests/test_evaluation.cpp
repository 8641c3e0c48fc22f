#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "core/errors.hpp"
#include "core/evaluation.hpp"
#include "core/model_kit.hpp"
#include "core/rng.hpp"
#include "core/scores.hpp"
#include "core/training.hpp"
#include "support.hpp"

using namespace atdkit;

TEST_CASE("auroc on frozen values") {
  // worked by hand: pairs (0.9,0.5) (0.9,0.1) (0.4,0.5) (0.4,0.1)
  // -> wins 3 of 4
  const std::vector<double> in = {0.9, 0.4};
  const std::vector<double> out = {0.5, 0.1};
  CHECK(auroc(in, out) == 0.75);

  // perfect separation and its mirror
  CHECK(auroc(std::vector<double>{2.0, 3.0}, std::vector<double>{0.0, 1.0}) ==
        1.0);
  CHECK(auroc(std::vector<double>{0.0, 1.0}, std::vector<double>{2.0, 3.0}) ==
        0.0);

  // all tied: exactly one half
  CHECK(auroc(std::vector<double>{1.0, 1.0, 1.0},
              std::vector<double>{1.0, 1.0}) == 0.5);

  // mixed ties, hand-counted: (1,0):win (1,1):half (1,2):loss
  //                           (2,0):win (2,1):win  (2,2):half
  // -> (1 + 0.5 + 0 + 1 + 1 + 0.5) / 6 = 2/3
  CHECK(auroc(std::vector<double>{1.0, 2.0},
              std::vector<double>{0.0, 1.0, 2.0}) == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(auroc(std::vector<double>{}, out), Error);
  CHECK_THROWS_AS(auroc(std::vector<double>{std::nan("")}, out), Error);
}

TEST_CASE("auroc matches the brute-force oracle on random inputs") {
  std::mt19937 gen(61);
  std::uniform_real_distribution<double> val(-3.0, 3.0);
  std::uniform_int_distribution<int> len(1, 80);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> in(len(gen)), out(len(gen));
    // quantize some trials so ties actually occur
    const bool quantized = trial % 3 == 0;
    for (double& v : in) v = quantized ? coarse(gen) : val(gen);
    for (double& v : out) v = quantized ? coarse(gen) : val(gen);
    const double got = auroc(in, out);
    const double want = testsup::brute_auroc(in, out);
    CHECK(std::abs(got - want) <= 1e-12);
  }
}

TEST_CASE("auroc complement symmetry") {
  std::mt19937 gen(62);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> in(20), out(30);
    for (double& v : in) v = val(gen);
    for (double& v : out) v = val(gen);
    CHECK(auroc(in, out) + auroc(out, in) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("setting names and the standard ladder") {
  AttackConfig attack;
  auto settings = standard_settings(attack);
  REQUIRE(settings.size() == 4);
  CHECK(settings[0].kind == SettingKind::Clean);
  CHECK(settings[1].kind == SettingKind::AttackIn);
  CHECK(settings[2].kind == SettingKind::AttackOut);
  CHECK(settings[3].kind == SettingKind::AttackBoth);
  CHECK(std::string(setting_name(SettingKind::Clean)) == "clean");
  CHECK(std::string(setting_name(SettingKind::AttackIn)) == "attack-in");
  CHECK(std::string(setting_name(SettingKind::AttackOut)) == "attack-out");
  CHECK(std::string(setting_name(SettingKind::AttackBoth)) == "attack-both");
}

namespace {

// Classifier-free score for protocol tests: distance from the origin, higher
// = more in-distribution. Smooth, so attacks behave predictably.
class RadialScore final : public ScoreFunction {
 public:
  std::string kind() const override { return "radial"; }
  std::vector<double> score(const Tensor& x) override {
    std::vector<double> out;
    for (std::size_t r = 0; r < x.batch(); ++r) {
      double acc = 0.0;
      for (double v : x.row(r)) acc += v * v;
      out.push_back(-acc);
    }
    return out;
  }
  ObjectiveEval objective_grad(const Tensor& x) override {
    ObjectiveEval ev;
    ev.values = score(x);
    ev.grad = Tensor(x.shape());
    for (std::size_t r = 0; r < x.batch(); ++r) {
      auto row = x.row(r);
      auto grow = ev.grad.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) grow[j] = -2.0 * row[j];
    }
    return ev;
  }
};

SampleBatch named_points(const std::string& name, Role role, double cx,
                         double cy, std::size_t n, std::uint64_t seed) {
  SampleBatch b = testsup::blob_batch(seed, n, {{cx, cy}}, 0.2, false, role,
                                      name);
  return b;
}

}  // namespace

TEST_CASE("evaluate runs the full ladder and orders the damage") {
  RadialScore fn;
  SampleBatch in_test = named_points("in", Role::InTest, 0.0, 0.0, 40, 70);
  std::vector<SampleBatch> outs;
  outs.push_back(named_points("far", Role::OutTest, 3.0, 3.0, 40, 71));
  outs.push_back(named_points("near", Role::OutTest, 1.5, 1.5, 40, 72));

  AttackConfig attack;
  attack.epsilon = 0.3;
  attack.steps = 10;
  auto settings = standard_settings(attack);

  EvalReport report = evaluate(fn, in_test, outs, settings, 99, true);
  CHECK(report.score_kind == "radial");
  CHECK(report.in_dataset == "in");
  CHECK(report.seed == 99);
  REQUIRE(report.cells.size() == 8);  // 4 settings x 2 out-sets

  // cells carry the out-set names; means aggregate them
  for (const auto& cell : report.cells) {
    CHECK((cell.out_dataset == "far" || cell.out_dataset == "near"));
    CHECK(cell.auroc >= 0.0);
    CHECK(cell.auroc <= 1.0);
  }
  REQUIRE(report.setting_means.size() == 4);

  // radial score separates the clean blobs perfectly
  CHECK(report.setting_means.at("clean") == 1.0);
  // every attacked setting is at most as good as clean, and attacking both
  // sides is at most as good as attacking either side alone
  const double clean = report.setting_means.at("clean");
  const double a_in = report.setting_means.at("attack-in");
  const double a_out = report.setting_means.at("attack-out");
  const double both = report.setting_means.at("attack-both");
  CHECK(a_in <= clean);
  CHECK(a_out <= clean);
  // the in-side crafts differ between attack-in and attack-both (the derived
  // attack seed includes the setting), so allow convergence wobble
  CHECK(both <= a_in + 0.02);
  CHECK(both <= a_out + 0.02);

  // per-sample scores cover every (setting, sample) pair exactly once
  REQUIRE(report.per_sample.size() == 4 * (40 + 40 + 40));
  std::size_t in_rows = 0;
  for (const auto& row : report.per_sample) {
    if (row.is_in) {
      ++in_rows;
      CHECK(row.dataset == "in");
    }
    CHECK_FALSE(row.sample_id.empty());
  }
  CHECK(in_rows == 4 * 40);

  // without keep_scores the per-sample block stays empty
  EvalReport lean = evaluate(fn, in_test, outs, settings, 99, false);
  CHECK(lean.per_sample.empty());
  // and the aggregate numbers are identical
  for (const auto& [k, v] : report.setting_means) {
    CHECK(lean.setting_means.at(k) == v);
  }
}

TEST_CASE("evaluate derives attack seeds per dataset") {
  // Adding a second out-set must not change the first one's cells.
  RadialScore fn;
  SampleBatch in_test = named_points("in", Role::InTest, 0.0, 0.0, 30, 73);
  SampleBatch out_a = named_points("a", Role::OutTest, 2.0, 2.0, 30, 74);
  SampleBatch out_b = named_points("b", Role::OutTest, -2.0, 2.0, 30, 75);

  AttackConfig attack;
  attack.epsilon = 0.4;
  attack.steps = 5;
  auto settings = standard_settings(attack);

  EvalReport solo = evaluate(fn, in_test, {out_a}, settings, 7);
  EvalReport duo = evaluate(fn, in_test, {out_a, out_b}, settings, 7);

  for (const auto& cell : solo.cells) {
    bool found = false;
    for (const auto& other : duo.cells) {
      if (other.setting == cell.setting && other.out_dataset == "a") {
        CHECK(other.auroc == cell.auroc);
        found = true;
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("transfer: self-crafted attacks dominate transferred ones") {
  // Perturbations crafted against the target itself should hurt the target
  // at least as much as perturbations crafted against a different surface.
  RadialScore target;

  // source with a rotated gradient field: same level sets at the blob scale
  // but different attack directions
  class SkewScore final : public ScoreFunction {
   public:
    std::string kind() const override { return "skew"; }
    std::vector<double> score(const Tensor& x) override {
      std::vector<double> out;
      for (std::size_t r = 0; r < x.batch(); ++r) {
        auto row = x.row(r);
        const double u = 2.0 * row[0] + row[1];
        const double v = row[1] - 0.5 * row[0];
        out.push_back(-(u * u + 0.25 * v * v));
      }
      return out;
    }
    ObjectiveEval objective_grad(const Tensor& x) override {
      ObjectiveEval ev;
      ev.values = score(x);
      ev.grad = Tensor(x.shape());
      for (std::size_t r = 0; r < x.batch(); ++r) {
        auto row = x.row(r);
        auto g = ev.grad.row(r);
        const double u = 2.0 * row[0] + row[1];
        const double v = row[1] - 0.5 * row[0];
        g[0] = -(4.0 * u - 0.25 * v);
        g[1] = -(2.0 * u + 0.5 * v);
      }
      return ev;
    }
  };

  SkewScore skew;
  SampleBatch in_test = named_points("in", Role::InTest, 0.0, 0.0, 50, 76);
  std::vector<SampleBatch> outs;
  outs.push_back(named_points("out", Role::OutTest, 2.5, -2.5, 50, 77));

  std::vector<std::pair<std::string, ScoreFunction*>> sources;
  sources.emplace_back("self", &target);
  sources.emplace_back("skew", &skew);

  TransferReport report =
      transfer_eval(sources, target, in_test, outs, 0.5, std::nullopt, 13);
  CHECK(report.rows.size() == 2 * 3);  // 2 sources x 3 attacked settings

  const double self_both = report.means.at("self").at("attack-both");
  const double skew_both = report.means.at("skew").at("attack-both");
  CHECK(self_both <= skew_both + 0.02);
}

TEST_CASE("cross attack: each surface hurts its own metric most") {
  // Train a small classifier so both metrics start healthy.
  RngStream init = RngStream::derive(80, "init");
  ClassifierModel model = build_classifier("mlp[2,16,16]", 2, init);
  SampleBatch train = testsup::blob_batch(81, 60, {{0.0, 0.0}, {3.0, 3.0}}, 0.3);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 20;
  tc.seed = 82;
  train_classifier(model, train, nullptr, tc);

  SampleBatch in_test =
      testsup::blob_batch(83, 40, {{0.0, 0.0}, {3.0, 3.0}}, 0.3, true,
                          Role::InTest, "in");
  std::vector<SampleBatch> outs;
  outs.push_back(named_points("out", Role::OutTest, -3.0, 3.0, 40, 84));

  MspScore msp(model);
  AttackConfig attack;
  attack.epsilon = 0.4;
  attack.steps = 10;

  CrossAttackReport report =
      cross_attack_eval(model, msp, in_test, outs, attack, 85);

  CHECK(report.acc_under_classifier_attack >= 0.0);
  CHECK(report.acc_under_detector_attack <= 1.0);
  // the classification attack is the stronger accuracy threat
  CHECK(report.acc_under_classifier_attack <=
        report.acc_under_detector_attack);
  // the detection attack is the stronger detection threat
  CHECK(report.auroc_under_detector_attack <=
        report.auroc_under_classifier_attack);
}

TEST_CASE("step sweep holds the budget fixed and reports the gap") {
  RadialScore fn;
  SampleBatch in_test = named_points("in", Role::InTest, 0.0, 0.0, 30, 86);
  std::vector<SampleBatch> outs;
  outs.push_back(named_points("out", Role::OutTest, 2.0, 2.0, 30, 87));

  AttackConfig base;
  base.epsilon = 0.3;
  const std::vector<int> steps = {1, 5, 10};

  auto rows = step_sweep(fn, in_test, outs, steps, base, 88);
  // 3 step counts x 3 attacked settings
  REQUIRE(rows.size() == 9);
  for (const auto& row : rows) {
    CHECK((row.steps == 1 || row.steps == 5 || row.steps == 10));
    CHECK(row.auroc >= 0.0);
    CHECK(row.auroc <= 1.0);
  }

  const double gap = sweep_gap(rows, 5, 10);
  CHECK(gap >= 0.0);
  CHECK(gap <= 1.0);
  // asking for a step count the sweep never ran is a contract violation
  CHECK_THROWS_AS(sweep_gap(rows, 5, 50), Error);
}

TEST_CASE("more steps hurt a smooth score at least as much") {
  // On the radial surface, PGD with more steps under one budget should be
  // at least as strong (up to small non-monotonicity from fixed step size).
  RadialScore fn;
  SampleBatch in_test = named_points("in", Role::InTest, 0.0, 0.0, 40, 89);
  std::vector<SampleBatch> outs;
  outs.push_back(named_points("out", Role::OutTest, 1.8, 1.8, 40, 90));

  AttackConfig base;
  base.epsilon = 0.25;
  auto rows = step_sweep(fn, in_test, outs, {1, 10}, base, 91);

  double weak = 0.0, strong = 0.0;
  for (const auto& row : rows) {
    if (row.setting != "attack-both") continue;
    if (row.steps == 1) weak = row.auroc;
    if (row.steps == 10) strong = row.auroc;
  }
  CHECK(strong <= weak + 0.05);
}

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <vector>

#include "core/data.hpp"
#include "core/errors.hpp"
#include "core/toy_lab.hpp"
#include "support.hpp"

using namespace atdkit;

TEST_CASE("role names round-trip") {
  for (auto role : {Role::InTrain, Role::InVal, Role::InTest,
                    Role::OutExposure, Role::OutVal, Role::OutTest}) {
    CHECK(role_from_name(role_name(role)) == role);
  }
  CHECK_THROWS_AS(role_from_name("sideways"), Error);
}

TEST_CASE("blobs loader is deterministic and shapes labels") {
  DatasetSpec spec;
  spec.name = "b";
  spec.source = "blobs";
  spec.seed = 5;
  spec.params = {{"centers", {{0.0, 0.0}, {4.0, 4.0}}}, {"n", 25}};
  SampleBatch a = load_dataset(spec);
  SampleBatch b = load_dataset(spec);

  CHECK(a.size() == 50);
  CHECK(a.labeled());
  CHECK(a.labels.front() == 0);
  CHECK(a.labels.back() == 1);
  CHECK(a.ids.front() == "b#0");
  CHECK(a.ids.back() == "b#49");
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    CHECK(a.inputs[i] == b.inputs[i]);
  }

  spec.seed = 6;
  SampleBatch c = load_dataset(spec);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    any_diff |= (a.inputs[i] != c.inputs[i]);
  }
  CHECK(any_diff);

  // cap truncates deterministically
  spec.cap = 10;
  SampleBatch capped = load_dataset(spec);
  CHECK(capped.size() == 10);
  CHECK(capped.ids.size() == 10);
  CHECK(capped.labels.size() == 10);
}

TEST_CASE("csv loader reads labeled points back") {
  testsup::TempDir dir("csv");
  {
    // numeric rows only; # starts a comment, the last column is the label
    std::ofstream f(dir.str("pts.csv"));
    f << "# x, y, label\n";
    f << "0.5,1.5,0\n";
    f << "-2.0,0.25,1\n";
    f << "3.0,4.0,0\n";
  }
  DatasetSpec spec;
  spec.name = "file";
  spec.source = "csv:" + dir.str("pts.csv");
  SampleBatch batch = load_dataset(spec);
  CHECK(batch.size() == 3);
  CHECK(batch.inputs.sample_size() == 2);
  CHECK(batch.labels == std::vector<int>{0, 1, 0});
  CHECK(batch.inputs.row(1)[0] == -2.0);

  // unlabeled on request: every column is a coordinate
  {
    std::ofstream f(dir.str("raw.csv"));
    f << "0.1,0.2\n0.3,0.4\n";
  }
  spec.source = "csv:" + dir.str("raw.csv");
  spec.params = {{"labeled", false}};
  SampleBatch raw = load_dataset(spec);
  CHECK(raw.size() == 2);
  CHECK_FALSE(raw.labeled());
  CHECK(raw.inputs.sample_size() == 2);
}

TEST_CASE("dataset validation rejects non-finite and out-of-range data") {
  testsup::TempDir dir("bad");
  {
    std::ofstream f(dir.str("nan.csv"));
    f << "x0,x1\n0.1,nan\n";
  }
  DatasetSpec spec;
  spec.name = "bad";
  spec.source = "csv:" + dir.str("nan.csv");
  CHECK_THROWS_AS(load_dataset(spec), Error);

  DatasetSpec unknown;
  unknown.name = "u";
  unknown.source = "cloud";
  CHECK_THROWS_AS(load_dataset(unknown), Error);
}

TEST_CASE("image variants live in pixel space") {
  DatasetSpec spec;
  spec.name = "img";
  spec.source = "images:in";
  spec.seed = 9;
  spec.params = {{"n", 12}};
  SampleBatch batch = load_dataset(spec);
  CHECK(batch.pixel_space);
  CHECK(batch.size() == 12);
  CHECK(batch.inputs.rank() == 4);  // N, C, H, W
  CHECK(batch.labeled());
  for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
    CHECK(batch.inputs[i] >= 0.0);
    CHECK(batch.inputs[i] <= 1.0);
  }

  spec.source = "images:rings";
  SampleBatch rings = load_dataset(spec);
  CHECK(rings.pixel_space);
  CHECK_FALSE(rings.labeled());
}

TEST_CASE("make_batches covers every sample exactly once") {
  SampleBatch data = testsup::blob_batch(20, 10, {{0.0, 0.0}, {1.0, 1.0}});
  RngStream rng(3);
  auto batches = make_batches(data, 8, &rng);
  REQUIRE(batches.size() == 3);  // 20 = 8 + 8 + 4
  CHECK(batches[0].size() == 8);
  CHECK(batches[2].size() == 4);

  std::set<std::string> seen;
  for (const auto& b : batches) {
    CHECK(b.name == data.name);
    CHECK(b.labels.size() == b.size());
    for (const auto& id : b.ids) seen.insert(id);
  }
  CHECK(seen.size() == 20);

  // sequential order without an rng
  auto ordered = make_batches(data, 8, nullptr);
  CHECK(ordered[0].ids[0] == data.ids[0]);
  CHECK(ordered[0].inputs.row(0)[0] == data.inputs.row(0)[0]);
}

TEST_CASE("toy layouts are disjoint and framed with attack margin") {
  for (const char* name : {"pair", "triad"}) {
    ToyLayout layout = toy_layout(name, 1.0);
    CHECK(layout.epsilon == 1.0);
    CHECK_FALSE(layout.in_rects.empty());
    CHECK_FALSE(layout.out_rects.empty());

    // frame covers every rect padded by two budgets
    for (const auto& r : layout.in_rects) {
      CHECK(layout.frame.lo_x <= r.lo_x - 2.0);
      CHECK(layout.frame.hi_x >= r.hi_x + 2.0);
      CHECK(layout.frame.lo_y <= r.lo_y - 2.0);
      CHECK(layout.frame.hi_y >= r.hi_y + 2.0);
    }

    // no in-rect corner sits inside an out-rect and vice versa
    for (const auto& a : layout.in_rects) {
      for (const auto& b : layout.out_rects) {
        const bool overlap = a.lo_x <= b.hi_x && b.lo_x <= a.hi_x &&
                             a.lo_y <= b.hi_y && b.lo_y <= a.hi_y;
        CHECK_FALSE(overlap);
      }
    }
  }
  CHECK(toy_layout("pair", 1.0).num_classes() == 1);
  CHECK(toy_layout("triad", 1.0).num_classes() == 3);
  CHECK_THROWS_AS(toy_layout("hexagon", 1.0), Error);
}

TEST_CASE("rect samplers stay inside their regions") {
  ToyLayout layout = toy_layout("triad", 1.0);
  SampleBatch in = sample_in_rects(layout, 50, 77, "in", Role::InTrain);
  CHECK(in.size() == 50 * layout.in_rects.size());
  CHECK(in.labeled());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double x = in.inputs.row(i)[0];
    const double y = in.inputs.row(i)[1];
    const int label = in.labels[i];
    bool inside_own = false;
    for (const auto& r : layout.in_rects) {
      if (r.label == label && r.contains(x, y)) inside_own = true;
    }
    CHECK(inside_own);
  }

  SampleBatch out = sample_out_rects(layout, 50, 78, "out", Role::OutTest);
  CHECK(out.size() == 50 * layout.out_rects.size());
  CHECK_FALSE(out.labeled());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out.inputs.row(i)[0];
    const double y = out.inputs.row(i)[1];
    bool inside = false;
    for (const auto& r : layout.out_rects) inside |= r.contains(x, y);
    CHECK(inside);
  }
}

TEST_CASE("toy resampler avoids the dilated in-region and counts calls") {
  ToyLayout layout = toy_layout("pair", 1.0);
  ToyResampler resampler(layout, 55);
  CHECK(resampler.calls() == 0);

  Tensor pts = resampler.sample(400);
  CHECK(resampler.calls() == 1);
  CHECK(pts.batch() == 400);
  for (std::size_t i = 0; i < 400; ++i) {
    const double x = pts.row(i)[0];
    const double y = pts.row(i)[1];
    CHECK(layout.frame.contains(x, y));
    CHECK_FALSE(layout.inside_any_in(x, y, 1.5 * layout.epsilon));
  }
  resampler.sample(10);
  resampler.sample(10);
  CHECK(resampler.calls() == 3);
}

TEST_CASE("toy detector study produces calibrated outputs") {
  ToyRunConfig cfg;
  cfg.epochs = 40;
  cfg.n_per_rect = 80;
  cfg.attack_steps = 10;
  cfg.grid_resolution = 24;
  cfg.seed = 5;
  cfg.toggles.attack_in = true;
  cfg.toggles.attack_out = true;
  ToyRunResult result = run_toy(cfg);

  // decision map: resolution^2 probabilities over the frame
  CHECK(result.map.resolution == 24);
  REQUIRE(result.map.values.size() == 24 * 24);
  for (double v : result.map.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  // training resamples pseudo-outliers every epoch, never reusing a batch
  CHECK(result.metrics.resampler_calls_during_training >=
        std::size_t(cfg.epochs));

  // clean separation on the pair layout is essentially solvable
  CHECK(result.metrics.clean_acc_in > 0.9);
  CHECK(result.metrics.clean_acc_out > 0.9);
  CHECK(result.metrics.robust_auroc_both >= 0.0);
  CHECK(result.metrics.robust_auroc_both <= 1.0);

  CHECK_FALSE(result.disc.training());
  CHECK(result.in_points.size() > 0);
  CHECK(result.out_points.size() > 0);

  // decision map csv round-trips through the writer
  testsup::TempDir dir("map");
  write_decision_map_csv(result.map, dir.str("map.csv"));
  std::ifstream f(dir.str("map.csv"));
  std::string header;
  std::getline(f, header);
  CHECK(header.find("x") != std::string::npos);
  std::size_t rows = 0;
  for (std::string line; std::getline(f, line);) rows += line.empty() ? 0 : 1;
  CHECK(rows == 24 * 24);
}

TEST_CASE("toy config validation") {
  ToyRunConfig cfg;
  cfg.validate();
  ToyRunConfig bad = cfg;
  bad.epsilon = -0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.grid_resolution = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  // unknown layouts are caught when the layout is built
  bad = cfg;
  bad.layout = "hexagon";
  CHECK_THROWS_AS(run_toy(bad), Error);
}

TEST_CASE("toy at-msp study runs end to end") {
  ToyAtMspConfig cfg;
  cfg.epochs = 10;
  cfg.n_per_rect = 40;
  cfg.train_attack_steps = 3;
  cfg.eval_attack_steps = 5;
  cfg.grid_resolution = 16;
  cfg.seed = 6;
  ToyAtMspResult result = run_toy_at_msp(cfg);
  CHECK(result.map.values.size() == 16 * 16);
  CHECK(result.clean_auroc >= 0.0);
  CHECK(result.clean_auroc <= 1.0);
  CHECK(result.robust_auroc_both >= 0.0);
  // the attack should not make detection noticeably easier
  CHECK(result.robust_auroc_both <= result.clean_auroc + 0.05);
  CHECK(result.model.num_classes() == 3);
}

// Exercises the shared-library surface the way an external consumer would:
// only atdkit/atdkit.h plus the standard library, no core headers.
#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atdkit/atdkit.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("atdkit-capi-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str(const std::string& leaf) const {
    return (path_ / leaf).string();
  }

 private:
  fs::path path_;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

json blobs_ds(const std::string& name, const std::string& role,
              std::vector<std::vector<double>> centers, int n, bool labeled) {
  return json{{"name", name},
              {"role", role},
              {"source", "blobs"},
              {"params", json{{"centers", centers},
                              {"std", 0.3},
                              {"n", n},
                              {"labeled", labeled}}}};
}

// Pipeline shared by the handle tests: pretrain a classifier and fit a
// gaussian detector against it, all through atdk_run.
struct Artifacts {
  TempDir dir{"pipeline"};
  std::string classifier;
  std::string detector;

  Artifacts() {
    json pre{{"kind", "pretrain"},
             {"seed", 41},
             {"out_dir", dir.str("pre")},
             {"arch", "mlp[2,16,16]"},
             {"datasets",
              json::array(
                  {blobs_ds("train", "in-train", {{0, 0}, {3, 3}}, 30, true)})},
             {"train", json{{"objective", "standard"},
                            {"epochs", 5},
                            {"batch_size", 20},
                            {"optimizer",
                             json{{"kind", "adam"}, {"lr", 0.01}}}}}};
    write_file(dir.str("pre.json"), pre.dump());
    REQUIRE(atdk_run(dir.str("pre.json").c_str(), -1, nullptr) == ATDK_OK);
    classifier = dir.str("pre") + "/classifier.ckpt";

    json det{{"kind", "train-baseline"},
             {"seed", 42},
             {"out_dir", dir.str("det")},
             {"datasets",
              json::array(
                  {blobs_ds("train", "in-train", {{0, 0}, {3, 3}}, 30, true)})},
             {"baseline", json{{"kind", "md"}, {"classifier", classifier}}}};
    write_file(dir.str("det.json"), det.dump());
    REQUIRE(atdk_run(dir.str("det.json").c_str(), -1, nullptr) == ATDK_OK);
    detector = dir.str("det") + "/detector.json";
  }
};

}  // namespace

TEST_CASE("version and status names are stable strings") {
  const char* version = atdk_version();
  REQUIRE(version != nullptr);
  CHECK(std::strlen(version) > 0);
  CHECK(std::string(version).find('.') != std::string::npos);

  CHECK(std::string(atdk_status_name(ATDK_OK)) == "ok");
  CHECK(std::string(atdk_status_name(ATDK_ERR_INVALID_ARGUMENT)) ==
        "invalid-argument");
  CHECK(std::string(atdk_status_name(ATDK_ERR_CONFIG)) == "config");
  CHECK(std::string(atdk_status_name(ATDK_ERR_IO)) == "io");
  CHECK(std::string(atdk_status_name(ATDK_ERR_NUMERIC)) == "numeric");
  CHECK(std::string(atdk_status_name(ATDK_ERR_CONTRACT)) == "contract");
  CHECK(std::string(atdk_status_name(ATDK_ERR_INTERNAL)) == "internal");
}

TEST_CASE("auroc computes and rejects bad buffers") {
  const double in[] = {0.9, 0.4};
  const double out[] = {0.5, 0.1};
  double result = -1.0;
  REQUIRE(atdk_auroc(in, 2, out, 2, &result) == ATDK_OK);
  CHECK(result == 0.75);
  CHECK(std::string(atdk_last_error()).empty());

  CHECK(atdk_auroc(nullptr, 2, out, 2, &result) ==
        ATDK_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(atdk_last_error()) > 0);

  // empty score lists are a contract violation inside the library
  CHECK(atdk_auroc(in, 0, out, 2, &result) != ATDK_OK);
  CHECK(std::strlen(atdk_last_error()) > 0);

  // the next success clears the sticky message
  REQUIRE(atdk_auroc(in, 2, out, 2, &result) == ATDK_OK);
  CHECK(std::string(atdk_last_error()).empty());
}

TEST_CASE("config check validates without executing") {
  TempDir td("check");
  json good{{"kind", "evaluate"},
            {"seed", 1},
            {"datasets",
             json::array({blobs_ds("in", "in-test", {{0, 0}}, 8, true),
                          blobs_ds("out", "out-test", {{3, 3}}, 8, false)})},
            {"score", json{{"kind", "msp"}, {"classifier", "c.ckpt"}}}};
  write_file(td.str("good.json"), good.dump());
  CHECK(atdk_config_check(td.str("good.json").c_str()) == ATDK_OK);
  // nothing ran: the referenced checkpoint never needed to exist
  CHECK_FALSE(fs::exists("c.ckpt"));

  json bad = good;
  bad["atack"] = json{{"epsilon", 0.1}};
  write_file(td.str("bad.json"), bad.dump());
  CHECK(atdk_config_check(td.str("bad.json").c_str()) == ATDK_ERR_CONFIG);
  CHECK(std::string(atdk_last_error()).find("atack") != std::string::npos);

  write_file(td.str("mangled.json"), "{\"kind\": ");
  CHECK(atdk_config_check(td.str("mangled.json").c_str()) == ATDK_ERR_CONFIG);

  CHECK(atdk_config_check(td.str("absent.json").c_str()) == ATDK_ERR_IO);
  CHECK(atdk_config_check(nullptr) == ATDK_ERR_INVALID_ARGUMENT);
}

TEST_CASE("run executes a config and honors the overrides") {
  TempDir td("run");
  json pre{{"kind", "pretrain"},
           {"seed", 51},
           {"out_dir", td.str("default-out")},
           {"arch", "mlp[2,8,8]"},
           {"datasets",
            json::array(
                {blobs_ds("train", "in-train", {{0, 0}, {2, 2}}, 20, true)})},
           {"train", json{{"objective", "standard"},
                          {"epochs", 2},
                          {"batch_size", 16}}}};
  write_file(td.str("pre.json"), pre.dump());

  REQUIRE(atdk_run(td.str("pre.json").c_str(), -1, nullptr) == ATDK_OK);
  CHECK(fs::exists(td.str("default-out") + "/classifier.ckpt"));

  // seed and out_dir overrides take effect before parsing
  const std::string other = td.str("other-out");
  REQUIRE(atdk_run(td.str("pre.json").c_str(), 77, other.c_str()) == ATDK_OK);
  json manifest;
  std::ifstream(other + "/run_manifest.json") >> manifest;
  CHECK(manifest.at("seed").get<int>() == 77);
  CHECK(manifest.at("status") == "ok");

  // failures surface as statuses, not exceptions across the boundary
  json broken = pre;
  broken["arch"] = "mlp[9,8,8]";  // dataset rows are 2-wide
  write_file(td.str("broken.json"), broken.dump());
  CHECK(atdk_run(td.str("broken.json").c_str(), -1, nullptr) ==
        ATDK_ERR_CONFIG);
  CHECK(std::strlen(atdk_last_error()) > 0);
}

TEST_CASE("model handles load checkpoints and serve logits") {
  Artifacts art;

  atdk_model* model = atdk_model_load(art.classifier.c_str());
  REQUIRE(model != nullptr);

  size_t input_size = 0, classes = 0;
  REQUIRE(atdk_model_input_size(model, &input_size) == ATDK_OK);
  REQUIRE(atdk_model_num_classes(model, &classes) == ATDK_OK);
  CHECK(input_size == 2);
  CHECK(classes == 2);

  // one sample per blob center: each should win its own class
  const double inputs[] = {0.0, 0.0, 3.0, 3.0};
  std::vector<double> logits(2 * classes);
  REQUIRE(atdk_model_logits(model, inputs, 2, input_size, logits.data()) ==
          ATDK_OK);
  for (double v : logits) CHECK(std::isfinite(v));
  CHECK(logits[0] > logits[1]);  // class 0 at (0,0)
  CHECK(logits[3] > logits[2]);  // class 1 at (3,3)

  CHECK(atdk_model_logits(nullptr, inputs, 2, 2, logits.data()) ==
        ATDK_ERR_INVALID_ARGUMENT);
  CHECK(atdk_model_logits(model, inputs, 0, 2, logits.data()) ==
        ATDK_ERR_INVALID_ARGUMENT);
  atdk_model_free(model);
  atdk_model_free(nullptr);  // free of NULL is a no-op

  CHECK(atdk_model_load(art.dir.str("nope.ckpt").c_str()) == nullptr);
  CHECK(std::strlen(atdk_last_error()) > 0);
  CHECK(atdk_model_load(nullptr) == nullptr);
}

TEST_CASE("detector handles score and attack through the C surface") {
  Artifacts art;

  atdk_detector* det = atdk_detector_open("md", art.detector.c_str());
  REQUIRE(det != nullptr);

  size_t input_size = 0;
  REQUIRE(atdk_detector_input_size(det, &input_size) == ATDK_OK);
  CHECK(input_size == 2);

  // training-blob centers score far above a distant outlier
  const double points[] = {0.0, 0.0, 3.0, 3.0, -6.0, 6.0};
  double scores[3] = {0, 0, 0};
  REQUIRE(atdk_detector_score(det, points, 3, 2, scores) == ATDK_OK);
  CHECK(scores[0] > scores[2]);
  CHECK(scores[1] > scores[2]);

  // attacking in-role samples pushes their scores down, inside the ball
  const double in_points[] = {0.1, -0.1, 2.9, 3.1};
  double adv[4] = {0, 0, 0, 0};
  const double eps = 0.25;
  REQUIRE(atdk_detector_attack(det, in_points, 2, 2, eps, 5, 1, 0.0, 0.0, 9,
                               adv) == ATDK_OK);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(adv[i] - in_points[i]) <= eps + 1e-12);
  }
  double attacked[2] = {0, 0};
  REQUIRE(atdk_detector_score(det, adv, 2, 2, attacked) == ATDK_OK);
  double clean[2] = {0, 0};
  REQUIRE(atdk_detector_score(det, in_points, 2, 2, clean) == ATDK_OK);
  CHECK(attacked[0] < clean[0]);
  CHECK(attacked[1] < clean[1]);

  // out-role attacks push scores up instead
  const double out_point[] = {-6.0, 6.0};
  double adv_out[2] = {0, 0};
  REQUIRE(atdk_detector_attack(det, out_point, 1, 2, eps, 5, 0, 0.0, 0.0, 9,
                               adv_out) == ATDK_OK);
  double raised = 0.0, base = 0.0;
  REQUIRE(atdk_detector_score(det, adv_out, 1, 2, &raised) == ATDK_OK);
  REQUIRE(atdk_detector_score(det, out_point, 1, 2, &base) == ATDK_OK);
  CHECK(raised > base);

  // same seed, same craft
  double again[4] = {0, 0, 0, 0};
  REQUIRE(atdk_detector_attack(det, in_points, 2, 2, eps, 5, 1, 0.0, 0.0, 9,
                               again) == ATDK_OK);
  for (int i = 0; i < 4; ++i) CHECK(again[i] == adv[i]);

  atdk_detector_free(det);
  atdk_detector_free(nullptr);

  CHECK(atdk_detector_open("energy", art.detector.c_str()) == nullptr);
  CHECK(std::strlen(atdk_last_error()) > 0);
  CHECK(atdk_detector_open("md", art.dir.str("absent.json").c_str()) ==
        nullptr);
  CHECK(atdk_detector_open(nullptr, nullptr) == nullptr);
}

TEST_CASE("msp detectors open straight from a checkpoint") {
  Artifacts art;
  atdk_detector* det = atdk_detector_open("msp", art.classifier.c_str());
  REQUIRE(det != nullptr);

  // msp is a softmax maximum, so it lives in [1/K, 1]; confidence must dip
  // somewhere strictly between the class centers, where the decision
  // boundary crosses the segment
  const int n = 61;
  std::vector<double> segment(2 * n);
  for (int i = 0; i < n; ++i) {
    const double t = 3.0 * i / (n - 1);
    segment[2 * i] = t;
    segment[2 * i + 1] = t;
  }
  std::vector<double> scores(n);
  REQUIRE(atdk_detector_score(det, segment.data(), n, 2, scores.data()) ==
          ATDK_OK);
  int lowest = 0;
  for (int i = 0; i < n; ++i) {
    CHECK(scores[i] >= 0.5);
    CHECK(scores[i] <= 1.0);
    if (scores[i] < scores[lowest]) lowest = i;
  }
  CHECK(lowest > 0);
  CHECK(lowest < n - 1);
  CHECK(scores[lowest] < scores.front());
  CHECK(scores[lowest] < scores.back());
  atdk_detector_free(det);
}

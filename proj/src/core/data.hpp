#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace atdkit {

// Which side of the detection problem a dataset plays. In-roles and
// out-roles must never share samples; the runner enforces disjoint names.
enum class Role { InTrain, InVal, InTest, OutExposure, OutVal, OutTest };

const char* role_name(Role role);
Role role_from_name(const std::string& name);

struct SampleBatch {
  std::string name;
  Role role = Role::InTrain;
  Tensor inputs;                 // [N, ...]
  std::vector<int> labels;       // empty for unlabeled sets
  std::vector<std::string> ids;  // "<name>#<index>"
  bool pixel_space = false;      // true constrains values to [0, 1]

  std::size_t size() const { return inputs.batch(); }
  bool labeled() const { return !labels.empty(); }
};

struct DatasetSpec {
  std::string name;
  Role role = Role::InTrain;
  // "blobs" | "rects" | "toy:<layout>:<in|out>" | "images:<variant>" |
  // "csv:<path>" | "fetch:<id>"
  std::string source;
  nlohmann::json params = nlohmann::json::object();
  std::optional<std::size_t> cap;
  std::uint64_t seed = 0;
};

// Materializes, validates (finite values; [0, 1] for pixel sources; label
// ranges), caps, and assigns ids. Deterministic in (spec, seed).
SampleBatch load_dataset(const DatasetSpec& spec);

// Mini-batch views in shuffled (or sequential, when rng is null) order.
// The trailing partial batch is kept.
std::vector<SampleBatch> make_batches(const SampleBatch& data,
                                      std::size_t batch_size,
                                      RngStream* shuffle_rng);

// --- 2D toy layouts ---

struct Rect {
  double lo_x, lo_y, hi_x, hi_y;
  int label = 0;

  bool contains(double x, double y) const {
    return x >= lo_x && x <= hi_x && y >= lo_y && y <= hi_y;
  }
};

// Axis-aligned rectangles for the planar studies. in_rects carry class
// labels; out_rects are unlabeled outlier regions. The frame is the union
// bounding box padded by two attack budgets, so every reachable perturbed
// point stays on the plotted canvas.
struct ToyLayout {
  std::string name;
  double epsilon = 1.0;
  std::vector<Rect> in_rects;
  std::vector<Rect> out_rects;
  Rect frame{0, 0, 0, 0, 0};

  std::size_t num_classes() const;
  bool inside_any_in(double x, double y, double margin) const;
};

// Registry: "pair" (one in-region, one out-region, for the detector-toggle
// study) and "triad" (three in-classes, two out-regions, for the multi-class
// studies). Rejects unknown names and verifies region disjointness.
ToyLayout toy_layout(const std::string& name, double epsilon);

SampleBatch sample_in_rects(const ToyLayout& layout, std::size_t n_per_rect,
                            std::uint64_t seed, const std::string& name,
                            Role role);
SampleBatch sample_out_rects(const ToyLayout& layout, std::size_t n_per_rect,
                             std::uint64_t seed, const std::string& name,
                             Role role);

// Draws fresh pseudo-outliers uniformly over the frame, excluding the
// in-rectangles dilated by 1.5 * epsilon, so simulated outliers stay
// separable from the in-region even under perturbation. Call count is
// exposed so training loops can prove they resample every epoch.
class ToyResampler {
public:
  ToyResampler(ToyLayout layout, std::uint64_t seed);

  Tensor sample(std::size_t n);
  std::size_t calls() const { return calls_; }
  const ToyLayout& layout() const { return layout_; }

private:
  ToyLayout layout_;
  RngStream rng_;
  std::size_t calls_ = 0;
};

}  // namespace atdkit

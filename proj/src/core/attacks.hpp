#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "core/tensor.hpp"

namespace atdkit {

// Objective evaluated on a whole batch: per-sample values plus the gradient
// of their sum w.r.t. the input (each row is its own sample's gradient).
struct ObjectiveEval {
  std::vector<double> values;
  Tensor grad;
};
using BatchObjective = std::function<ObjectiveEval(const Tensor&)>;

enum class Direction { Maximize, Minimize };

struct ClampRange {
  double lo;
  double hi;
};

struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  int steps = 10;
  // <= 0 selects the default 2.5 * epsilon / steps.
  double step_size = 0.0;
  bool rand_init = true;
  int restarts = 1;
  // Unset means the input space is unbounded.
  std::optional<ClampRange> clamp;

  double resolved_step_size() const;
  void validate() const;
};

// Optional per-step record of the batch-mean objective value.
struct AttackTrace {
  struct Row {
    int restart;
    int step;  // 0 is the value at the (possibly randomized) start
    double mean_objective;
  };
  std::vector<Row> rows;
};

// Nearest point to v under |w - x| <= eps and lo <= w <= hi, with both
// constraints holding exactly on the stored doubles (including the
// subtraction w - x as evaluated in double arithmetic). Assumes x itself
// satisfies the box.
double project_step(double x, double v, double eps, double lo, double hi);

// Single-step sign attack: one gradient, move each coordinate by
// eps * sign(g) (sign(0) = 0), project onto the box.
Tensor fgsm(const Tensor& x, const BatchObjective& objective, Direction dir,
            double epsilon, const std::optional<ClampRange>& clamp);

// Iterated sign attack with per-step projection onto the eps-ball and box.
// Random starts draw per coordinate from uniform(-eps, eps). With several
// restarts, each restart derives its own stream from (seed, restart index)
// and the best final objective per sample wins.
Tensor pgd(const Tensor& x, const BatchObjective& objective, Direction dir,
           const AttackConfig& cfg, std::uint64_t seed,
           AttackTrace* trace = nullptr);

}  // namespace atdkit

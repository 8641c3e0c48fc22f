#pragma once

#include <span>
#include <vector>

#include "core/tensor.hpp"

namespace atdkit::loss {

// Numerically stable helpers; all batch reductions are arithmetic means.

void softmax_row(std::span<const double> logits, std::span<double> probs);
Tensor softmax_rows(const Tensor& logits);

double sigmoid(double x);
// log(sigmoid(x)) = -softplus(-x), stable for large |x|.
double log_sigmoid(double x);

struct LossGrad {
  double value = 0.0;
  Tensor grad;  // d(value)/d(logits)
};

// Per-sample objective values plus the gradient of their SUM. Attack loops
// consume this form: each sample's objective is independent, so the sum's
// gradient carries each sample's own gradient in its rows.
struct PerSampleLossGrad {
  std::vector<double> values;
  Tensor grad;  // d(sum of values)/d(logits)
};

// Cross-entropy against integer labels.
PerSampleLossGrad ce_labels_per_sample(const Tensor& logits,
                                       std::span<const int> labels);
LossGrad ce_labels(const Tensor& logits, std::span<const int> labels);

// Cross-entropy against the uniform distribution over classes, as a
// soft-target cross-entropy: -(1/K) * sum_k log p_k per sample.
PerSampleLossGrad ce_uniform_per_sample(const Tensor& logits);
LossGrad ce_uniform(const Tensor& logits);

double accuracy(const Tensor& logits, std::span<const int> labels);
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace atdkit::loss

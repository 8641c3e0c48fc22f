#include "core/losses.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace atdkit::loss {
namespace {

void check_labels(const Tensor& logits, std::span<const int> labels) {
  require(logits.rank() == 2, ErrorCode::Contract, "loss: logits must be [N, K]");
  require(labels.size() == logits.batch(), ErrorCode::Contract,
          "loss: ", labels.size(), " labels for batch ", logits.batch());
  const int k = static_cast<int>(logits.dim(1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < k, ErrorCode::Contract,
            "loss: label ", labels[i], " out of range at sample ", i);
  }
}

}  // namespace

void softmax_row(std::span<const double> logits, std::span<double> probs) {
  double hi = logits[0];
  for (double v : logits) hi = std::max(hi, v);
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    probs[j] = std::exp(logits[j] - hi);
    z += probs[j];
  }
  for (std::size_t j = 0; j < logits.size(); ++j) probs[j] /= z;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p(logits.shape());
  for (std::size_t i = 0; i < logits.batch(); ++i) {
    softmax_row(logits.row(i), p.row(i));
  }
  return p;
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

double log_sigmoid(double x) {
  // -softplus(-x), split by sign to avoid overflow in exp.
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

PerSampleLossGrad ce_labels_per_sample(const Tensor& logits,
                                       std::span<const int> labels) {
  check_labels(logits, labels);
  const std::size_t n = logits.batch(), k = logits.dim(1);
  PerSampleLossGrad out;
  out.values.resize(n);
  out.grad = Tensor(logits.shape());
  std::vector<double> p(k);
  for (std::size_t i = 0; i < n; ++i) {
    auto li = logits.row(i);
    softmax_row(li, p);
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    // log p_y recomputed in log-space for stability.
    double hi = li[0];
    for (double v : li) hi = std::max(hi, v);
    double z = 0.0;
    for (double v : li) z += std::exp(v - hi);
    out.values[i] = -(li[y] - hi - std::log(z));
    auto gi = out.grad.row(i);
    for (std::size_t j = 0; j < k; ++j) gi[j] = p[j];
    gi[y] -= 1.0;
  }
  return out;
}

LossGrad ce_labels(const Tensor& logits, std::span<const int> labels) {
  PerSampleLossGrad per = ce_labels_per_sample(logits, labels);
  const double n = static_cast<double>(per.values.size());
  LossGrad out;
  for (double v : per.values) out.value += v;
  out.value /= n;
  out.grad = std::move(per.grad);
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] /= n;
  return out;
}

PerSampleLossGrad ce_uniform_per_sample(const Tensor& logits) {
  require(logits.rank() == 2, ErrorCode::Contract, "loss: logits must be [N, K]");
  const std::size_t n = logits.batch(), k = logits.dim(1);
  PerSampleLossGrad out;
  out.values.resize(n);
  out.grad = Tensor(logits.shape());
  std::vector<double> p(k);
  for (std::size_t i = 0; i < n; ++i) {
    auto li = logits.row(i);
    softmax_row(li, p);
    double hi = li[0];
    for (double v : li) hi = std::max(hi, v);
    double z = 0.0;
    for (double v : li) z += std::exp(v - hi);
    const double logz = std::log(z) + hi;
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += logz - li[j];
    out.values[i] = acc / static_cast<double>(k);
    auto gi = out.grad.row(i);
    const double u = 1.0 / static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j) gi[j] = p[j] - u;
  }
  return out;
}

LossGrad ce_uniform(const Tensor& logits) {
  PerSampleLossGrad per = ce_uniform_per_sample(logits);
  const double n = static_cast<double>(per.values.size());
  LossGrad out;
  for (double v : per.values) out.value += v;
  out.value /= n;
  out.grad = std::move(per.grad);
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] /= n;
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.batch());
  for (std::size_t i = 0; i < logits.batch(); ++i) {
    auto li = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < li.size(); ++j) {
      if (li[j] > li[best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  const std::vector<int> pred = argmax_rows(logits);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace atdkit::loss

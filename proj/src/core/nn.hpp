#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace atdkit {

// Layers cache whatever the matching backward pass needs, so forward and
// backward calls on one instance must pair up and must not interleave.
// No layer mixes information across the batch axis: per-sample outputs are
// computed row by row with identical arithmetic, so results do not depend on
// batch composition, in training or eval mode.
class Layer {
public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x) = 0;
  // Takes d(objective)/d(output), accumulates parameter gradients, returns
  // d(objective)/d(input).
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual void init_params(RngStream&) {}
  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::vector<Tensor*> param_grads() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Linear final : public Layer {
public:
  Linear(std::size_t in_dim, std::size_t out_dim);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  void init_params(RngStream& rng) override;
  std::vector<Tensor*> params() override { return {&w_, &b_}; }
  std::vector<Tensor*> param_grads() override { return {&gw_, &gb_}; }
  std::unique_ptr<Layer> clone() const override;

  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }

private:
  std::size_t in_, out_;
  Tensor w_, b_, gw_, gb_;  // w is [out, in]
  Tensor x_;
};

class Relu final : public Layer {
public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

private:
  Tensor x_;
};

class SigmoidLayer final : public Layer {
public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

private:
  Tensor y_;
};

// 2D convolution over [N, C, H, W], square kernel, zero padding.
class Conv2d final : public Layer {
public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
         std::size_t stride, std::size_t pad);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  void init_params(RngStream& rng) override;
  std::vector<Tensor*> params() override { return {&w_, &b_}; }
  std::vector<Tensor*> param_grads() override { return {&gw_, &gb_}; }
  std::unique_ptr<Layer> clone() const override;

private:
  std::size_t in_ch_, out_ch_, k_, stride_, pad_;
  Tensor w_, b_, gw_, gb_;  // w is [out_ch, in_ch, k, k]
  Tensor x_;
};

// [N, C, H, W] -> [N, C], mean over the spatial axes.
class GlobalAvgPool final : public Layer {
public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

private:
  std::vector<std::size_t> in_shape_;
};

class Flatten final : public Layer {
public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

private:
  std::vector<std::size_t> in_shape_;
};

class Sequential {
public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void init_params(RngStream& rng);

  std::vector<Tensor*> params();
  std::vector<Tensor*> param_grads();
  void zero_grads();

  Sequential clone() const;
  std::size_t num_layers() const { return layers_.size(); }

private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

std::size_t param_count(const std::vector<Tensor*>& params);
std::vector<double> flatten_values(const std::vector<Tensor*>& params);
void assign_values(const std::vector<Tensor*>& params,
                   std::span<const double> values);

// Order- and bit-sensitive fingerprint of parameter values; used to assert
// that supposedly frozen parameters never move.
std::uint64_t params_fingerprint(const std::vector<Tensor*>& params);

}  // namespace atdkit

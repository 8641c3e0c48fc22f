#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/nn.hpp"

namespace atdkit {

// Classifier = feature body + linear head. The body ends at the penultimate
// representation; detection methods hook either the features or the logits.
class ClassifierModel {
public:
  ClassifierModel() = default;
  ClassifierModel(std::string arch, Sequential body, Linear head,
                  std::vector<std::size_t> input_dims, std::size_t classes,
                  std::size_t feature_dim);

  // Forward passes cache activations for one matching backward call.
  Tensor features(const Tensor& x);
  Tensor logits(const Tensor& x);

  // Gradient w.r.t. the input of the matching forward call. Parameter
  // gradients accumulate as a side effect; zero_grads() clears them.
  Tensor backward_from_logits(const Tensor& grad_logits);
  Tensor backward_from_features(const Tensor& grad_features);

  std::vector<Tensor*> params();
  std::vector<Tensor*> param_grads();
  void zero_grads();

  // Training-vs-eval mode switch. No layer here changes behaviour with the
  // flag (batch independence by construction); the flag still gates a
  // contract: scoring paths insist on eval mode.
  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  const std::string& arch() const { return arch_; }
  const std::vector<std::size_t>& input_dims() const { return input_dims_; }
  std::size_t num_classes() const { return classes_; }
  std::size_t feature_dim() const { return feature_dim_; }

  ClassifierModel clone() const;

  Sequential& body() { return body_; }
  const Sequential& body() const { return body_; }
  Linear& head() { return head_; }

  // Reshapes [N, flat] to the model's input layout when needed.
  Tensor shape_input(const Tensor& x) const;

private:
  std::string arch_;
  Sequential body_;
  Linear head_{1, 1};
  std::vector<std::size_t> input_dims_;
  std::size_t classes_ = 0;
  std::size_t feature_dim_ = 0;
  bool training_ = true;
  bool head_forwarded_ = false;
};

// Arch specs:
//   "mlp[in,h1,...,hn]"  fully connected ReLU stack; feature dim = hn
//   "cnn-small"          4 conv blocks over [3, 32, 32], feature dim 64
ClassifierModel build_classifier(const std::string& arch, std::size_t classes,
                                 RngStream& init_rng);

// Frozen copy of a classifier body. Owns its parameters; nothing in the
// library ever steps them, and params_hash() lets callers prove it.
class FeatureExtractor {
public:
  FeatureExtractor() = default;

  static FeatureExtractor strip_head(const ClassifierModel& model,
                                     std::string provenance);

  Tensor features(const Tensor& x);
  Tensor backward(const Tensor& grad_features);

  const std::vector<std::size_t>& input_dims() const { return input_dims_; }
  std::size_t output_dim() const { return feature_dim_; }
  const std::string& arch() const { return arch_; }
  const std::string& provenance() const { return provenance_; }
  std::uint64_t params_hash() const;
  bool valid() const { return feature_dim_ > 0; }

  Tensor shape_input(const Tensor& x) const;

  Sequential& body() { return body_; }
  const Sequential& body() const { return body_; }

private:
  std::string arch_;
  std::string provenance_;
  Sequential body_;
  std::vector<std::size_t> input_dims_;
  std::size_t feature_dim_ = 0;
};

class Generator {
public:
  Generator() = default;
  Generator(Sequential net, std::size_t latent_dim, std::size_t output_dim,
            bool bounded_output);

  Tensor forward(const Tensor& z);
  Tensor backward(const Tensor& grad_out);

  std::vector<Tensor*> params() { return net_.params(); }
  std::vector<Tensor*> param_grads() { return net_.param_grads(); }
  void zero_grads() { net_.zero_grads(); }

  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  bool bounded_output() const { return bounded_; }

  Sequential& net() { return net_; }

private:
  Sequential net_;
  std::size_t latent_dim_ = 0;
  std::size_t output_dim_ = 0;
  bool bounded_ = false;
};

// bounded_output appends a sigmoid so samples land in (0, 1); used when the
// generator targets pixel space.
Generator build_generator(std::size_t latent_dim,
                          const std::vector<std::size_t>& hidden,
                          std::size_t output_dim, bool bounded_output,
                          RngStream& init_rng);

class Discriminator {
public:
  Discriminator() = default;
  Discriminator(Sequential net, std::size_t input_dim);

  // Raw logit per sample, shape [N].
  Tensor logit(const Tensor& x);
  Tensor backward(const Tensor& grad_logit);

  std::vector<double> probability(const Tensor& x);

  std::vector<Tensor*> params() { return net_.params(); }
  std::vector<Tensor*> param_grads() { return net_.param_grads(); }
  void zero_grads() { net_.zero_grads(); }

  std::size_t input_dim() const { return input_dim_; }
  Sequential& net() { return net_; }

  // Scoring paths demand eval mode; training loops flip this around their
  // update steps and validation passes.
  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

private:
  Sequential net_;
  std::size_t input_dim_ = 0;
  bool training_ = true;
};

Discriminator build_discriminator(std::size_t input_dim,
                                  const std::vector<std::size_t>& hidden,
                                  RngStream& init_rng);

// --- checkpoints ---

// Container format: magic, a JSON header (kind, arch, dims, step, metrics,
// config hash), then raw little-endian doubles for each parameter tensor.
// Round-trips are bit-exact.
struct Checkpoint {
  std::string kind;  // "classifier" | "extractor" | "generator" | "discriminator"
  std::string arch;
  std::vector<std::size_t> input_dims;
  std::size_t classes = 0;
  std::size_t feature_dim = 0;
  std::size_t latent_dim = 0;
  bool bounded_output = false;
  std::string provenance;
  std::uint64_t step = 0;
  std::map<std::string, double> metrics;
  std::string config_hash;
  std::vector<std::vector<double>> tensors;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint snapshot(ClassifierModel& model);
Checkpoint snapshot(const FeatureExtractor& extractor);
Checkpoint snapshot(Generator& gen);
Checkpoint snapshot(Discriminator& disc);

ClassifierModel restore_classifier(const Checkpoint& ckpt);
FeatureExtractor restore_extractor(const Checkpoint& ckpt);
Generator restore_generator(const Checkpoint& ckpt);
Discriminator restore_discriminator(const Checkpoint& ckpt);

ClassifierModel load_classifier(const std::filesystem::path& path);
FeatureExtractor load_extractor(const std::filesystem::path& path);

}  // namespace atdkit

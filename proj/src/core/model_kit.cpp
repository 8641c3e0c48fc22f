#include "core/model_kit.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "core/errors.hpp"

namespace atdkit {
namespace {

using nlohmann::json;

std::optional<std::vector<std::size_t>> parse_dim_list(const std::string& spec,
                                                       const std::string& prefix) {
  if (spec.size() < prefix.size() + 2 || spec.compare(0, prefix.size(), prefix) != 0 ||
      spec[prefix.size()] != '[' || spec.back() != ']') {
    return std::nullopt;
  }
  std::vector<std::size_t> dims;
  std::size_t at = prefix.size() + 1;
  while (at < spec.size() - 1) {
    std::size_t end = spec.find(',', at);
    if (end == std::string::npos || end > spec.size() - 1) end = spec.size() - 1;
    const std::string tok = spec.substr(at, end - at);
    char* rest = nullptr;
    const unsigned long v = std::strtoul(tok.c_str(), &rest, 10);
    if (rest == tok.c_str() || *rest != '\0' || v == 0) return std::nullopt;
    dims.push_back(static_cast<std::size_t>(v));
    at = end + 1;
  }
  if (dims.empty()) return std::nullopt;
  return dims;
}

Sequential mlp_stack(const std::vector<std::size_t>& dims) {
  Sequential body;
  body.add(std::make_unique<Flatten>());
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    body.add(std::make_unique<Linear>(dims[i], dims[i + 1]));
    body.add(std::make_unique<Relu>());
  }
  return body;
}

Sequential cnn_small_body() {
  Sequential body;
  body.add(std::make_unique<Conv2d>(3, 16, 3, 1, 1));
  body.add(std::make_unique<Relu>());
  body.add(std::make_unique<Conv2d>(16, 32, 3, 2, 1));
  body.add(std::make_unique<Relu>());
  body.add(std::make_unique<Conv2d>(32, 32, 3, 1, 1));
  body.add(std::make_unique<Relu>());
  body.add(std::make_unique<Conv2d>(32, 64, 3, 2, 1));
  body.add(std::make_unique<Relu>());
  body.add(std::make_unique<GlobalAvgPool>());
  return body;
}

}  // namespace

// --- ClassifierModel ---

ClassifierModel::ClassifierModel(std::string arch, Sequential body, Linear head,
                                 std::vector<std::size_t> input_dims,
                                 std::size_t classes, std::size_t feature_dim)
    : arch_(std::move(arch)),
      body_(std::move(body)),
      head_(std::move(head)),
      input_dims_(std::move(input_dims)),
      classes_(classes),
      feature_dim_(feature_dim) {}

Tensor ClassifierModel::shape_input(const Tensor& x) const {
  std::size_t flat = 1;
  for (std::size_t d : input_dims_) flat *= d;
  require(x.sample_size() == flat, ErrorCode::Contract,
          "model: input sample size ", x.sample_size(), ", expected ", flat);
  if (x.rank() == 1 + input_dims_.size()) return x;
  std::vector<std::size_t> shape{x.batch()};
  shape.insert(shape.end(), input_dims_.begin(), input_dims_.end());
  return x.reshaped(std::move(shape));
}

Tensor ClassifierModel::features(const Tensor& x) {
  head_forwarded_ = false;
  return body_.forward(shape_input(x));
}

Tensor ClassifierModel::logits(const Tensor& x) {
  Tensor z = body_.forward(shape_input(x));
  head_forwarded_ = true;
  return head_.forward(z);
}

Tensor ClassifierModel::backward_from_logits(const Tensor& grad_logits) {
  require(head_forwarded_, ErrorCode::Contract,
          "model: backward_from_logits without a logits() forward");
  return body_.backward(head_.backward(grad_logits));
}

Tensor ClassifierModel::backward_from_features(const Tensor& grad_features) {
  require(!head_forwarded_, ErrorCode::Contract,
          "model: backward_from_features without a features() forward");
  return body_.backward(grad_features);
}

std::vector<Tensor*> ClassifierModel::params() {
  std::vector<Tensor*> out = body_.params();
  for (Tensor* p : head_.params()) out.push_back(p);
  return out;
}

std::vector<Tensor*> ClassifierModel::param_grads() {
  std::vector<Tensor*> out = body_.param_grads();
  for (Tensor* g : head_.param_grads()) out.push_back(g);
  return out;
}

void ClassifierModel::zero_grads() {
  for (Tensor* g : param_grads()) g->fill(0.0);
}

ClassifierModel ClassifierModel::clone() const {
  ClassifierModel copy;
  copy.arch_ = arch_;
  copy.body_ = body_.clone();
  auto head_clone = head_.clone();
  copy.head_ = std::move(*static_cast<Linear*>(head_clone.get()));
  copy.input_dims_ = input_dims_;
  copy.classes_ = classes_;
  copy.feature_dim_ = feature_dim_;
  copy.training_ = training_;
  return copy;
}

ClassifierModel build_classifier(const std::string& arch, std::size_t classes,
                                 RngStream& init_rng) {
  require(classes >= 2, ErrorCode::Config, "model: need at least 2 classes");
  if (auto dims = parse_dim_list(arch, "mlp")) {
    Sequential body = mlp_stack(*dims);
    Linear head(dims->back(), classes);
    ClassifierModel model(arch, std::move(body), std::move(head),
                          {dims->front()}, classes, dims->back());
    model.body().init_params(init_rng);
    model.head().init_params(init_rng);
    return model;
  }
  if (arch == "cnn-small") {
    Sequential body = cnn_small_body();
    Linear head(64, classes);
    ClassifierModel model(arch, std::move(body), std::move(head), {3, 32, 32},
                          classes, 64);
    model.body().init_params(init_rng);
    model.head().init_params(init_rng);
    return model;
  }
  raise(ErrorCode::Config, "model: unknown arch '", arch,
        "' (expected mlp[...] or cnn-small)");
}

// --- FeatureExtractor ---

FeatureExtractor FeatureExtractor::strip_head(const ClassifierModel& model,
                                              std::string provenance) {
  FeatureExtractor fx;
  fx.arch_ = model.arch();
  fx.provenance_ = std::move(provenance);
  fx.body_ = model.body().clone();
  fx.input_dims_ = model.input_dims();
  fx.feature_dim_ = model.feature_dim();
  return fx;
}

Tensor FeatureExtractor::shape_input(const Tensor& x) const {
  std::size_t flat = 1;
  for (std::size_t d : input_dims_) flat *= d;
  require(x.sample_size() == flat, ErrorCode::Contract,
          "extractor: input sample size ", x.sample_size(), ", expected ", flat);
  if (x.rank() == 1 + input_dims_.size()) return x;
  std::vector<std::size_t> shape{x.batch()};
  shape.insert(shape.end(), input_dims_.begin(), input_dims_.end());
  return x.reshaped(std::move(shape));
}

Tensor FeatureExtractor::features(const Tensor& x) {
  require(valid(), ErrorCode::Contract, "extractor: not initialized");
  return body_.forward(shape_input(x));
}

Tensor FeatureExtractor::backward(const Tensor& grad_features) {
  return body_.backward(grad_features);
}

std::uint64_t FeatureExtractor::params_hash() const {
  auto& self = const_cast<FeatureExtractor&>(*this);
  return params_fingerprint(self.body_.params());
}

// --- Generator ---

Generator::Generator(Sequential net, std::size_t latent_dim,
                     std::size_t output_dim, bool bounded_output)
    : net_(std::move(net)),
      latent_dim_(latent_dim),
      output_dim_(output_dim),
      bounded_(bounded_output) {}

Tensor Generator::forward(const Tensor& z) {
  require(z.sample_size() == latent_dim_, ErrorCode::Contract,
          "generator: latent width ", z.sample_size(), ", expected ", latent_dim_);
  return net_.forward(z);
}

Tensor Generator::backward(const Tensor& grad_out) {
  return net_.backward(grad_out);
}

Generator build_generator(std::size_t latent_dim,
                          const std::vector<std::size_t>& hidden,
                          std::size_t output_dim, bool bounded_output,
                          RngStream& init_rng) {
  require(latent_dim > 0 && output_dim > 0, ErrorCode::Config,
          "generator: zero dimension");
  Sequential net;
  std::size_t prev = latent_dim;
  for (std::size_t h : hidden) {
    net.add(std::make_unique<Linear>(prev, h));
    net.add(std::make_unique<Relu>());
    prev = h;
  }
  net.add(std::make_unique<Linear>(prev, output_dim));
  if (bounded_output) net.add(std::make_unique<SigmoidLayer>());
  net.init_params(init_rng);
  return Generator(std::move(net), latent_dim, output_dim, bounded_output);
}

// --- Discriminator ---

Discriminator::Discriminator(Sequential net, std::size_t input_dim)
    : net_(std::move(net)), input_dim_(input_dim) {}

Tensor Discriminator::logit(const Tensor& x) {
  require(x.sample_size() == input_dim_, ErrorCode::Contract,
          "discriminator: input width ", x.sample_size(), ", expected ",
          input_dim_);
  Tensor y = net_.forward(x);
  return y.reshaped({y.batch()});
}

Tensor Discriminator::backward(const Tensor& grad_logit) {
  return net_.backward(grad_logit.reshaped({grad_logit.size(), 1}));
}

std::vector<double> Discriminator::probability(const Tensor& x) {
  Tensor l = logit(x);
  std::vector<double> out(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) {
    const double v = l[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
  return out;
}

Discriminator build_discriminator(std::size_t input_dim,
                                  const std::vector<std::size_t>& hidden,
                                  RngStream& init_rng) {
  require(input_dim > 0, ErrorCode::Config, "discriminator: zero input dim");
  Sequential net;
  std::size_t prev = input_dim;
  for (std::size_t h : hidden) {
    net.add(std::make_unique<Linear>(prev, h));
    net.add(std::make_unique<Relu>());
    prev = h;
  }
  net.add(std::make_unique<Linear>(prev, 1));
  net.init_params(init_rng);
  return Discriminator(std::move(net), input_dim);
}

// --- checkpoints ---

namespace {

constexpr char kMagic[8] = {'A', 'T', 'D', 'K', 'C', 'K', 'P', '1'};

std::vector<std::vector<double>> collect_tensors(const std::vector<Tensor*>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const Tensor* p : params) {
    out.emplace_back(p->data(), p->data() + p->size());
  }
  return out;
}

void assign_tensors(const std::vector<Tensor*>& params,
                    const std::vector<std::vector<double>>& tensors) {
  require(params.size() == tensors.size(), ErrorCode::Contract,
          "checkpoint: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->size() == tensors[i].size(), ErrorCode::Contract,
            "checkpoint: tensor ", i, " size mismatch");
    std::copy(tensors[i].begin(), tensors[i].end(), params[i]->data());
  }
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json header{
      {"kind", ckpt.kind},
      {"arch", ckpt.arch},
      {"input_dims", ckpt.input_dims},
      {"classes", ckpt.classes},
      {"feature_dim", ckpt.feature_dim},
      {"latent_dim", ckpt.latent_dim},
      {"bounded_output", ckpt.bounded_output},
      {"provenance", ckpt.provenance},
      {"step", ckpt.step},
      {"metrics", ckpt.metrics},
      {"config_hash", ckpt.config_hash},
  };
  std::vector<std::size_t> sizes;
  for (const auto& t : ckpt.tensors) sizes.push_back(t.size());
  header["tensor_sizes"] = sizes;
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "checkpoint: cannot open ", path.string(),
          " for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t head_len = head.size();
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& t : ckpt.tensors) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  require(out.good(), ErrorCode::Io, "checkpoint: write failed for ",
          path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "checkpoint: cannot open ", path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::equal(magic, magic + 8, kMagic), ErrorCode::Io,
          "checkpoint: bad magic in ", path.string());
  std::uint64_t head_len = 0;
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  require(in.good() && head_len < (1ULL << 24), ErrorCode::Io,
          "checkpoint: corrupt header length in ", path.string());
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  require(in.good(), ErrorCode::Io, "checkpoint: truncated header in ",
          path.string());

  json header = json::parse(head, nullptr, false);
  require(!header.is_discarded(), ErrorCode::Io,
          "checkpoint: unparseable header in ", path.string());
  Checkpoint ckpt;
  ckpt.kind = header.at("kind").get<std::string>();
  ckpt.arch = header.at("arch").get<std::string>();
  ckpt.input_dims = header.at("input_dims").get<std::vector<std::size_t>>();
  ckpt.classes = header.at("classes").get<std::size_t>();
  ckpt.feature_dim = header.at("feature_dim").get<std::size_t>();
  ckpt.latent_dim = header.at("latent_dim").get<std::size_t>();
  ckpt.bounded_output = header.at("bounded_output").get<bool>();
  ckpt.provenance = header.at("provenance").get<std::string>();
  ckpt.step = header.at("step").get<std::uint64_t>();
  ckpt.metrics = header.at("metrics").get<std::map<std::string, double>>();
  ckpt.config_hash = header.at("config_hash").get<std::string>();
  const auto sizes = header.at("tensor_sizes").get<std::vector<std::size_t>>();
  for (std::size_t sz : sizes) {
    std::vector<double> t(sz);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sz * sizeof(double)));
    require(in.good(), ErrorCode::Io, "checkpoint: truncated tensor data in ",
            path.string());
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

Checkpoint snapshot(ClassifierModel& model) {
  Checkpoint ckpt;
  ckpt.kind = "classifier";
  ckpt.arch = model.arch();
  ckpt.input_dims = model.input_dims();
  ckpt.classes = model.num_classes();
  ckpt.feature_dim = model.feature_dim();
  ckpt.tensors = collect_tensors(model.params());
  return ckpt;
}

Checkpoint snapshot(const FeatureExtractor& extractor) {
  Checkpoint ckpt;
  ckpt.kind = "extractor";
  ckpt.arch = extractor.arch();
  ckpt.input_dims = extractor.input_dims();
  ckpt.feature_dim = extractor.output_dim();
  ckpt.provenance = extractor.provenance();
  auto& body = const_cast<FeatureExtractor&>(extractor).body();
  ckpt.tensors = collect_tensors(body.params());
  return ckpt;
}

Checkpoint snapshot(Generator& gen) {
  Checkpoint ckpt;
  ckpt.kind = "generator";
  ckpt.arch = "gmlp";
  ckpt.latent_dim = gen.latent_dim();
  ckpt.feature_dim = gen.output_dim();
  ckpt.bounded_output = gen.bounded_output();
  ckpt.tensors = collect_tensors(gen.params());
  return ckpt;
}

Checkpoint snapshot(Discriminator& disc) {
  Checkpoint ckpt;
  ckpt.kind = "discriminator";
  ckpt.arch = "dmlp";
  ckpt.input_dims = {disc.input_dim()};
  ckpt.tensors = collect_tensors(disc.params());
  return ckpt;
}

namespace {

std::vector<std::size_t> linear_widths(const std::vector<std::vector<double>>& tensors,
                                       std::size_t input_dim) {
  // Tensors alternate weight/bias per Linear; recover hidden widths from the
  // bias sizes, dropping the final output layer.
  std::vector<std::size_t> hidden;
  for (std::size_t i = 1; i + 2 < tensors.size(); i += 2) {
    hidden.push_back(tensors[i].size());
  }
  (void)input_dim;
  return hidden;
}

}  // namespace

ClassifierModel restore_classifier(const Checkpoint& ckpt) {
  require(ckpt.kind == "classifier", ErrorCode::Contract,
          "checkpoint: expected classifier, got ", ckpt.kind);
  RngStream dummy(0);
  ClassifierModel model = build_classifier(ckpt.arch, ckpt.classes, dummy);
  assign_tensors(model.params(), ckpt.tensors);
  model.set_training(false);
  return model;
}

FeatureExtractor restore_extractor(const Checkpoint& ckpt) {
  if (ckpt.kind == "classifier") {
    ClassifierModel model = restore_classifier(ckpt);
    return FeatureExtractor::strip_head(model, "classifier-checkpoint");
  }
  require(ckpt.kind == "extractor", ErrorCode::Contract,
          "checkpoint: expected extractor, got ", ckpt.kind);
  RngStream dummy(0);
  // Rebuild via a classifier of the same arch, then strip; head params are
  // freshly initialized and discarded.
  ClassifierModel shell = build_classifier(ckpt.arch, 2, dummy);
  FeatureExtractor fx = FeatureExtractor::strip_head(shell, ckpt.provenance);
  assign_tensors(fx.body().params(), ckpt.tensors);
  return fx;
}

Generator restore_generator(const Checkpoint& ckpt) {
  require(ckpt.kind == "generator", ErrorCode::Contract,
          "checkpoint: expected generator, got ", ckpt.kind);
  RngStream dummy(0);
  Generator gen = build_generator(
      ckpt.latent_dim, linear_widths(ckpt.tensors, ckpt.latent_dim),
      ckpt.feature_dim, ckpt.bounded_output, dummy);
  assign_tensors(gen.params(), ckpt.tensors);
  return gen;
}

Discriminator restore_discriminator(const Checkpoint& ckpt) {
  require(ckpt.kind == "discriminator", ErrorCode::Contract,
          "checkpoint: expected discriminator, got ", ckpt.kind);
  require(!ckpt.input_dims.empty(), ErrorCode::Contract,
          "checkpoint: discriminator missing input dims");
  RngStream dummy(0);
  Discriminator disc = build_discriminator(
      ckpt.input_dims[0], linear_widths(ckpt.tensors, ckpt.input_dims[0]), dummy);
  assign_tensors(disc.params(), ckpt.tensors);
  return disc;
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
  return restore_classifier(read_checkpoint(path));
}

FeatureExtractor load_extractor(const std::filesystem::path& path) {
  return restore_extractor(read_checkpoint(path));
}

}  // namespace atdkit

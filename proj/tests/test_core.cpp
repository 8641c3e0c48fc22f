#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "core/hash.hpp"
#include "core/losses.hpp"
#include "core/model_kit.hpp"
#include "core/nn.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "core/textio.hpp"
#include "support.hpp"

using namespace atdkit;

TEST_CASE("tensor shape accounting") {
  Tensor t({3, 4, 5});
  CHECK(t.rank() == 3);
  CHECK(t.batch() == 3);
  CHECK(t.sample_size() == 20);
  CHECK(t.size() == 60);
  t.fill(1.5);
  CHECK(t[59] == 1.5);

  auto row = t.row(2);
  CHECK(row.size() == 20);
  row[0] = -2.0;
  CHECK(t[40] == -2.0);

  Tensor flat = t.reshaped({3, 20});
  CHECK(flat.rank() == 2);
  CHECK(flat[40] == -2.0);

  Tensor slice = t.slice_rows(1, 3);  // half-open [1, 3)
  CHECK(slice.batch() == 2);
  CHECK(slice[20] == -2.0);  // former row 2, now row 1

  const std::vector<std::size_t> pick = {2, 0};
  Tensor picked = t.take_rows(pick);
  CHECK(picked.batch() == 2);
  CHECK(picked[0] == -2.0);

  CHECK(t.all_finite());
  t[0] = std::nan("");
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("tensor concat_rows stacks batches") {
  Tensor a({2, 3});
  Tensor b({1, 3});
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = double(i);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = 100.0 + double(i);
  Tensor c = concat_rows({&a, &b});
  CHECK(c.batch() == 3);
  CHECK(c[0] == 0.0);
  CHECK(c[6] == 100.0);
}

TEST_CASE("rng streams are deterministic and tag-separated") {
  RngStream a(42);
  RngStream b(42);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c = RngStream::derive(42, "init");
  RngStream d = RngStream::derive(42, "data");
  CHECK(c.next_u64() != d.next_u64());

  // Same tag, different index: also distinct.
  CHECK(mix_seed(42, "epoch", 0) != mix_seed(42, "epoch", 1));
  CHECK(mix_seed(42, "epoch", 0) == mix_seed(42, "epoch", 0));

  RngStream u(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform(-0.5, 2.0);
    CHECK(x >= -0.5);
    CHECK(x < 2.0);
  }
  RngStream n(7);
  double mean = 0.0;
  const int kDraws = 20000;
  for (int i = 0; i < kDraws; ++i) mean += n.normal();
  mean /= kDraws;
  CHECK(std::abs(mean) < 0.05);

  RngStream idx(9);
  std::set<std::size_t> seen;
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = idx.index(13);
    CHECK(k < 13);
    seen.insert(k);
  }
  CHECK(seen.size() == 13);  // all residues reachable

  // shuffle is a permutation
  auto perm = iota_indices(50);
  RngStream s(11);
  s.shuffle(perm);
  auto sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

namespace {

// Loss used for layer gradient checks: a fixed random weighting of every
// output element, so d(loss)/d(output) is just the weight tensor.
double weighted_sum(const Tensor& y, const Tensor& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * w[i];
  return acc;
}

void check_layer_gradients(Layer& layer, const Tensor& x, std::uint32_t wseed) {
  Tensor y0 = layer.forward(x);
  Tensor w = testsup::random_tensor(y0.shape(), wseed);

  Tensor input = x;
  Tensor out = layer.forward(input);
  Tensor grad_in = layer.backward(w);

  auto loss_now = [&]() { return weighted_sum(layer.forward(input), w); };

  // input gradient
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double fd = testsup::fd_slot(loss_now, &input[i]);
    CHECK(testsup::rel_err(grad_in[i], fd) < 1e-5);
  }
  // parameter gradient (backward above already populated it)
  auto params = layer.params();
  auto grads = layer.param_grads();
  REQUIRE(params.size() == grads.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->size(); ++i) {
      const double fd = testsup::fd_slot(loss_now, &(*params[p])[i]);
      CHECK(testsup::rel_err((*grads[p])[i], fd) < 1e-5);
    }
  }
}

}  // namespace

TEST_CASE("linear layer gradients match finite differences") {
  RngStream init(3);
  Linear lin(4, 3);
  lin.init_params(init);
  Tensor x = testsup::random_tensor({5, 4}, 100);
  check_layer_gradients(lin, x, 101);
}

TEST_CASE("relu gradients match finite differences") {
  Relu relu;
  // Keep activations away from the kink so finite differences are valid.
  Tensor x = testsup::random_tensor({6, 5}, 102);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) < 0.05) x[i] = 0.1;
  }
  check_layer_gradients(relu, x, 103);
}

TEST_CASE("sigmoid gradients match finite differences") {
  SigmoidLayer sig;
  Tensor x = testsup::random_tensor({4, 3}, 104, -3.0, 3.0);
  check_layer_gradients(sig, x, 105);
}

TEST_CASE("conv2d gradients match finite differences") {
  RngStream init(5);
  Conv2d conv(2, 3, 3, 1, 1);
  conv.init_params(init);
  Tensor x = testsup::random_tensor({2, 2, 5, 5}, 106);
  check_layer_gradients(conv, x, 107);
}

TEST_CASE("conv2d stride and padding shapes") {
  RngStream init(6);
  Conv2d conv(1, 2, 3, 2, 1);
  conv.init_params(init);
  Tensor x = testsup::random_tensor({1, 1, 7, 7}, 108);
  Tensor y = conv.forward(x);
  REQUIRE(y.rank() == 4);
  CHECK(y.dim(0) == 1);
  CHECK(y.dim(1) == 2);
  CHECK(y.dim(2) == 4);  // (7 + 2*1 - 3)/2 + 1
  CHECK(y.dim(3) == 4);
}

TEST_CASE("global average pool and flatten gradients") {
  GlobalAvgPool pool;
  Tensor x = testsup::random_tensor({2, 3, 4, 4}, 109);
  check_layer_gradients(pool, x, 110);

  Flatten flat;
  Tensor x2 = testsup::random_tensor({2, 3, 2, 2}, 111);
  check_layer_gradients(flat, x2, 112);
}

TEST_CASE("sequential composes forward and backward") {
  RngStream init(8);
  Sequential net;
  net.add(std::make_unique<Linear>(3, 8));
  net.add(std::make_unique<Relu>());
  net.add(std::make_unique<Linear>(8, 2));
  net.init_params(init);

  Tensor x = testsup::random_tensor({4, 3}, 113);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) < 0.05) x[i] = 0.1;
  }
  Tensor y = net.forward(x);
  REQUIRE(y.batch() == 4);
  REQUIRE(y.sample_size() == 2);

  Tensor w = testsup::random_tensor(y.shape(), 114);
  net.zero_grads();
  net.forward(x);
  Tensor gin = net.backward(w);

  Tensor input = x;
  auto loss_now = [&]() { return weighted_sum(net.forward(input), w); };
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double fd = testsup::fd_slot(loss_now, &input[i]);
    CHECK(testsup::rel_err(gin[i], fd) < 1e-4);
  }

  // zero_grads really clears
  net.zero_grads();
  for (auto* g : net.param_grads()) {
    for (std::size_t i = 0; i < g->size(); ++i) CHECK((*g)[i] == 0.0);
  }

  // clone is independent
  Sequential copy = net.clone();
  auto p0 = net.params();
  auto p1 = copy.params();
  REQUIRE(p0.size() == p1.size());
  (*p1[0])[0] += 1.0;
  CHECK((*p0[0])[0] != (*p1[0])[0]);
}

TEST_CASE("params fingerprint tracks values") {
  RngStream init(12);
  Sequential net;
  net.add(std::make_unique<Linear>(2, 2));
  net.init_params(init);
  const auto before = params_fingerprint(net.params());
  auto vals = flatten_values(net.params());
  vals[0] += 1e-9;
  assign_values(net.params(), vals);
  CHECK(params_fingerprint(net.params()) != before);
  vals[0] -= 1e-9;
  assign_values(net.params(), vals);
  CHECK(params_fingerprint(net.params()) == before);
}

TEST_CASE("softmax cross entropy values and gradients") {
  Tensor logits = testsup::random_tensor({5, 4}, 120, -2.0, 2.0);
  std::vector<int> labels = {0, 3, 1, 2, 3};

  auto lg = loss::ce_labels(logits, labels);

  // value oracle: -log softmax[label], averaged
  double want = 0.0;
  for (std::size_t r = 0; r < 5; ++r) {
    auto row = logits.row(r);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    want += -(row[labels[r]] - mx - std::log(z));
  }
  want /= 5.0;
  CHECK(testsup::rel_err(lg.value, want) < 1e-12);

  Tensor x = logits;
  auto value_now = [&]() { return loss::ce_labels(x, labels).value; };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fd = testsup::fd_slot(value_now, &x[i]);
    CHECK(testsup::rel_err(lg.grad[i], fd) < 1e-5);
  }
}

TEST_CASE("uniform-target cross entropy gradient") {
  Tensor logits = testsup::random_tensor({4, 3}, 121, -2.0, 2.0);
  auto lg = loss::ce_uniform(logits);

  // at a uniform row the loss is log K and the gradient vanishes
  Tensor flat({1, 3});
  flat.fill(0.7);
  auto at_uniform = loss::ce_uniform(flat);
  CHECK(testsup::rel_err(at_uniform.value, std::log(3.0)) < 1e-12);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(at_uniform.grad[i]) < 1e-15);

  Tensor x = logits;
  auto value_now = [&]() { return loss::ce_uniform(x).value; };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fd = testsup::fd_slot(value_now, &x[i]);
    CHECK(testsup::rel_err(lg.grad[i], fd) < 1e-5);
  }
}

TEST_CASE("per-sample losses sum to the batch loss") {
  Tensor logits = testsup::random_tensor({6, 5}, 122, -1.5, 1.5);
  std::vector<int> labels = {4, 0, 1, 2, 3, 1};

  auto per = loss::ce_labels_per_sample(logits, labels);
  auto agg = loss::ce_labels(logits, labels);
  REQUIRE(per.values.size() == 6);
  const double sum = std::accumulate(per.values.begin(), per.values.end(), 0.0);
  CHECK(testsup::rel_err(sum / 6.0, agg.value) < 1e-12);
  // aggregate grad is the mean, per-sample grad is of the sum
  for (std::size_t i = 0; i < logits.size(); ++i) {
    CHECK(testsup::rel_err(per.grad[i] / 6.0, agg.grad[i]) < 1e-12);
  }

  auto per_u = loss::ce_uniform_per_sample(logits);
  auto agg_u = loss::ce_uniform(logits);
  const double sum_u =
      std::accumulate(per_u.values.begin(), per_u.values.end(), 0.0);
  CHECK(testsup::rel_err(sum_u / 6.0, agg_u.value) < 1e-12);
}

TEST_CASE("accuracy and argmax") {
  Tensor logits({3, 3});
  // rows argmax: 2, 0, 1
  double vals[] = {0.1, 0.2, 0.9, 1.0, -1.0, 0.0, 0.0, 5.0, -2.0};
  for (std::size_t i = 0; i < 9; ++i) logits[i] = vals[i];
  auto am = loss::argmax_rows(logits);
  CHECK(am == std::vector<int>{2, 0, 1});
  CHECK(loss::accuracy(logits, std::vector<int>{2, 0, 0}) ==
        doctest::Approx(2.0 / 3.0));
}

TEST_CASE("sigmoid helpers are stable at extremes") {
  CHECK(loss::sigmoid(0.0) == 0.5);
  CHECK(loss::sigmoid(1000.0) == 1.0);
  CHECK(loss::sigmoid(-1000.0) == 0.0);  // exp(-1000) underflows; no NaN
  CHECK(std::isfinite(loss::log_sigmoid(-1000.0)));
  CHECK(testsup::rel_err(loss::log_sigmoid(-1000.0), -1000.0) < 1e-12);
  CHECK(loss::log_sigmoid(1000.0) == 0.0);
  CHECK(testsup::rel_err(loss::log_sigmoid(0.0), -std::log(2.0)) < 1e-12);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  // one million 'a': exercises multi-block buffering
  std::string big(1000000, 'a');
  CHECK(sha256_hex(big) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");

  // streaming in odd-sized chunks gives the same digest
  Sha256 h;
  const std::string msg = "The quick brown fox jumps over the lazy dog";
  h.update(msg.data(), 7);
  h.update(msg.data() + 7, 1);
  h.update(msg.data() + 8, msg.size() - 8);
  CHECK(h.hex_digest() ==
        "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("sha256 file digest matches string digest") {
  testsup::TempDir dir("sha");
  const std::string payload = "artifact bytes\n";
  {
    std::ofstream f(dir.str("a.bin"), std::ios::binary);
    f << payload;
  }
  CHECK(sha256_file_hex(dir.str("a.bin")) == sha256_hex(payload));
}

TEST_CASE("format_double round-trips exactly") {
  const double cases[] = {0.0,       -0.0,       1.0 / 3.0, 8.0 / 255.0,
                          1e-300,    -1e300,     0.1,       2.5 * 8 / 255 / 10,
                          3.14159e5, 1.0 + 1e-15};
  for (double v : cases) {
    const std::string s = format_double(v);
    const double back = std::stod(s);
    CHECK(back == v);
  }
}

TEST_CASE("checkpoint round-trips a classifier exactly") {
  testsup::TempDir dir("ckpt");
  RngStream init = RngStream::derive(77, "init");
  ClassifierModel model = build_classifier("mlp[3,16,8]", 4, init);
  model.set_training(false);

  Checkpoint ck = snapshot(model);
  ck.provenance = "unit-test";
  ck.step = 12;
  ck.metrics["train_acc"] = 0.5;
  ck.config_hash = "deadbeef";
  write_checkpoint(ck, dir.str("m.ckpt"));

  Checkpoint back = read_checkpoint(dir.str("m.ckpt"));
  CHECK(back.kind == ck.kind);
  CHECK(back.arch == "mlp[3,16,8]");
  CHECK(back.classes == 4);
  CHECK(back.provenance == "unit-test");
  CHECK(back.step == 12);
  CHECK(back.config_hash == "deadbeef");
  CHECK(back.metrics.at("train_acc") == 0.5);

  ClassifierModel reloaded = load_classifier(dir.str("m.ckpt"));
  CHECK(params_fingerprint(reloaded.params()) ==
        params_fingerprint(model.params()));
  CHECK(reloaded.arch() == model.arch());
  CHECK(reloaded.num_classes() == 4);

  // logits agree bit for bit on the same input
  Tensor x = testsup::random_tensor({3, 3}, 130);
  Tensor a = model.logits(x);
  Tensor b = reloaded.logits(x);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("feature extractor strips the head and freezes provenance") {
  RngStream init = RngStream::derive(31, "init");
  ClassifierModel model = build_classifier("mlp[4,10,6]", 3, init);
  model.set_training(false);
  FeatureExtractor ext = FeatureExtractor::strip_head(model, "test-extractor");
  CHECK(ext.output_dim() == model.feature_dim());
  CHECK(ext.provenance() == "test-extractor");
  CHECK(ext.valid());

  Tensor x = testsup::random_tensor({2, 4}, 131);
  Tensor f1 = model.features(x);
  Tensor f2 = ext.features(x);
  REQUIRE(f1.size() == f2.size());
  for (std::size_t i = 0; i < f1.size(); ++i) CHECK(f1[i] == f2[i]);

  const auto h = ext.params_hash();
  CHECK(h == ext.params_hash());  // stable
}

TEST_CASE("generator and discriminator shapes") {
  RngStream init = RngStream::derive(55, "init");
  Generator gen = build_generator(6, {16, 16}, 10, false, init);
  CHECK(gen.latent_dim() == 6);
  CHECK(gen.output_dim() == 10);
  Tensor z = testsup::random_tensor({4, 6}, 132);
  Tensor out = gen.forward(z);
  CHECK(out.batch() == 4);
  CHECK(out.sample_size() == 10);

  Generator bounded = build_generator(6, {16}, 10, true, init);
  Tensor out2 = bounded.forward(z);
  for (std::size_t i = 0; i < out2.size(); ++i) {
    CHECK(out2[i] >= 0.0);
    CHECK(out2[i] <= 1.0);
  }

  Discriminator disc = build_discriminator(10, {8}, init);
  disc.set_training(false);
  Tensor s = disc.logit(out);
  CHECK(s.rank() == 1);
  CHECK(s.dim(0) == 4);
  std::vector<double> p = disc.probability(out);
  for (double v : p) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("discriminator logit gradient matches finite differences") {
  RngStream init = RngStream::derive(56, "init");
  Discriminator disc = build_discriminator(5, {8}, init);
  disc.set_training(false);
  Tensor x = testsup::random_tensor({3, 5}, 133);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) < 0.05) x[i] = 0.1;
  }

  // loss = weighted sum of per-sample logits
  std::vector<double> w = {0.7, -1.3, 0.4};
  Tensor s = disc.logit(x);
  Tensor gup({3});
  for (std::size_t i = 0; i < 3; ++i) gup[i] = w[i];
  Tensor gin = disc.backward(gup);

  Tensor input = x;
  auto value_now = [&]() {
    Tensor v = disc.logit(input);
    double acc = 0.0;
    for (std::size_t i = 0; i < 3; ++i) acc += w[i] * v[i];
    return acc;
  };
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double fd = testsup::fd_slot(value_now, &input[i]);
    CHECK(testsup::rel_err(gin[i], fd) < 1e-4);
  }
}

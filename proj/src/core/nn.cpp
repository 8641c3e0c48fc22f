#include "core/nn.hpp"

#include <bit>
#include <cmath>

#include "core/errors.hpp"

namespace atdkit {
namespace {

// Kaiming-style uniform bound for ReLU stacks.
double init_bound(std::size_t fan_in) {
  return std::sqrt(6.0 / static_cast<double>(fan_in));
}

}  // namespace

// --- Linear ---

Linear::Linear(std::size_t in_dim, std::size_t out_dim)
    : in_(in_dim),
      out_(out_dim),
      w_({out_dim, in_dim}),
      b_({out_dim}),
      gw_({out_dim, in_dim}),
      gb_({out_dim}) {
  require(in_dim > 0 && out_dim > 0, ErrorCode::InvalidArgument,
          "linear: zero dimension");
}

void Linear::init_params(RngStream& rng) {
  const double bound = init_bound(in_);
  for (std::size_t i = 0; i < w_.size(); ++i) w_[i] = rng.uniform(-bound, bound);
  b_.fill(0.0);
}

Tensor Linear::forward(const Tensor& x) {
  require(x.sample_size() == in_, ErrorCode::Contract,
          "linear: input width ", x.sample_size(), ", expected ", in_);
  x_ = x;
  const std::size_t n = x.batch();
  Tensor y({n, out_});
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x.row(i);
    auto yi = y.row(i);
    for (std::size_t o = 0; o < out_; ++o) {
      double acc = b_[o];
      const double* wo = w_.data() + o * in_;
      for (std::size_t j = 0; j < in_; ++j) acc += wo[j] * xi[j];
      yi[o] = acc;
    }
  }
  return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const std::size_t n = x_.batch();
  require(grad_out.batch() == n && grad_out.sample_size() == out_,
          ErrorCode::Contract, "linear: bad grad shape");
  Tensor gx({n, in_});
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x_.row(i);
    auto gi = grad_out.row(i);
    auto gxi = gx.row(i);
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = gi[o];
      double* gwo = gw_.data() + o * in_;
      const double* wo = w_.data() + o * in_;
      gb_[o] += g;
      for (std::size_t j = 0; j < in_; ++j) {
        gwo[j] += g * xi[j];
        gxi[j] += g * wo[j];
      }
    }
  }
  return gx;
}

std::unique_ptr<Layer> Linear::clone() const {
  auto copy = std::make_unique<Linear>(in_, out_);
  copy->w_ = w_;
  copy->b_ = b_;
  return copy;
}

// --- Relu ---

Tensor Relu::forward(const Tensor& x) {
  x_ = x;
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0) y[i] = 0.0;
  }
  return y;
}

Tensor Relu::backward(const Tensor& grad_out) {
  require(grad_out.size() == x_.size(), ErrorCode::Contract, "relu: bad grad shape");
  Tensor gx = grad_out;
  // Subgradient 0 at the kink.
  for (std::size_t i = 0; i < gx.size(); ++i) {
    if (x_[i] <= 0.0) gx[i] = 0.0;
  }
  return gx;
}

std::unique_ptr<Layer> Relu::clone() const { return std::make_unique<Relu>(); }

// --- SigmoidLayer ---

Tensor SigmoidLayer::forward(const Tensor& x) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = y[i];
    y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v));
  }
  y_ = y;
  return y;
}

Tensor SigmoidLayer::backward(const Tensor& grad_out) {
  require(grad_out.size() == y_.size(), ErrorCode::Contract,
          "sigmoid: bad grad shape");
  Tensor gx = grad_out;
  for (std::size_t i = 0; i < gx.size(); ++i) {
    gx[i] *= y_[i] * (1.0 - y_[i]);
  }
  return gx;
}

std::unique_ptr<Layer> SigmoidLayer::clone() const {
  return std::make_unique<SigmoidLayer>();
}

// --- Conv2d ---

Conv2d::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
               std::size_t stride, std::size_t pad)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      k_(kernel),
      stride_(stride),
      pad_(pad),
      w_({out_ch, in_ch, kernel, kernel}),
      b_({out_ch}),
      gw_({out_ch, in_ch, kernel, kernel}),
      gb_({out_ch}) {
  require(in_ch > 0 && out_ch > 0 && kernel > 0 && stride > 0,
          ErrorCode::InvalidArgument, "conv2d: bad geometry");
}

void Conv2d::init_params(RngStream& rng) {
  const double bound = init_bound(in_ch_ * k_ * k_);
  for (std::size_t i = 0; i < w_.size(); ++i) w_[i] = rng.uniform(-bound, bound);
  b_.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
  require(x.rank() == 4 && x.dim(1) == in_ch_, ErrorCode::Contract,
          "conv2d: expected [N, ", in_ch_, ", H, W], got ", x.shape_str());
  x_ = x;
  const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  require(h + 2 * pad_ >= k_ && w + 2 * pad_ >= k_, ErrorCode::Contract,
          "conv2d: kernel larger than padded input");
  const std::size_t oh = (h + 2 * pad_ - k_) / stride_ + 1;
  const std::size_t ow = (w + 2 * pad_ - k_) / stride_ + 1;
  Tensor y({n, out_ch_, oh, ow});
  for (std::size_t img = 0; img < n; ++img) {
    const double* xin = x.data() + img * in_ch_ * h * w;
    double* yout = y.data() + img * out_ch_ * oh * ow;
    for (std::size_t oc = 0; oc < out_ch_; ++oc) {
      const double* woc = w_.data() + oc * in_ch_ * k_ * k_;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = b_[oc];
          for (std::size_t ic = 0; ic < in_ch_; ++ic) {
            const double* xc = xin + ic * h * w;
            const double* wk = woc + ic * k_ * k_;
            for (std::size_t ky = 0; ky < k_; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                  static_cast<std::ptrdiff_t>(pad_);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < k_; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                    static_cast<std::ptrdiff_t>(pad_);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                acc += wk[ky * k_ + kx] * xc[iy * w + ix];
              }
            }
          }
          yout[oc * oh * ow + oy * ow + ox] = acc;
        }
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const std::size_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const std::size_t oh = grad_out.dim(2), ow = grad_out.dim(3);
  require(grad_out.dim(0) == n && grad_out.dim(1) == out_ch_,
          ErrorCode::Contract, "conv2d: bad grad shape");
  Tensor gx(x_.shape());
  for (std::size_t img = 0; img < n; ++img) {
    const double* xin = x_.data() + img * in_ch_ * h * w;
    double* gxin = gx.data() + img * in_ch_ * h * w;
    const double* gout = grad_out.data() + img * out_ch_ * oh * ow;
    for (std::size_t oc = 0; oc < out_ch_; ++oc) {
      const double* woc = w_.data() + oc * in_ch_ * k_ * k_;
      double* gwoc = gw_.data() + oc * in_ch_ * k_ * k_;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double g = gout[oc * oh * ow + oy * ow + ox];
          if (g == 0.0) continue;
          gb_[oc] += g;
          for (std::size_t ic = 0; ic < in_ch_; ++ic) {
            const double* xc = xin + ic * h * w;
            double* gxc = gxin + ic * h * w;
            const double* wk = woc + ic * k_ * k_;
            double* gwk = gwoc + ic * k_ * k_;
            for (std::size_t ky = 0; ky < k_; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                  static_cast<std::ptrdiff_t>(pad_);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < k_; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                    static_cast<std::ptrdiff_t>(pad_);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                gwk[ky * k_ + kx] += g * xc[iy * w + ix];
                gxc[iy * w + ix] += g * wk[ky * k_ + kx];
              }
            }
          }
        }
      }
    }
  }
  return gx;
}

std::unique_ptr<Layer> Conv2d::clone() const {
  auto copy = std::make_unique<Conv2d>(in_ch_, out_ch_, k_, stride_, pad_);
  copy->w_ = w_;
  copy->b_ = b_;
  return copy;
}

// --- GlobalAvgPool ---

Tensor GlobalAvgPool::forward(const Tensor& x) {
  require(x.rank() == 4, ErrorCode::Contract,
          "global_avg_pool: expected rank-4 input, got ", x.shape_str());
  in_shape_ = x.shape();
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* px = x.data() + (i * c + ch) * hw;
      double acc = 0.0;
      for (std::size_t j = 0; j < hw; ++j) acc += px[j];
      y[i * c + ch] = acc / static_cast<double>(hw);
    }
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  const std::size_t n = in_shape_[0], c = in_shape_[1];
  const std::size_t hw = in_shape_[2] * in_shape_[3];
  require(grad_out.size() == n * c, ErrorCode::Contract,
          "global_avg_pool: bad grad shape");
  Tensor gx(in_shape_);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double g = grad_out[i * c + ch] / static_cast<double>(hw);
      double* pgx = gx.data() + (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) pgx[j] = g;
    }
  }
  return gx;
}

std::unique_ptr<Layer> GlobalAvgPool::clone() const {
  return std::make_unique<GlobalAvgPool>();
}

// --- Flatten ---

Tensor Flatten::forward(const Tensor& x) {
  in_shape_ = x.shape();
  return x.reshaped({x.batch(), x.sample_size()});
}

Tensor Flatten::backward(const Tensor& grad_out) {
  return grad_out.reshaped(in_shape_);
}

std::unique_ptr<Layer> Flatten::clone() const {
  return std::make_unique<Flatten>();
}

// --- Sequential ---

Tensor Sequential::forward(const Tensor& x) {
  Tensor y = x;
  for (auto& layer : layers_) y = layer->forward(y);
  return y;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->backward(g);
  }
  return g;
}

void Sequential::init_params(RngStream& rng) {
  for (auto& layer : layers_) layer->init_params(rng);
}

std::vector<Tensor*> Sequential::params() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    for (Tensor* p : layer->params()) out.push_back(p);
  }
  return out;
}

std::vector<Tensor*> Sequential::param_grads() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    for (Tensor* g : layer->param_grads()) out.push_back(g);
  }
  return out;
}

void Sequential::zero_grads() {
  for (Tensor* g : param_grads()) g->fill(0.0);
}

Sequential Sequential::clone() const {
  Sequential copy;
  for (const auto& layer : layers_) copy.add(layer->clone());
  return copy;
}

// --- parameter helpers ---

std::size_t param_count(const std::vector<Tensor*>& params) {
  std::size_t n = 0;
  for (const Tensor* p : params) n += p->size();
  return n;
}

std::vector<double> flatten_values(const std::vector<Tensor*>& params) {
  std::vector<double> out;
  out.reserve(param_count(params));
  for (const Tensor* p : params) {
    out.insert(out.end(), p->data(), p->data() + p->size());
  }
  return out;
}

void assign_values(const std::vector<Tensor*>& params,
                   std::span<const double> values) {
  require(values.size() == param_count(params), ErrorCode::InvalidArgument,
          "assign_values: size mismatch");
  std::size_t at = 0;
  for (Tensor* p : params) {
    std::copy(values.begin() + at, values.begin() + at + p->size(), p->data());
    at += p->size();
  }
}

std::uint64_t params_fingerprint(const std::vector<Tensor*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (const Tensor* p : params) {
    mix(p->size());
    for (std::size_t i = 0; i < p->size(); ++i) {
      mix(std::bit_cast<std::uint64_t>((*p)[i]));
    }
  }
  return h;
}

}  // namespace atdkit

#include "core/tensor.hpp"

#include <cmath>
#include <sstream>

#include "core/errors.hpp"

namespace atdkit {
namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  require(data_.size() == shape_product(shape_), ErrorCode::InvalidArgument,
          "tensor: ", data_.size(), " values for shape ", shape_str());
}

std::size_t Tensor::dim(std::size_t axis) const {
  require(axis < shape_.size(), ErrorCode::InvalidArgument,
          "tensor: axis ", axis, " out of range for rank ", shape_.size());
  return shape_[axis];
}

std::size_t Tensor::batch() const {
  require(!shape_.empty(), ErrorCode::Contract, "tensor: rank 0 has no batch axis");
  return shape_[0];
}

std::size_t Tensor::sample_size() const {
  const std::size_t n = batch();
  return n == 0 ? 0 : data_.size() / n;
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t w = sample_size();
  return {data_.data() + i * w, w};
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t w = sample_size();
  return {data_.data() + i * w, w};
}

void Tensor::set_row(std::size_t i, std::span<const double> values) {
  auto dst = row(i);
  require(values.size() == dst.size(), ErrorCode::InvalidArgument,
          "tensor: row width mismatch");
  std::copy(values.begin(), values.end(), dst.begin());
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= batch(), ErrorCode::InvalidArgument,
          "tensor: bad row slice [", begin, ", ", end, ")");
  std::vector<std::size_t> shape = shape_;
  shape[0] = end - begin;
  const std::size_t w = sample_size();
  Tensor out(std::move(shape));
  std::copy(data_.begin() + begin * w, data_.begin() + end * w, out.data());
  return out;
}

Tensor Tensor::take_rows(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> shape = shape_;
  shape[0] = indices.size();
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < batch(), ErrorCode::InvalidArgument,
            "tensor: gather index out of range");
    out.set_row(i, row(indices[i]));
  }
  return out;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  require(shape_product(shape) == data_.size(), ErrorCode::InvalidArgument,
          "tensor: reshape size mismatch");
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

Tensor concat_rows(const std::vector<const Tensor*>& parts) {
  require(!parts.empty(), ErrorCode::InvalidArgument, "concat_rows: no parts");
  std::vector<std::size_t> shape = parts[0]->shape();
  std::size_t rows = 0;
  for (const Tensor* p : parts) {
    require(p->sample_size() == parts[0]->sample_size(), ErrorCode::InvalidArgument,
            "concat_rows: incompatible row widths");
    rows += p->batch();
  }
  shape[0] = rows;
  Tensor out(std::move(shape));
  std::size_t at = 0;
  for (const Tensor* p : parts) {
    for (std::size_t i = 0; i < p->batch(); ++i) out.set_row(at++, p->row(i));
  }
  return out;
}

}  // namespace atdkit

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace atdkit {

// Dense row-major tensor of doubles. By convention the first axis is the
// batch axis for sample data; helpers below operate on that axis.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t batch() const;
  std::size_t sample_size() const;
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;
  void set_row(std::size_t i, std::span<const double> values);

  // Rows [begin, end).
  Tensor slice_rows(std::size_t begin, std::size_t end) const;
  Tensor take_rows(std::span<const std::size_t> indices) const;

  Tensor reshaped(std::vector<std::size_t> shape) const;

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

Tensor concat_rows(const std::vector<const Tensor*>& parts);

}  // namespace atdkit

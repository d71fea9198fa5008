#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace leaf {

// Raised when a forward pass produces NaN or Inf anywhere.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int64_t shape_numel(const std::vector<int64_t>& shape);

// Dense row-major 64-bit float array with a shape. The unit of all numerics
// and gradients.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);  // zero-filled
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor full(std::vector<int64_t> shape, double v);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  int64_t rows() const;
  int64_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& at(int64_t i, int64_t j);
  double at(int64_t i, int64_t j) const;
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  void fill(double v);
  std::string shape_str() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

}  // namespace leaf

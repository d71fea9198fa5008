#include "leaf/tensor.hpp"

#include <sstream>

#include "leaf/kernels.hpp"

namespace leaf {

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)),
      data_(static_cast<size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<int64_t>(data_.size()))
    throw std::invalid_argument("tensor data length does not match shape");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<int64_t> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const int64_t n = static_cast<int64_t>(rows.size());
  const int64_t m = n > 0 ? static_cast<int64_t>(rows.begin()->size()) : 0;
  std::vector<double> data;
  data.reserve(static_cast<size_t>(n * m));
  for (const auto& r : rows) {
    if (static_cast<int64_t>(r.size()) != m)
      throw std::invalid_argument("ragged matrix initializer");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({n, m}, std::move(data));
}

int64_t Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows(): tensor is not rank-2");
  return shape_[0];
}

int64_t Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("cols(): tensor is not rank-2");
  return shape_[1];
}

double& Tensor::at(int64_t i, int64_t j) {
  return data_[static_cast<size_t>(i * cols() + j)];
}

double Tensor::at(int64_t i, int64_t j) const {
  return data_[static_cast<size_t>(i * cols() + j)];
}

bool Tensor::all_finite() const {
  return kernels::active().all_finite(data_.data(), data_.size());
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

}  // namespace leaf

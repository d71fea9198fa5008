#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "leaf/autodiff.hpp"
#include "leaf/tensor.hpp"

namespace leaf::test {

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

inline Tensor random_tensor(std::vector<int64_t> shape, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& x : t.storage()) x = dist(rng);
  return t;
}

inline std::vector<double> random_values(size_t n, std::mt19937_64& rng,
                                         double lo = 0.0, double hi = 200.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// Reference triple loop, independent of the kernel implementations.
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t k = 0; k < a.cols(); ++k)
      for (int64_t j = 0; j < b.cols(); ++j)
        c.at(i, j) += a.at(i, k) * b.at(k, j);
  return c;
}

// Central finite differences against the tape's analytic gradients.
// `build` must construct the scalar loss on the given tape from the live
// parameter values. Returns the worst relative error across all elements.
inline double gradcheck_max_rel_error(std::span<Parameter* const> params,
                                      const std::function<Tape::Id(Tape&)>& build,
                                      double h = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(build(tape));
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);

  auto eval = [&]() {
    Tape tape;
    return tape.value(build(tape))[0];
  };

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (int64_t i = 0; i < p->value.numel(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double plus = eval();
      p->value[i] = orig - h;
      const double minus = eval();
      p->value[i] = orig;
      const double fd = (plus - minus) / (2.0 * h);
      const double g = analytic[pi][i];
      const double rel =
          std::abs(g - fd) / std::max({1.0, std::abs(g), std::abs(fd)});
      worst = std::max(worst, rel);
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return worst;
}

}  // namespace leaf::test

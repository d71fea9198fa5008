#include "leaf/kernels.hpp"

#include <algorithm>
#include <cmath>

// Reference kernels: straight loops, no platform assumptions. These define
// the semantics the SIMD variants are tested against.

namespace leaf::kernels {
namespace {

void gemm_nn(const double* a, const double* b, double* c, long n, long k,
             long p, bool accumulate) {
  for (long i = 0; i < n; ++i) {
    double* crow = c + i * p;
    if (!accumulate) std::fill(crow, crow + p, 0.0);
    const double* arow = a + i * k;
    for (long kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b + kk * p;
      for (long j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, long n, long k,
             long p, bool accumulate) {
  for (long i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * p;
    for (long j = 0; j < p; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (long kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      if (accumulate)
        crow[j] += acc;
      else
        crow[j] = acc;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, long n, long k,
             long p, bool accumulate) {
  if (!accumulate) std::fill(c, c + n * p, 0.0);
  for (long kk = 0; kk < k; ++kk) {
    const double* arow = a + kk * n;
    const double* brow = b + kk * p;
    for (long i = 0; i < n; ++i) {
      const double av = arow[i];
      double* crow = c + i * p;
      for (long j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

void add(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void scale(double s, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = s * x[i];
}

void axpy(double s, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += s * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* gy, double* gx,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) gx[i] += gy[i];
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

bool all_finite(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

void adam_update(double* p, double* m, double* v, const double* g,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double bias1, double bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * bias1;
    const double vhat = v[i] * bias2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend table{
      "scalar", gemm_nn, gemm_nt, gemm_tn, add,        sub,
      mul,      scale,   axpy,    relu,    relu_backward,
      sum,      dot,     all_finite, adam_update,
  };
  return table;
}

}  // namespace leaf::kernels

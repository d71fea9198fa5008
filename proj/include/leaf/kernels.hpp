#pragma once

#include <cstddef>

namespace leaf::kernels {

// Function table for the data-parallel inner loops. Every entry has a scalar
// reference implementation and, on x86-64 with AVX2+FMA, a vectorized variant.
// The two are equivalence-tested against each other; `active()` picks one at
// startup based on runtime CPU detection.
//
// GEMM variants cover the three operand layouts the tape needs without
// materializing transposes:
//   gemm_nn  C[n x p] (+)= A[n x k] * B[k x p]
//   gemm_nt  C[n x p] (+)= A[n x k] * B[p x k]^T
//   gemm_tn  C[n x p] (+)= A[k x n]^T * B[k x p]
struct Backend {
  const char* name;

  void (*gemm_nn)(const double* a, const double* b, double* c,
                  long n, long k, long p, bool accumulate);
  void (*gemm_nt)(const double* a, const double* b, double* c,
                  long n, long k, long p, bool accumulate);
  void (*gemm_tn)(const double* a, const double* b, double* c,
                  long n, long k, long p, bool accumulate);

  void (*add)(const double* a, const double* b, double* y, std::size_t n);
  void (*sub)(const double* a, const double* b, double* y, std::size_t n);
  void (*mul)(const double* a, const double* b, double* y, std::size_t n);
  // y = s * x
  void (*scale)(double s, const double* x, double* y, std::size_t n);
  // y += s * x
  void (*axpy)(double s, const double* x, double* y, std::size_t n);
  void (*relu)(const double* x, double* y, std::size_t n);
  // gx += gy where x > 0 (ReLU subgradient at 0 is 0)
  void (*relu_backward)(const double* x, const double* gy, double* gx,
                        std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  bool (*all_finite)(const double* x, std::size_t n);

  // Fused Adam update for one parameter array. bias1/bias2 are the
  // 1/(1-beta^t) corrections, precomputed by the caller.
  void (*adam_update)(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2);
};

const Backend& scalar_backend();

// nullptr when the CPU (or the compiler used for this build) lacks AVX2/FMA.
const Backend* avx2_backend();

// Runtime-selected backend. Set LEAF_KERNELS=scalar|avx2 to force one;
// an unavailable request falls back to scalar.
const Backend& active();

}  // namespace leaf::kernels

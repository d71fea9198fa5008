#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "leaf/kernels.hpp"
#include "support.hpp"

using namespace leaf;
using leaf::test::make_rng;
using leaf::test::naive_matmul;
using leaf::test::random_tensor;

namespace {

void check_close(std::span<const double> got, std::span<const double> want,
                 double tol) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    const double denom = std::max({1.0, std::abs(want[i])});
    CHECK(std::abs(got[i] - want[i]) / denom < tol);
  }
}

}  // namespace

TEST_CASE("scalar gemm_nn matches the naive triple loop") {
  auto rng = make_rng(1);
  const auto& k = kernels::scalar_backend();
  for (auto [n, kk, p] : {std::tuple{1, 1, 1}, {3, 4, 5}, {7, 2, 9}, {16, 16, 16}}) {
    Tensor a = random_tensor({n, kk}, rng);
    Tensor b = random_tensor({kk, p}, rng);
    Tensor c({n, p});
    k.gemm_nn(a.data(), b.data(), c.data(), n, kk, p, false);
    Tensor want = naive_matmul(a, b);
    check_close(c.storage(), want.storage(), 1e-12);
  }
}

TEST_CASE("scalar gemm_nt and gemm_tn agree with explicit transposition") {
  auto rng = make_rng(2);
  const auto& k = kernels::scalar_backend();
  const long n = 5, kk = 7, p = 3;
  Tensor a = random_tensor({n, kk}, rng);
  Tensor bt = random_tensor({p, kk}, rng);  // represents B^T stored p x k
  Tensor c({n, p});
  k.gemm_nt(a.data(), bt.data(), c.data(), n, kk, p, false);
  Tensor b({kk, p});
  for (int64_t i = 0; i < kk; ++i)
    for (int64_t j = 0; j < p; ++j) b.at(i, j) = bt.at(j, i);
  check_close(c.storage(), naive_matmul(a, b).storage(), 1e-12);

  Tensor at = random_tensor({kk, n}, rng);  // A stored k x n, used transposed
  Tensor b2 = random_tensor({kk, p}, rng);
  Tensor c2({n, p});
  k.gemm_tn(at.data(), b2.data(), c2.data(), n, kk, p, false);
  Tensor a2({n, kk});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < kk; ++j) a2.at(i, j) = at.at(j, i);
  check_close(c2.storage(), naive_matmul(a2, b2).storage(), 1e-12);
}

TEST_CASE("gemm accumulate adds onto the existing output") {
  auto rng = make_rng(3);
  const auto& k = kernels::scalar_backend();
  Tensor a = random_tensor({4, 6}, rng);
  Tensor b = random_tensor({6, 5}, rng);
  Tensor c = random_tensor({4, 5}, rng);
  Tensor base = c;
  k.gemm_nn(a.data(), b.data(), c.data(), 4, 6, 5, true);
  Tensor want = naive_matmul(a, b);
  for (int64_t i = 0; i < want.numel(); ++i) want[i] += base[i];
  check_close(c.storage(), want.storage(), 1e-12);
}

TEST_CASE("AVX2 backend matches scalar on every kernel") {
  const kernels::Backend* simd = kernels::avx2_backend();
  if (simd == nullptr) {
    MESSAGE("AVX2 unavailable on this machine; skipping equivalence checks");
    return;
  }
  const auto& ref = kernels::scalar_backend();
  auto rng = make_rng(4);

  // gemm variants over a spread of shapes, including non-multiples of 4
  for (auto [n, kk, p] :
       {std::tuple{1, 1, 1}, {2, 3, 4}, {5, 17, 9}, {13, 13, 13}, {24, 240, 64}}) {
    Tensor a = random_tensor({n, kk}, rng);
    Tensor b = random_tensor({kk, p}, rng);
    Tensor c0({n, p}), c1({n, p});
    ref.gemm_nn(a.data(), b.data(), c0.data(), n, kk, p, false);
    simd->gemm_nn(a.data(), b.data(), c1.data(), n, kk, p, false);
    check_close(c1.storage(), c0.storage(), 1e-11);

    Tensor bt = random_tensor({p, kk}, rng);
    Tensor d0({n, p}), d1({n, p});
    ref.gemm_nt(a.data(), bt.data(), d0.data(), n, kk, p, false);
    simd->gemm_nt(a.data(), bt.data(), d1.data(), n, kk, p, false);
    check_close(d1.storage(), d0.storage(), 1e-11);

    Tensor at = random_tensor({kk, n}, rng);
    Tensor bb = random_tensor({kk, p}, rng);
    Tensor e0({n, p}), e1({n, p});
    ref.gemm_tn(at.data(), bb.data(), e0.data(), n, kk, p, false);
    simd->gemm_tn(at.data(), bb.data(), e1.data(), n, kk, p, false);
    check_close(e1.storage(), e0.storage(), 1e-11);
  }

  // elementwise ops at awkward lengths
  for (size_t len : {1ul, 3ul, 4ul, 7ul, 64ul, 1001ul}) {
    Tensor a = random_tensor({static_cast<int64_t>(len)}, rng);
    Tensor b = random_tensor({static_cast<int64_t>(len)}, rng);
    Tensor y0({static_cast<int64_t>(len)}), y1 = y0;

    ref.add(a.data(), b.data(), y0.data(), len);
    simd->add(a.data(), b.data(), y1.data(), len);
    check_close(y1.storage(), y0.storage(), 1e-13);

    ref.sub(a.data(), b.data(), y0.data(), len);
    simd->sub(a.data(), b.data(), y1.data(), len);
    check_close(y1.storage(), y0.storage(), 1e-13);

    ref.mul(a.data(), b.data(), y0.data(), len);
    simd->mul(a.data(), b.data(), y1.data(), len);
    check_close(y1.storage(), y0.storage(), 1e-13);

    ref.scale(1.7, a.data(), y0.data(), len);
    simd->scale(1.7, a.data(), y1.data(), len);
    check_close(y1.storage(), y0.storage(), 1e-13);

    Tensor acc0 = b, acc1 = b;
    ref.axpy(-0.3, a.data(), acc0.data(), len);
    simd->axpy(-0.3, a.data(), acc1.data(), len);
    check_close(acc1.storage(), acc0.storage(), 1e-12);

    ref.relu(a.data(), y0.data(), len);
    simd->relu(a.data(), y1.data(), len);
    check_close(y1.storage(), y0.storage(), 0.0 + 1e-15);

    Tensor g0({static_cast<int64_t>(len)}), g1({static_cast<int64_t>(len)});
    ref.relu_backward(a.data(), b.data(), g0.data(), len);
    simd->relu_backward(a.data(), b.data(), g1.data(), len);
    check_close(g1.storage(), g0.storage(), 1e-15);

    CHECK(std::abs(ref.sum(a.data(), len) - simd->sum(a.data(), len)) < 1e-10);
    CHECK(std::abs(ref.dot(a.data(), b.data(), len) -
                   simd->dot(a.data(), b.data(), len)) < 1e-10);
    CHECK(ref.all_finite(a.data(), len) == simd->all_finite(a.data(), len));
  }

  // adam update marches both backends through several steps
  const size_t len = 37;
  Tensor p0 = random_tensor({static_cast<int64_t>(len)}, rng);
  Tensor p1 = p0;
  Tensor m0({static_cast<int64_t>(len)}), m1 = m0, v0 = m0, v1 = m0;
  for (int step = 1; step <= 5; ++step) {
    Tensor g = random_tensor({static_cast<int64_t>(len)}, rng);
    const double b1 = 1.0 / (1.0 - std::pow(0.9, step));
    const double b2 = 1.0 / (1.0 - std::pow(0.999, step));
    ref.adam_update(p0.data(), m0.data(), v0.data(), g.data(), len, 1e-3, 0.9,
                    0.999, 1e-8, b1, b2);
    simd->adam_update(p1.data(), m1.data(), v1.data(), g.data(), len, 1e-3, 0.9,
                      0.999, 1e-8, b1, b2);
  }
  check_close(p1.storage(), p0.storage(), 1e-12);
}

TEST_CASE("all_finite flags NaN and Inf anywhere in the buffer") {
  for (const kernels::Backend* k :
       {&kernels::scalar_backend(), kernels::avx2_backend()}) {
    if (k == nullptr) continue;
    auto rng = make_rng(5);
    Tensor a = random_tensor({33}, rng);
    CHECK(k->all_finite(a.data(), 33));
    for (int64_t pos : {0, 3, 31, 32}) {
      Tensor bad = a;
      bad[pos] = std::numeric_limits<double>::quiet_NaN();
      CHECK_FALSE(k->all_finite(bad.data(), 33));
      bad[pos] = std::numeric_limits<double>::infinity();
      CHECK_FALSE(k->all_finite(bad.data(), 33));
    }
  }
}

TEST_CASE("active backend honors the LEAF_KERNELS override") {
  // The active table is latched on first use within a process, so only check
  // that the selection is one of the registered tables.
  const auto& k = kernels::active();
  const bool is_scalar = &k == &kernels::scalar_backend();
  const bool is_avx2 = kernels::avx2_backend() != nullptr && &k == kernels::avx2_backend();
  CHECK((is_scalar || is_avx2));
}

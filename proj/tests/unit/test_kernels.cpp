#include <cmath>
#include <vector>

#include "doctest.h"
#include "lmforge/kernels.hpp"
#include "lmforge/rng.hpp"

using namespace lmforge;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar table is always available") {
    CHECK(kernels::scalar_table().isa == kernels::Isa::scalar);
    CHECK(kernels::table(kernels::Isa::scalar).isa == kernels::Isa::scalar);
    CHECK(kernels::active().dot != nullptr);
  }

  TEST_CASE("scalar gemm matches a naive triple loop") {
    Rng rng(7);
    const std::size_t m = 5, k = 7, n = 3;
    auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
    std::vector<double> c(m * n, 0.5), ref(m * n, 0.5);
    kernels::scalar_table().gemm_nn(a.data(), b.data(), c.data(), m, k, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) ref[i * n + j] += a[i * k + p] * b[p * n + j];
    CHECK(max_abs_diff(c, ref) < 1e-14);
  }

  TEST_CASE("avx2 kernels agree with scalar kernels") {
    const kernels::KernelTable* simd = kernels::avx2_table();
    if (!simd) {
      MESSAGE("AVX2 unavailable on this host; equivalence check skipped");
      return;
    }
    const auto& ref = kernels::scalar_table();
    Rng rng(11);
    // Sizes straddle the 4- and 8-wide vector tails.
    for (std::size_t m : {1u, 3u, 4u, 9u})
      for (std::size_t k : {1u, 5u, 8u, 17u, 64u})
        for (std::size_t n : {1u, 2u, 7u, 16u}) {
          CAPTURE(m);
          CAPTURE(k);
          CAPTURE(n);
          auto x = random_vec(k, rng), y = random_vec(k, rng);
          CHECK(std::abs(simd->dot(x.data(), y.data(), k) - ref.dot(x.data(), y.data(), k)) < 1e-12);

          auto y1 = y, y2 = y;
          simd->axpy(0.37, x.data(), y1.data(), k);
          ref.axpy(0.37, x.data(), y2.data(), k);
          CHECK(max_abs_diff(y1, y2) < 1e-14);

          auto a = random_vec(m * k, rng), b = random_vec(k * n, rng), bt = random_vec(n * k, rng);
          auto at = random_vec(k * m, rng);
          std::vector<double> c1(m * n, 0.1), c2(m * n, 0.1);
          simd->gemm_nn(a.data(), b.data(), c1.data(), m, k, n);
          ref.gemm_nn(a.data(), b.data(), c2.data(), m, k, n);
          CHECK(max_abs_diff(c1, c2) < 1e-12);

          c1.assign(m * n, 0.1);
          c2.assign(m * n, 0.1);
          simd->gemm_nt(a.data(), bt.data(), c1.data(), m, k, n);
          ref.gemm_nt(a.data(), bt.data(), c2.data(), m, k, n);
          CHECK(max_abs_diff(c1, c2) < 1e-12);

          c1.assign(m * n, 0.1);
          c2.assign(m * n, 0.1);
          simd->gemm_tn(at.data(), b.data(), c1.data(), m, k, n);
          ref.gemm_tn(at.data(), b.data(), c2.data(), m, k, n);
          CHECK(max_abs_diff(c1, c2) < 1e-12);
        }
  }

  TEST_CASE("NaN propagates through both variants") {
    std::vector<double> a{0.0, 1.0}, b{std::nan(""), 2.0};
    CHECK(std::isnan(kernels::scalar_table().dot(a.data(), b.data(), 2)));
    if (auto* simd = kernels::avx2_table()) CHECK(std::isnan(simd->dot(a.data(), b.data(), 2)));
  }
}

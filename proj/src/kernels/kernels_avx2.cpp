// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.

#include <immintrin.h>

#include "lmforge/kernels.hpp"

namespace lmforge::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                           acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_avx2(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy_avx2(a[i * k + p], b + p * n, ci, n);
  }
}

// Four dot products against consecutive rows of B share each load of A's row.
void gemm_nt_avx2(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + j * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      __m256d s0 = _mm256_setzero_pd();
      __m256d s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd();
      __m256d s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d va = _mm256_loadu_pd(ai + p);
        s0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + p), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        r0 += ai[p] * b0[p];
        r1 += ai[p] * b1[p];
        r2 += ai[p] * b2[p];
        r3 += ai[p] * b3[p];
      }
      ci[j] += r0;
      ci[j + 1] += r1;
      ci[j + 2] += r2;
      ci[j + 3] += r3;
    }
    for (; j < n; ++j) ci[j] += dot_avx2(ai, b + j * k, k);
  }
}

void gemm_tn_avx2(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) axpy_avx2(a[p * m + i], bp, c + i * n, n);
  }
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable t{Isa::avx2, dot_avx2, axpy_avx2, gemm_nn_avx2,
                             gemm_nt_avx2, gemm_tn_avx2};
  return t;
}

}  // namespace lmforge::kernels

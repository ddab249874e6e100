#include "lmforge/kernels.hpp"

namespace lmforge::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      c[i * n + j] += dot_scalar(a + i * k, b + j * k, k);
}

void gemm_tn_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = a[p * m + i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{Isa::scalar, dot_scalar, axpy_scalar,
                             gemm_nn_scalar, gemm_nt_scalar, gemm_tn_scalar};
  return t;
}

}  // namespace lmforge::kernels

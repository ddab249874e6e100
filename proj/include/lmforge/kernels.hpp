#pragma once

// Dense f64 inner loops used by the tensor core. Each instruction set gets its
// own translation unit; the active table is chosen once at startup from the
// CPU's capabilities, overridable with LMFORGE_SIMD={scalar,avx2}.
//
// All matrices are row-major with explicit leading dimension == column count.

#include <cstddef>
#include <span>
#include <string_view>

namespace lmforge::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
};

const KernelTable& scalar_table();
// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

bool supported(Isa isa);
const KernelTable& table(Isa isa);

// Dispatch target for the whole process. Resolved on first use.
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace lmforge::kernels

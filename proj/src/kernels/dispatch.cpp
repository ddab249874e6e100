#include <cstdlib>
#include <string>

#include "lmforge/errors.hpp"
#include "lmforge/kernels.hpp"

namespace lmforge::kernels {

#if defined(LMFORGE_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_table() {
#if defined(LMFORGE_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  if (ok) return &avx2_kernels();
#endif
  return nullptr;
}

bool supported(Isa isa) { return isa == Isa::scalar || avx2_table() != nullptr; }

const KernelTable& table(Isa isa) {
  if (isa == Isa::avx2) {
    if (const KernelTable* t = avx2_table()) return *t;
    throw ContractError("kernels: avx2 requested but not available on this CPU/build");
  }
  return scalar_table();
}

namespace {

const KernelTable& resolve() {
  if (const char* env = std::getenv("LMFORGE_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return scalar_table();
    if (v == "avx2") return table(Isa::avx2);
  }
  if (const KernelTable* t = avx2_table()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& t = resolve();
  return t;
}

}  // namespace lmforge::kernels

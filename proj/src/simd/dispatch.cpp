#include <atomic>
#include <cstdlib>
#include <string>

#include "mofill/error.hpp"
#include "mofill/simd.hpp"

namespace mofill::simd {

const KernelTable& scalar_kernels();
#if MOFILL_HAVE_X86_SIMD
const KernelTable& avx2_kernels();
const KernelTable& avx512_kernels();
#endif

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("MOFILL_SIMD"); env != nullptr && *env != '\0') {
    const Isa requested = parse_isa(env);
    if (!isa_supported(requested))
      throw UsageError("MOFILL_SIMD=" + std::string(env) + " is not supported on this CPU");
    return requested;
  }
  return detected_isa();
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{&kernels(initial_isa())};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::avx512: return "avx512";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "avx512") return Isa::avx512;
  throw UsageError("unknown instruction set '" + std::string(name) +
                   "' (expected scalar, avx2 or avx512)");
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
#if MOFILL_HAVE_X86_SIMD
    case Isa::avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::avx512:
      return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq") &&
             __builtin_cpu_supports("fma");
#else
    default: return false;
#endif
  }
  return false;
}

Isa detected_isa() {
  if (isa_supported(Isa::avx512)) return Isa::avx512;
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  return Isa::scalar;
}

const KernelTable& kernels(Isa isa) {
  if (!isa_supported(isa))
    throw UsageError("instruction set " + std::string(isa_name(isa)) + " is not available");
  switch (isa) {
#if MOFILL_HAVE_X86_SIMD
    case Isa::avx2: return avx2_kernels();
    case Isa::avx512: return avx512_kernels();
#endif
    default: return scalar_kernels();
  }
}

Isa active_isa() { return active_table().load()->isa; }

void set_active_isa(Isa isa) { active_table().store(&kernels(isa)); }

const KernelTable& active() { return *active_table().load(); }

template <>
void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
  active().sgemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha, const double* a,
                  int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  active().dgemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void gemm_rows<float>(bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                      const float* const* b_rows, float beta, float* c, int ldc) {
  active().sgemm_rows(tb, m, n, k, alpha, a, lda, b_rows, beta, c, ldc);
}

template <>
void gemm_rows<double>(bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                       const double* const* b_rows, double beta, double* c, int ldc) {
  active().dgemm_rows(tb, m, n, k, alpha, a, lda, b_rows, beta, c, ldc);
}

}  // namespace mofill::simd

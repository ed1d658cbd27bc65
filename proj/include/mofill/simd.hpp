#pragma once

#include <cstddef>
#include <string_view>

namespace mofill::simd {

enum class Isa { scalar, avx2, avx512 };

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

// Best instruction set supported by the running CPU (and compiled in).
Isa detected_isa();
bool isa_supported(Isa isa);

// Currently selected kernel set. Defaults to detected_isa(), overridable by
// the MOFILL_SIMD environment variable or set_active_isa().
Isa active_isa();
void set_active_isa(Isa isa);

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C, op(A) is M x K,
// op(B) is K x N. With beta == 0, C is overwritten (NaNs in C are ignored).
template <typename T>
using GemmFn = void (*)(bool trans_a, bool trans_b, int m, int n, int k, T alpha,
                        const T* a, int lda, const T* b, int ldb, T beta, T* c,
                        int ldc);

// Same product with op(B) read from per-row pointers: row r of the stored B
// starts at b_rows[r] (op(B) = B^T when trans_b). A is never transposed.
template <typename T>
using GemmRowsFn = void (*)(bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
                            const T* const* b_rows, T beta, T* c, int ldc);

struct KernelTable {
  Isa isa;
  GemmFn<float> sgemm;
  GemmFn<double> dgemm;
  GemmRowsFn<float> sgemm_rows;
  GemmRowsFn<double> dgemm_rows;
  // y = max(x, slope * x)
  void (*leaky_relu)(const float* x, float* y, std::size_t n, float slope);
  // dx = g where x > 0, slope * g elsewhere
  void (*leaky_relu_backward)(const float* x, const float* g, float* dx, std::size_t n,
                              float slope);
  // Bias-corrected Adam update of n parameters. step_size = lr / (1 - beta1^t),
  // v_correction = 1 / (1 - beta2^t).
  void (*adam_update)(float* param, float* m, float* v, const float* grad, std::size_t n,
                      float beta1, float beta2, float step_size, float v_correction,
                      float epsilon);
  // sum |a - b| accumulated in double
  double (*abs_diff_sum)(const float* a, const float* b, std::size_t n);
};

const KernelTable& kernels(Isa isa);
const KernelTable& active();

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc);

template <typename T>
void gemm_rows(bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
               const T* const* b_rows, T beta, T* c, int ldc);

}  // namespace mofill::simd

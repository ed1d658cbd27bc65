// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "mofill/simd.hpp"
#include "simd/elementwise.hpp"
#include "simd/gemm_packed.hpp"

namespace mofill::simd {
namespace {

constexpr int kMr = 6;
constexpr int kNr = 16;

// 6x16 register tile: 12 ymm accumulators, two B vectors, one broadcast.
// Accumulators are named locals; an array would be spilled every iteration.
void micro_kernel_6x16(int kc, const float* __restrict ap, const float* __restrict bp,
                       float* c, int ldc, int rows, int cols) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
  __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();

  for (int p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_load_ps(bp);
    const __m256 b1 = _mm256_load_ps(bp + 8);
    __m256 a = _mm256_broadcast_ss(ap + 0);
    c00 = _mm256_fmadd_ps(a, b0, c00);
    c01 = _mm256_fmadd_ps(a, b1, c01);
    a = _mm256_broadcast_ss(ap + 1);
    c10 = _mm256_fmadd_ps(a, b0, c10);
    c11 = _mm256_fmadd_ps(a, b1, c11);
    a = _mm256_broadcast_ss(ap + 2);
    c20 = _mm256_fmadd_ps(a, b0, c20);
    c21 = _mm256_fmadd_ps(a, b1, c21);
    a = _mm256_broadcast_ss(ap + 3);
    c30 = _mm256_fmadd_ps(a, b0, c30);
    c31 = _mm256_fmadd_ps(a, b1, c31);
    a = _mm256_broadcast_ss(ap + 4);
    c40 = _mm256_fmadd_ps(a, b0, c40);
    c41 = _mm256_fmadd_ps(a, b1, c41);
    a = _mm256_broadcast_ss(ap + 5);
    c50 = _mm256_fmadd_ps(a, b0, c50);
    c51 = _mm256_fmadd_ps(a, b1, c51);
    ap += kMr;
    bp += kNr;
  }

  alignas(32) float tile[kMr][kNr];
  _mm256_store_ps(tile[0], c00);
  _mm256_store_ps(tile[0] + 8, c01);
  _mm256_store_ps(tile[1], c10);
  _mm256_store_ps(tile[1] + 8, c11);
  _mm256_store_ps(tile[2], c20);
  _mm256_store_ps(tile[2] + 8, c21);
  _mm256_store_ps(tile[3], c30);
  _mm256_store_ps(tile[3] + 8, c31);
  _mm256_store_ps(tile[4], c40);
  _mm256_store_ps(tile[4] + 8, c41);
  _mm256_store_ps(tile[5], c50);
  _mm256_store_ps(tile[5] + 8, c51);
  if (cols == kNr) {
    for (int i = 0; i < rows; ++i) {
      float* cr = c + static_cast<std::size_t>(i) * ldc;
      _mm256_storeu_ps(cr, _mm256_add_ps(_mm256_loadu_ps(cr), _mm256_load_ps(tile[i])));
      _mm256_storeu_ps(cr + 8,
                       _mm256_add_ps(_mm256_loadu_ps(cr + 8), _mm256_load_ps(tile[i] + 8)));
    }
    return;
  }
  for (int i = 0; i < rows; ++i) {
    float* cr = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < cols; ++j) cr[j] += tile[i][j];
  }
}

template <typename Source>
void sgemm_impl(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                const Source& b, float beta, float* c, int ldc) {
  detail::gemm_packed<float, kMr, kNr, 72, 256>(ta, tb, m, n, k, alpha, a, lda, b, beta, c, ldc,
                                               micro_kernel_6x16);
}

template <typename Source>
void dgemm_impl(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                const Source& b, double beta, double* c, int ldc) {
  detail::gemm_packed<double, 4, 8, 64, 256>(ta, tb, m, n, k, alpha, a, lda, b, beta, c, ldc,
                                             detail::micro_kernel_generic<double, 4, 8>);
}

void sgemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
           const float* b, int ldb, float beta, float* c, int ldc) {
  sgemm_impl(ta, tb, m, n, k, alpha, a, lda, detail::StridedB<float>{b, ldb}, beta, c, ldc);
}

void dgemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
           const double* b, int ldb, double beta, double* c, int ldc) {
  dgemm_impl(ta, tb, m, n, k, alpha, a, lda, detail::StridedB<double>{b, ldb}, beta, c, ldc);
}

void sgemm_rows(bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                const float* const* rows, float beta, float* c, int ldc) {
  sgemm_impl(false, tb, m, n, k, alpha, a, lda, detail::RowPtrB<float>{rows}, beta, c, ldc);
}

void dgemm_rows(bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                const double* const* rows, double beta, double* c, int ldc) {
  dgemm_impl(false, tb, m, n, k, alpha, a, lda, detail::RowPtrB<double>{rows}, beta, c, ldc);
}

void leaky_relu(const float* x, float* y, std::size_t n, float slope) {
  const __m256 s = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 pos = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(y + i, _mm256_blendv_ps(_mm256_mul_ps(s, v), v, pos));
  }
  detail::leaky_relu_scalar(x, y, i, n, slope);
}

void leaky_relu_backward(const float* x, const float* g, float* dx, std::size_t n,
                         float slope) {
  const __m256 s = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    const __m256 pos = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_blendv_ps(_mm256_mul_ps(s, gv), gv, pos));
  }
  detail::leaky_relu_backward_scalar(x, g, dx, i, n, slope);
}

void adam_update(float* p, float* m, float* v, const float* g, std::size_t n, float b1,
                 float b2, float step, float vc, float eps) {
  const __m256 vb1 = _mm256_set1_ps(b1);
  const __m256 vb2 = _mm256_set1_ps(b2);
  const __m256 vb1c = _mm256_set1_ps(1.0f - b1);
  const __m256 vb2c = _mm256_set1_ps(1.0f - b2);
  const __m256 vstep = _mm256_set1_ps(step);
  const __m256 vvc = _mm256_set1_ps(vc);
  const __m256 veps = _mm256_set1_ps(eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    const __m256 mv = _mm256_add_ps(_mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)),
                                    _mm256_mul_ps(vb1c, gv));
    const __m256 vv = _mm256_add_ps(_mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(vb2c, _mm256_mul_ps(gv, gv)));
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vv, vvc)), veps);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vstep, mv), denom);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
  }
  detail::adam_update_scalar(p, m, v, g, i, n, b1, b2, step, vc, eps);
}

double abs_diff_sum(const float* a, const float* b, std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 av = _mm256_loadu_ps(a + i);
    const __m256 bv = _mm256_loadu_ps(b + i);
    const __m256d d0 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(av)),
                                     _mm256_cvtps_pd(_mm256_castps256_ps128(bv)));
    const __m256d d1 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(av, 1)),
                                     _mm256_cvtps_pd(_mm256_extractf128_ps(bv, 1)));
    acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign_mask, d0));
    acc1 = _mm256_add_pd(acc1, _mm256_andnot_pd(sign_mask, d1));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  return lanes[0] + lanes[1] + lanes[2] + lanes[3] + detail::abs_diff_sum_scalar(a, b, i, n);
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{Isa::avx2, sgemm,       dgemm,
                                 sgemm_rows, dgemm_rows,
                                 leaky_relu, leaky_relu_backward, adam_update,
                                 abs_diff_sum};
  return table;
}

}  // namespace mofill::simd

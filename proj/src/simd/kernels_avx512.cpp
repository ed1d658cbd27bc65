// Compiled with -mavx512f -mavx512dq -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "mofill/simd.hpp"
#include "simd/elementwise.hpp"
#include "simd/gemm_packed.hpp"

namespace mofill::simd {
namespace {

constexpr int kMr = 12;
constexpr int kNr = 32;

// 12x32 register tile: 24 zmm accumulators, two B vectors, one broadcast.
// Accumulators are named locals; an array would be spilled every iteration.
void micro_kernel_12x32(int kc, const float* __restrict ap, const float* __restrict bp,
                        float* c, int ldc, int rows, int cols) {
  __m512 c0a = _mm512_setzero_ps(), c0b = _mm512_setzero_ps();
  __m512 c1a = _mm512_setzero_ps(), c1b = _mm512_setzero_ps();
  __m512 c2a = _mm512_setzero_ps(), c2b = _mm512_setzero_ps();
  __m512 c3a = _mm512_setzero_ps(), c3b = _mm512_setzero_ps();
  __m512 c4a = _mm512_setzero_ps(), c4b = _mm512_setzero_ps();
  __m512 c5a = _mm512_setzero_ps(), c5b = _mm512_setzero_ps();
  __m512 c6a = _mm512_setzero_ps(), c6b = _mm512_setzero_ps();
  __m512 c7a = _mm512_setzero_ps(), c7b = _mm512_setzero_ps();
  __m512 c8a = _mm512_setzero_ps(), c8b = _mm512_setzero_ps();
  __m512 c9a = _mm512_setzero_ps(), c9b = _mm512_setzero_ps();
  __m512 c10a = _mm512_setzero_ps(), c10b = _mm512_setzero_ps();
  __m512 c11a = _mm512_setzero_ps(), c11b = _mm512_setzero_ps();

  for (int p = 0; p < kc; ++p) {
    const __m512 b0 = _mm512_load_ps(bp);
    const __m512 b1 = _mm512_load_ps(bp + 16);
    __m512 a;
    a = _mm512_set1_ps(ap[0]);
    c0a = _mm512_fmadd_ps(a, b0, c0a);
    c0b = _mm512_fmadd_ps(a, b1, c0b);
    a = _mm512_set1_ps(ap[1]);
    c1a = _mm512_fmadd_ps(a, b0, c1a);
    c1b = _mm512_fmadd_ps(a, b1, c1b);
    a = _mm512_set1_ps(ap[2]);
    c2a = _mm512_fmadd_ps(a, b0, c2a);
    c2b = _mm512_fmadd_ps(a, b1, c2b);
    a = _mm512_set1_ps(ap[3]);
    c3a = _mm512_fmadd_ps(a, b0, c3a);
    c3b = _mm512_fmadd_ps(a, b1, c3b);
    a = _mm512_set1_ps(ap[4]);
    c4a = _mm512_fmadd_ps(a, b0, c4a);
    c4b = _mm512_fmadd_ps(a, b1, c4b);
    a = _mm512_set1_ps(ap[5]);
    c5a = _mm512_fmadd_ps(a, b0, c5a);
    c5b = _mm512_fmadd_ps(a, b1, c5b);
    a = _mm512_set1_ps(ap[6]);
    c6a = _mm512_fmadd_ps(a, b0, c6a);
    c6b = _mm512_fmadd_ps(a, b1, c6b);
    a = _mm512_set1_ps(ap[7]);
    c7a = _mm512_fmadd_ps(a, b0, c7a);
    c7b = _mm512_fmadd_ps(a, b1, c7b);
    a = _mm512_set1_ps(ap[8]);
    c8a = _mm512_fmadd_ps(a, b0, c8a);
    c8b = _mm512_fmadd_ps(a, b1, c8b);
    a = _mm512_set1_ps(ap[9]);
    c9a = _mm512_fmadd_ps(a, b0, c9a);
    c9b = _mm512_fmadd_ps(a, b1, c9b);
    a = _mm512_set1_ps(ap[10]);
    c10a = _mm512_fmadd_ps(a, b0, c10a);
    c10b = _mm512_fmadd_ps(a, b1, c10b);
    a = _mm512_set1_ps(ap[11]);
    c11a = _mm512_fmadd_ps(a, b0, c11a);
    c11b = _mm512_fmadd_ps(a, b1, c11b);
    ap += kMr;
    bp += kNr;
  }

  alignas(64) float tile[kMr][kNr];
  _mm512_store_ps(tile[0], c0a);
  _mm512_store_ps(tile[0] + 16, c0b);
  _mm512_store_ps(tile[1], c1a);
  _mm512_store_ps(tile[1] + 16, c1b);
  _mm512_store_ps(tile[2], c2a);
  _mm512_store_ps(tile[2] + 16, c2b);
  _mm512_store_ps(tile[3], c3a);
  _mm512_store_ps(tile[3] + 16, c3b);
  _mm512_store_ps(tile[4], c4a);
  _mm512_store_ps(tile[4] + 16, c4b);
  _mm512_store_ps(tile[5], c5a);
  _mm512_store_ps(tile[5] + 16, c5b);
  _mm512_store_ps(tile[6], c6a);
  _mm512_store_ps(tile[6] + 16, c6b);
  _mm512_store_ps(tile[7], c7a);
  _mm512_store_ps(tile[7] + 16, c7b);
  _mm512_store_ps(tile[8], c8a);
  _mm512_store_ps(tile[8] + 16, c8b);
  _mm512_store_ps(tile[9], c9a);
  _mm512_store_ps(tile[9] + 16, c9b);
  _mm512_store_ps(tile[10], c10a);
  _mm512_store_ps(tile[10] + 16, c10b);
  _mm512_store_ps(tile[11], c11a);
  _mm512_store_ps(tile[11] + 16, c11b);
  const __mmask16 m0 = cols >= 16 ? __mmask16(0xFFFF) : __mmask16((1u << cols) - 1u);
  const __mmask16 m1 = cols <= 16 ? __mmask16(0)
                     : cols >= 32 ? __mmask16(0xFFFF)
                                  : __mmask16((1u << (cols - 16)) - 1u);
  for (int i = 0; i < rows; ++i) {
    float* cr = c + static_cast<std::size_t>(i) * ldc;
    _mm512_mask_storeu_ps(cr, m0,
                          _mm512_add_ps(_mm512_maskz_loadu_ps(m0, cr), _mm512_load_ps(tile[i])));
    _mm512_mask_storeu_ps(
        cr + 16, m1,
        _mm512_add_ps(_mm512_maskz_loadu_ps(m1, cr + 16), _mm512_load_ps(tile[i] + 16)));
  }
}

template <typename Source>
void sgemm_impl(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                const Source& b, float beta, float* c, int ldc) {
  detail::gemm_packed<float, kMr, kNr, 96, 128>(ta, tb, m, n, k, alpha, a, lda, b, beta, c, ldc,
                                               micro_kernel_12x32);
}

template <typename Source>
void dgemm_impl(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                const Source& b, double beta, double* c, int ldc) {
  detail::gemm_packed<double, 4, 16, 64, 256>(ta, tb, m, n, k, alpha, a, lda, b, beta, c, ldc,
                                             detail::micro_kernel_generic<double, 4, 16>);
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
  const __m512 s = _mm512_set1_ps(slope);
  const __m512 zero = _mm512_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m512 v = _mm512_loadu_ps(x + i);
    const __mmask16 pos = _mm512_cmp_ps_mask(v, zero, _CMP_GT_OQ);
    _mm512_storeu_ps(y + i, _mm512_mask_blend_ps(pos, _mm512_mul_ps(s, v), v));
  }
  detail::leaky_relu_scalar(x, y, i, n, slope);
}

void leaky_relu_backward(const float* x, const float* g, float* dx, std::size_t n,
                         float slope) {
  const __m512 s = _mm512_set1_ps(slope);
  const __m512 zero = _mm512_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m512 gv = _mm512_loadu_ps(g + i);
    const __mmask16 pos = _mm512_cmp_ps_mask(_mm512_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm512_storeu_ps(dx + i, _mm512_mask_blend_ps(pos, _mm512_mul_ps(s, gv), gv));
  }
  detail::leaky_relu_backward_scalar(x, g, dx, i, n, slope);
}

void adam_update(float* p, float* m, float* v, const float* g, std::size_t n, float b1,
                 float b2, float step, float vc, float eps) {
  const __m512 vb1 = _mm512_set1_ps(b1);
  const __m512 vb2 = _mm512_set1_ps(b2);
  const __m512 vb1c = _mm512_set1_ps(1.0f - b1);
  const __m512 vb2c = _mm512_set1_ps(1.0f - b2);
  const __m512 vstep = _mm512_set1_ps(step);
  const __m512 vvc = _mm512_set1_ps(vc);
  const __m512 veps = _mm512_set1_ps(eps);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m512 gv = _mm512_loadu_ps(g + i);
    const __m512 mv = _mm512_add_ps(_mm512_mul_ps(vb1, _mm512_loadu_ps(m + i)),
                                    _mm512_mul_ps(vb1c, gv));
    const __m512 vv = _mm512_add_ps(_mm512_mul_ps(vb2, _mm512_loadu_ps(v + i)),
                                    _mm512_mul_ps(vb2c, _mm512_mul_ps(gv, gv)));
    _mm512_storeu_ps(m + i, mv);
    _mm512_storeu_ps(v + i, vv);
    const __m512 denom = _mm512_add_ps(_mm512_sqrt_ps(_mm512_mul_ps(vv, vvc)), veps);
    const __m512 upd = _mm512_div_ps(_mm512_mul_ps(vstep, mv), denom);
    _mm512_storeu_ps(p + i, _mm512_sub_ps(_mm512_loadu_ps(p + i), upd));
  }
  detail::adam_update_scalar(p, m, v, g, i, n, b1, b2, step, vc, eps);
}

double abs_diff_sum(const float* a, const float* b, std::size_t n) {
  __m512d acc0 = _mm512_setzero_pd();
  __m512d acc1 = _mm512_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m512 av = _mm512_loadu_ps(a + i);
    const __m512 bv = _mm512_loadu_ps(b + i);
    const __m512d d0 = _mm512_sub_pd(_mm512_cvtps_pd(_mm512_castps512_ps256(av)),
                                     _mm512_cvtps_pd(_mm512_castps512_ps256(bv)));
    const __m512d d1 =
        _mm512_sub_pd(_mm512_cvtps_pd(_mm256_castpd_ps(_mm512_extractf64x4_pd(_mm512_castps_pd(av), 1))),
                      _mm512_cvtps_pd(_mm256_castpd_ps(_mm512_extractf64x4_pd(_mm512_castps_pd(bv), 1))));
    acc0 = _mm512_add_pd(acc0, _mm512_abs_pd(d0));
    acc1 = _mm512_add_pd(acc1, _mm512_abs_pd(d1));
  }
  return _mm512_reduce_add_pd(_mm512_add_pd(acc0, acc1)) +
         detail::abs_diff_sum_scalar(a, b, i, n);
}

}  // namespace

const KernelTable& avx512_kernels() {
  static const KernelTable table{Isa::avx512, sgemm,      dgemm,
                                 sgemm_rows, dgemm_rows,
                                 leaky_relu,  leaky_relu_backward, adam_update,
                                 abs_diff_sum};
  return table;
}

}  // namespace mofill::simd

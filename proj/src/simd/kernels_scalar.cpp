#include "mofill/simd.hpp"
#include "simd/elementwise.hpp"
#include "simd/gemm_packed.hpp"

namespace mofill::simd {
namespace {

constexpr int kMr = 4;
constexpr int kNr = 4;

template <typename T>
void gemm_scalar(bool ta, bool tb, int m, int n, int k, T alpha, const T* a, int lda,
                 const T* b, int ldb, T beta, T* c, int ldc) {
  detail::gemm_packed<T, kMr, kNr, 64, 256>(ta, tb, m, n, k, alpha, a, lda,
                                            detail::StridedB<T>{b, ldb}, beta, c, ldc,
                                            detail::micro_kernel_generic<T, kMr, kNr>);
}

template <typename T>
void gemm_rows_scalar(bool tb, int m, int n, int k, T alpha, const T* a, int lda,
                      const T* const* rows, T beta, T* c, int ldc) {
  detail::gemm_packed<T, kMr, kNr, 64, 256>(false, tb, m, n, k, alpha, a, lda,
                                            detail::RowPtrB<T>{rows}, beta, c, ldc,
                                            detail::micro_kernel_generic<T, kMr, kNr>);
}

void leaky_relu(const float* x, float* y, std::size_t n, float slope) {
  detail::leaky_relu_scalar(x, y, 0, n, slope);
}

void leaky_relu_backward(const float* x, const float* g, float* dx, std::size_t n,
                         float slope) {
  detail::leaky_relu_backward_scalar(x, g, dx, 0, n, slope);
}

void adam_update(float* p, float* m, float* v, const float* g, std::size_t n, float b1,
                 float b2, float step, float vc, float eps) {
  detail::adam_update_scalar(p, m, v, g, 0, n, b1, b2, step, vc, eps);
}

double abs_diff_sum(const float* a, const float* b, std::size_t n) {
  return detail::abs_diff_sum_scalar(a, b, 0, n);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar, gemm_scalar<float>, gemm_scalar<double>,
                                 gemm_rows_scalar<float>, gemm_rows_scalar<double>,
                                 leaky_relu,  leaky_relu_backward, adam_update,
                                 abs_diff_sum};
  return table;
}

}  // namespace mofill::simd

#pragma once

// Scalar element-wise kernels. The vector variants call these for loop tails
// and must reproduce them bit-for-bit (the build disables FP contraction).

#include <cmath>
#include <cstddef>

namespace mofill::simd::detail {

inline void leaky_relu_scalar(const float* x, float* y, std::size_t begin, std::size_t n,
                              float slope) {
  for (std::size_t i = begin; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

inline void leaky_relu_backward_scalar(const float* x, const float* g, float* dx,
                                       std::size_t begin, std::size_t n, float slope) {
  for (std::size_t i = begin; i < n; ++i) dx[i] = x[i] > 0.0f ? g[i] : slope * g[i];
}

inline void adam_update_scalar(float* param, float* m, float* v, const float* grad,
                               std::size_t begin, std::size_t n, float beta1, float beta2,
                               float step_size, float v_correction, float epsilon) {
  const float one_minus_b1 = 1.0f - beta1;
  const float one_minus_b2 = 1.0f - beta2;
  for (std::size_t i = begin; i < n; ++i) {
    const float g = grad[i];
    m[i] = beta1 * m[i] + one_minus_b1 * g;
    v[i] = beta2 * v[i] + one_minus_b2 * (g * g);
    const float denom = std::sqrt(v[i] * v_correction) + epsilon;
    param[i] -= step_size * m[i] / denom;
  }
}

inline double abs_diff_sum_scalar(const float* a, const float* b, std::size_t begin,
                                  std::size_t n) {
  double s = 0.0;
  for (std::size_t i = begin; i < n; ++i)
    s += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return s;
}

}  // namespace mofill::simd::detail

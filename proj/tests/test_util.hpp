#pragma once

// Shared helpers: random tensors and brute-force nested-loop oracles that
// share no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mofill/random.hpp"
#include "mofill/tensor.hpp"

namespace mofill::test {

template <typename T>
Tensor4<T> random_tensor(Shape4 s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor4<T> t(s);
  Rng rng(seed);
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
std::vector<T> random_vector(std::size_t n, std::uint64_t seed) {
  std::vector<T> v(n);
  Rng rng(seed);
  for (T& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Leading pad for a 3-tap window with ceil-division output size.
inline int pad_lo(int in, int stride) {
  const int out = ceil_div(in, stride);
  const int total = std::max((out - 1) * stride + 3 - in, 0);
  return total / 2;
}

// out[n][o][y][x] = b[o] + sum_{i,ky,kx} w[o][i][ky][kx] * in[n][i][y*s-p+ky][x*s-p+kx]
inline TensorD oracle_conv(const TensorD& in, const TensorD& w, const std::vector<double>& b,
                           int sh, int sw) {
  const int N = in.n(), C = in.c(), H = in.h(), W = in.w(), O = w.n();
  const int OH = ceil_div(H, sh), OW = ceil_div(W, sw);
  const int ph = pad_lo(H, sh), pw = pad_lo(W, sw);
  TensorD out(N, O, OH, OW);
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int y = 0; y < OH; ++y)
        for (int x = 0; x < OW; ++x) {
          double acc = b.empty() ? 0.0 : b[o];
          for (int i = 0; i < C; ++i)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = y * sh - ph + ky, ix = x * sw - pw + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += w.at(o, i, ky, kx) * in.at(n, i, iy, ix);
              }
          out.at(n, o, y, x) = acc;
        }
  return out;
}

// Scatter form of the transposed conv: each input pixel spreads its value
// through the 3x3 kernel onto the (H, W) target.
inline TensorD oracle_conv_transpose(const TensorD& in, const TensorD& w,
                                     const std::vector<double>& b, int sh, int sw, int H, int W) {
  const int N = in.n(), C = in.c(), O = w.c();
  const int ph = pad_lo(H, sh), pw = pad_lo(W, sw);
  TensorD out(N, O, H, W);
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) out.at(n, o, y, x) = b.empty() ? 0.0 : b[o];
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < C; ++i)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x)
          for (int o = 0; o < O; ++o)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int oy = y * sh - ph + ky, ox = x * sw - pw + kx;
                if (oy < 0 || oy >= H || ox < 0 || ox >= W) continue;
                out.at(n, o, oy, ox) += w.at(i, o, ky, kx) * in.at(n, i, y, x);
              }
  return out;
}

// 2x2 stride-2 ceil-mode max pool, first maximum wins.
inline TensorD oracle_maxpool(const TensorD& in) {
  const int OH = ceil_div(in.h(), 2), OW = ceil_div(in.w(), 2);
  TensorD out(in.n(), in.c(), OH, OW);
  for (int n = 0; n < in.n(); ++n)
    for (int c = 0; c < in.c(); ++c)
      for (int y = 0; y < OH; ++y)
        for (int x = 0; x < OW; ++x) {
          double best = -INFINITY;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int iy = 2 * y + dy, ix = 2 * x + dx;
              if (iy < in.h() && ix < in.w()) best = std::max(best, in.at(n, c, iy, ix));
            }
          out.at(n, c, y, x) = best;
        }
  return out;
}

template <typename T>
double max_abs_diff(const Tensor4<T>& a, const Tensor4<T>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("mofill-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace mofill::test

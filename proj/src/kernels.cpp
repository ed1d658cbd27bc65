#include "mofill/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mofill/simd.hpp"

namespace mofill {
namespace {

// Geometry of a strided 3x3 same-padded convolution from an in_h x in_w
// image to out_h x out_w.
struct ConvGeometry {
  int channels = 0;
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;
  int stride_h = 1, stride_w = 1;
  int pad_t = 0, pad_l = 0;

  std::size_t out_plane() const { return static_cast<std::size_t>(out_h) * out_w; }
  std::size_t in_plane() const { return static_cast<std::size_t>(in_h) * in_w; }
  std::size_t col_rows() const { return static_cast<std::size_t>(channels) * 9; }
};

ConvGeometry make_geometry(int channels, int in_h, int in_w, int stride_h, int stride_w) {
  const SamePadding ph = same_padding(in_h, stride_h);
  const SamePadding pw = same_padding(in_w, stride_w);
  return {channels, in_h, in_w, ph.out, pw.out, stride_h, stride_w, ph.pad_lo, pw.pad_lo};
}

// col[(c*9 + ky*3 + kx), oy*out_w + ox] = img[c, oy*sh - pad_t + ky, ox*sw - pad_l + kx]
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const std::size_t plane = g.out_plane();
  for (int c = 0; c < g.channels; ++c) {
    const T* src = img + static_cast<std::size_t>(c) * g.in_plane();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride_h - g.pad_t + ky;
          T* drow = dst + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(drow, drow + g.out_w, T(0));
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * g.in_w;
          if (g.stride_w == 1) {
            const int shift = kx - g.pad_l;
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox + shift;
              drow[ox] = (ix >= 0 && ix < g.in_w) ? srow[ix] : T(0);
            }
          } else {
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride_w - g.pad_l + kx;
              drow[ox] = (ix >= 0 && ix < g.in_w) ? srow[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: img += scatter(col). img must be zeroed by the caller.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* img) {
  const std::size_t plane = g.out_plane();
  for (int c = 0; c < g.channels; ++c) {
    T* dst = img + static_cast<std::size_t>(c) * g.in_plane();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride_h - g.pad_t + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* srow = src + static_cast<std::size_t>(oy) * g.out_w;
          T* drow = dst + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride_w - g.pad_l + kx;
            if (ix >= 0 && ix < g.in_w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[4];
  return buffers[slot];
}

template <typename T>
T* scratch_data(int slot, std::size_t count) {
  auto& buf = scratch<T>(slot);
  if (buf.size() < count) buf.resize(count);
  return buf.data();
}

// Stride-1 3x3 convolutions run on a zero-padded copy of the image laid out
// with row pitch w + 2. Output pixel (y, x) of the "wide" grid of h rows by
// w + 2 columns reads padded[y + ky][x + kx], so for a fixed (c, ky, kx) the
// whole grid is one contiguous run starting at a shifted row pointer and the
// GEMM can pack straight from the padded image. The last two columns of each
// wide row are junk and get dropped.
struct WideGrid {
  int h = 0, w = 0, pitch = 0;
  std::size_t plane() const { return static_cast<std::size_t>(h + 2) * pitch; }
  std::size_t cells() const { return static_cast<std::size_t>(h) * pitch; }
};

WideGrid wide_grid(int h, int w) { return WideGrid{h, w, w + 2}; }

// Two elements of slack: the last shifted run ends one past the final plane.
template <typename T>
T* pad_wide(const T* img, int channels, const WideGrid& g, T* out) {
  const std::size_t total = channels * g.plane() + 2;
  std::fill(out, out + total, T(0));
  for (int c = 0; c < channels; ++c) {
    const T* src = img + static_cast<std::size_t>(c) * g.h * g.w;
    T* dst = out + c * g.plane() + g.pitch + 1;
    for (int y = 0; y < g.h; ++y)
      std::copy(src + static_cast<std::size_t>(y) * g.w, src + static_cast<std::size_t>(y + 1) * g.w,
                dst + static_cast<std::size_t>(y) * g.pitch);
  }
  return out;
}

template <typename T>
const T* const* shifted_rows(const T* padded, int channels, const WideGrid& g) {
  thread_local std::vector<const T*> rows;
  rows.resize(static_cast<std::size_t>(channels) * 9);
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx)
        rows[c * 9 + ky * 3 + kx] = padded + c * g.plane() + ky * g.pitch + kx;
  return rows.data();
}

template <typename T>
void unwide(const T* wide, int channels, const WideGrid& g, T* out) {
  for (int c = 0; c < channels; ++c) {
    const T* src = wide + c * g.cells();
    T* dst = out + static_cast<std::size_t>(c) * g.h * g.w;
    for (int y = 0; y < g.h; ++y)
      std::copy(src + static_cast<std::size_t>(y) * g.pitch,
                src + static_cast<std::size_t>(y) * g.pitch + g.w,
                dst + static_cast<std::size_t>(y) * g.w);
  }
}

// Plain image to wide layout with zeroed junk columns.
template <typename T>
void to_wide(const T* img, int channels, const WideGrid& g, T* out) {
  for (int c = 0; c < channels; ++c) {
    const T* src = img + static_cast<std::size_t>(c) * g.h * g.w;
    T* dst = out + c * g.cells();
    for (int y = 0; y < g.h; ++y) {
      T* row = dst + static_cast<std::size_t>(y) * g.pitch;
      std::copy(src + static_cast<std::size_t>(y) * g.w, src + static_cast<std::size_t>(y + 1) * g.w,
                row);
      row[g.w] = T(0);
      row[g.w + 1] = T(0);
    }
  }
}

void check_stride(const ConvSpec& spec) {
  if (spec.stride_h < 1 || spec.stride_w < 1)
    throw ShapeError("convolution stride must be >= 1");
  if (spec.in_channels < 1 || spec.out_channels < 1)
    throw ShapeError("convolution channel counts must be >= 1");
}

template <typename T>
void check_bias(std::span<const T> bias, int channels, const char* what) {
  if (!bias.empty() && static_cast<int>(bias.size()) != channels)
    throw ShapeError(std::string(what) + ": bias has " + std::to_string(bias.size()) +
                     " entries, expected " + std::to_string(channels));
}

template <typename T>
void add_bias(Tensor4<T>& out, std::span<const T> bias) {
  if (bias.empty()) return;
  const std::size_t plane = out.shape().plane();
  for (int n = 0; n < out.n(); ++n)
    for (int c = 0; c < out.c(); ++c) {
      T* p = out.plane(n, c);
      const T b = bias[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
}

template <typename T>
void accumulate_bias_grad(const Tensor4<T>& grad_out, std::span<T> grad_bias) {
  const std::size_t plane = grad_out.shape().plane();
  for (int n = 0; n < grad_out.n(); ++n)
    for (int c = 0; c < grad_out.c(); ++c) {
      const T* p = grad_out.plane(n, c);
      T s = T(0);
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      grad_bias[c] += s;
    }
}

}  // namespace

SamePadding same_padding(int in, int stride, int kernel) {
  if (in < 1) throw ShapeError("spatial size must be >= 1, got " + std::to_string(in));
  const int out = (in + stride - 1) / stride;
  const int total = std::max((out - 1) * stride + kernel - in, 0);
  return {out, total / 2, total - total / 2};
}

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvSpec& spec,
                          const Tensor4<T>& weights, std::span<const T> bias) {
  check_stride(spec);
  if (!(weights.shape() == spec.conv_weight_shape()))
    throw ShapeError("conv2d: weights " + weights.shape().str() + " do not match spec " +
                     spec.conv_weight_shape().str());
  if (input.c() != spec.in_channels)
    throw ShapeError("conv2d: input " + input.shape().str() + " has " +
                     std::to_string(input.c()) + " channels, weights " +
                     weights.shape().str() + " expect " + std::to_string(spec.in_channels));
  check_bias(bias, spec.out_channels, "conv2d");

  const ConvGeometry g =
      make_geometry(spec.in_channels, input.h(), input.w(), spec.stride_h, spec.stride_w);
  Tensor4<T> out(input.n(), spec.out_channels, g.out_h, g.out_w);
  const int k = static_cast<int>(g.col_rows());
  if (spec.stride_h == 1 && spec.stride_w == 1) {
    const WideGrid wg = wide_grid(g.in_h, g.in_w);
    const int cells = static_cast<int>(wg.cells());
    T* padded = scratch_data<T>(0, spec.in_channels * wg.plane() + 2);
    T* wide = scratch_data<T>(1, spec.out_channels * wg.cells());
    for (int n = 0; n < input.n(); ++n) {
      pad_wide(input.sample(n), spec.in_channels, wg, padded);
      simd::gemm_rows<T>(false, spec.out_channels, cells, k, T(1), weights.data(), k,
                         shifted_rows(padded, spec.in_channels, wg), T(0), wide, cells);
      unwide(wide, spec.out_channels, wg, out.sample(n));
    }
    add_bias(out, bias);
    return out;
  }
  const int plane = static_cast<int>(g.out_plane());
  T* col = scratch_data<T>(0, g.col_rows() * g.out_plane());
  for (int n = 0; n < input.n(); ++n) {
    im2col(input.sample(n), g, col);
    simd::gemm<T>(false, false, spec.out_channels, plane, k, T(1), weights.data(), k, col,
                  plane, T(0), out.sample(n), plane);
  }
  add_bias(out, bias);
  return out;
}

template <typename T>
void conv2d_backward_into(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                          const ConvSpec& spec, const Tensor4<T>& weights,
                          Tensor4<T>* grad_input, Tensor4<T>& grad_weights,
                          std::span<T> grad_bias) {
  if (input.empty()) throw ShapeError("conv2d_backward: no cached forward input");
  check_stride(spec);
  if (!(weights.shape() == spec.conv_weight_shape()))
    throw ShapeError("conv2d_backward: weights " + weights.shape().str() +
                     " do not match spec " + spec.conv_weight_shape().str());
  const ConvGeometry g =
      make_geometry(spec.in_channels, input.h(), input.w(), spec.stride_h, spec.stride_w);
  const Shape4 expected{input.n(), spec.out_channels, g.out_h, g.out_w};
  if (!(grad_out.shape() == expected))
    throw ShapeError("conv2d_backward: grad_out " + grad_out.shape().str() +
                     " does not match forward output " + expected.str());
  require_same_shape(grad_weights.shape(), weights.shape(), "conv2d_backward grad_weights");
  if (static_cast<int>(grad_bias.size()) != spec.out_channels)
    throw ShapeError("conv2d_backward: grad_bias size mismatch");

  const int k = static_cast<int>(g.col_rows());
  if (grad_input) *grad_input = Tensor4<T>(input.shape());
  if (spec.stride_h == 1 && spec.stride_w == 1) {
    const int cin = spec.in_channels;
    const int cout = spec.out_channels;
    const WideGrid wg = wide_grid(g.in_h, g.in_w);
    const int cells = static_cast<int>(wg.cells());
    // Input gradient is a stride-1 conv of grad_out with the kernel flipped
    // spatially and its channel axes swapped.
    std::vector<T> flipped;
    if (grad_input) {
      flipped.resize(weights.size());
      for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci)
          for (int t = 0; t < 9; ++t)
            flipped[(static_cast<std::size_t>(ci) * cout + co) * 9 + (8 - t)] =
                weights.data()[(static_cast<std::size_t>(co) * cin + ci) * 9 + t];
    }
    T* padded = scratch_data<T>(0, std::max(cin, cout) * wg.plane() + 2);
    T* wide = scratch_data<T>(1, std::max(cin, cout) * wg.cells());
    for (int n = 0; n < input.n(); ++n) {
      const T* go = grad_out.sample(n);
      to_wide(go, cout, wg, wide);
      pad_wide(input.sample(n), cin, wg, padded);
      simd::gemm_rows<T>(true, cout, k, cells, T(1), wide, cells,
                         shifted_rows(padded, cin, wg), T(1), grad_weights.data(), k);
      if (grad_input) {
        pad_wide(go, cout, wg, padded);
        simd::gemm_rows<T>(false, cin, cells, cout * 9, T(1), flipped.data(), cout * 9,
                           shifted_rows(padded, cout, wg), T(0), wide, cells);
        unwide(wide, cin, wg, grad_input->sample(n));
      }
    }
    accumulate_bias_grad(grad_out, grad_bias);
    return;
  }
  const int plane = static_cast<int>(g.out_plane());
  T* col = scratch_data<T>(0, g.col_rows() * g.out_plane());
  T* gcol = grad_input ? scratch_data<T>(1, g.col_rows() * g.out_plane()) : nullptr;

  for (int n = 0; n < input.n(); ++n) {
    const T* go = grad_out.sample(n);
    im2col(input.sample(n), g, col);
    simd::gemm<T>(false, true, spec.out_channels, k, plane, T(1), go, plane, col, plane,
                  T(1), grad_weights.data(), k);
    if (grad_input) {
      simd::gemm<T>(true, false, k, plane, spec.out_channels, T(1), weights.data(), k, go,
                    plane, T(0), gcol, plane);
      col2im(gcol, g, grad_input->sample(n));
    }
  }
  accumulate_bias_grad(grad_out, grad_bias);
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                             const ConvSpec& spec, const Tensor4<T>& weights) {
  ConvGrads<T> grads{Tensor4<T>(), Tensor4<T>(weights.shape()),
                     std::vector<T>(spec.out_channels, T(0))};
  conv2d_backward_into(grad_out, input, spec, weights, &grads.input, grads.weights,
                       std::span<T>(grads.bias));
  return grads;
}

namespace {

ConvGeometry transposed_geometry(const ConvSpec& spec, const Shape4& input, Size2 target,
                                 const char* what) {
  check_stride(spec);
  if (target.h < 1 || target.w < 1)
    throw ShapeError(std::string(what) + ": target size must be positive");
  const ConvGeometry g =
      make_geometry(spec.out_channels, target.h, target.w, spec.stride_h, spec.stride_w);
  if (g.out_h != input.h || g.out_w != input.w)
    throw ShapeError(std::string(what) + ": target " + std::to_string(target.h) + "x" +
                     std::to_string(target.w) + " is incompatible with input " + input.str() +
                     " at stride " + std::to_string(spec.stride_h) + "x" +
                     std::to_string(spec.stride_w));
  return g;
}

}  // namespace

template <typename T>
Tensor4<T> convtranspose2d_forward(const Tensor4<T>& input, const ConvSpec& spec,
                                   const Tensor4<T>& weights, std::span<const T> bias,
                                   Size2 target) {
  if (!(weights.shape() == spec.transposed_weight_shape()))
    throw ShapeError("convtranspose2d: weights " + weights.shape().str() +
                     " do not match spec " + spec.transposed_weight_shape().str());
  if (input.c() != spec.in_channels)
    throw ShapeError("convtranspose2d: input " + input.shape().str() + " vs weights " +
                     weights.shape().str() + ": channel mismatch");
  check_bias(bias, spec.out_channels, "convtranspose2d");
  const ConvGeometry g = transposed_geometry(spec, input.shape(), target, "convtranspose2d");

  Tensor4<T> out(input.n(), spec.out_channels, target.h, target.w);
  const int rows = static_cast<int>(g.col_rows());
  const int plane = static_cast<int>(g.out_plane());
  T* col = scratch_data<T>(0, g.col_rows() * g.out_plane());
  for (int n = 0; n < input.n(); ++n) {
    simd::gemm<T>(true, false, rows, plane, spec.in_channels, T(1), weights.data(), rows,
                  input.sample(n), plane, T(0), col, plane);
    col2im(col, g, out.sample(n));
  }
  add_bias(out, bias);
  return out;
}

template <typename T>
void convtranspose2d_backward_into(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                                   const ConvSpec& spec, const Tensor4<T>& weights,
                                   Tensor4<T>* grad_input, Tensor4<T>& grad_weights,
                                   std::span<T> grad_bias) {
  if (input.empty()) throw ShapeError("convtranspose2d_backward: no cached forward input");
  if (!(weights.shape() == spec.transposed_weight_shape()))
    throw ShapeError("convtranspose2d_backward: weights " + weights.shape().str() +
                     " do not match spec " + spec.transposed_weight_shape().str());
  if (grad_out.n() != input.n() || grad_out.c() != spec.out_channels)
    throw ShapeError("convtranspose2d_backward: grad_out " + grad_out.shape().str() +
                     " does not match input " + input.shape().str());
  const ConvGeometry g = transposed_geometry(spec, input.shape(),
                                             Size2{grad_out.h(), grad_out.w()},
                                             "convtranspose2d_backward");
  require_same_shape(grad_weights.shape(), weights.shape(),
                     "convtranspose2d_backward grad_weights");
  if (static_cast<int>(grad_bias.size()) != spec.out_channels)
    throw ShapeError("convtranspose2d_backward: grad_bias size mismatch");

  const int rows = static_cast<int>(g.col_rows());
  const int plane = static_cast<int>(g.out_plane());
  T* col = scratch_data<T>(0, g.col_rows() * g.out_plane());
  if (grad_input) *grad_input = Tensor4<T>(input.shape());
  for (int n = 0; n < input.n(); ++n) {
    im2col(grad_out.sample(n), g, col);
    simd::gemm<T>(false, true, spec.in_channels, rows, plane, T(1), input.sample(n), plane,
                  col, plane, T(1), grad_weights.data(), rows);
    if (grad_input)
      simd::gemm<T>(false, false, spec.in_channels, plane, rows, T(1), weights.data(), rows,
                    col, plane, T(0), grad_input->sample(n), plane);
  }
  accumulate_bias_grad(grad_out, grad_bias);
}

template <typename T>
ConvGrads<T> convtranspose2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                                      const ConvSpec& spec, const Tensor4<T>& weights) {
  ConvGrads<T> grads{Tensor4<T>(), Tensor4<T>(weights.shape()),
                     std::vector<T>(spec.out_channels, T(0))};
  convtranspose2d_backward_into(grad_out, input, spec, weights, &grads.input, grads.weights,
                                std::span<T>(grads.bias));
  return grads;
}

template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor4<T>& input) {
  const Shape4 s = input.shape();
  const int oh = (s.h + 1) / 2;
  const int ow = (s.w + 1) / 2;
  PoolResult<T> result{Tensor4<T>(s.n, s.c, oh, ow), PoolIndex{s, {}}};
  result.index.argmax.resize(result.output.size());
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* src = input.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        const int y1 = std::min(2 * oy + 1, s.h - 1);
        for (int ox = 0; ox < ow; ++ox, ++o) {
          const int x1 = std::min(2 * ox + 1, s.w - 1);
          int best = 2 * oy * s.w + 2 * ox;
          T best_v = src[best];
          for (int y = 2 * oy; y <= y1; ++y)
            for (int x = 2 * ox; x <= x1; ++x) {
              const int idx = y * s.w + x;
              if (src[idx] > best_v) {
                best_v = src[idx];
                best = idx;
              }
            }
          result.output[o] = best_v;
          result.index.argmax[o] = best;
        }
      }
    }
  }
  return result;
}

template <typename T>
Tensor4<T> maxpool2d_backward(const Tensor4<T>& grad_out, const PoolIndex& index) {
  const Shape4 s = index.input_shape;
  const Shape4 expected{s.n, s.c, (s.h + 1) / 2, (s.w + 1) / 2};
  if (!(grad_out.shape() == expected))
    throw ShapeError("maxpool2d_backward: grad_out " + grad_out.shape().str() +
                     " inconsistent with pooled input " + s.str());
  if (index.argmax.size() != grad_out.size())
    throw ShapeError("maxpool2d_backward: index map has " +
                     std::to_string(index.argmax.size()) + " entries, expected " +
                     std::to_string(grad_out.size()));
  Tensor4<T> grad_in(s);
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      T* dst = grad_in.plane(n, c);
      for (int oy = 0; oy < expected.h; ++oy)
        for (int ox = 0; ox < expected.w; ++ox, ++o) {
          const int idx = index.argmax[o];
          const int y = idx / s.w;
          const int x = idx % s.w;
          if (idx < 0 || y / 2 != oy || x / 2 != ox || y >= s.h)
            throw ShapeError("maxpool2d_backward: index " + std::to_string(idx) +
                             " lies outside pooling window (" + std::to_string(oy) + "," +
                             std::to_string(ox) + ")");
          dst[idx] += grad_out[o];
        }
    }
  return grad_in;
}

template <typename T>
Tensor4<T> leaky_relu_forward(const Tensor4<T>& input, T slope) {
  Tensor4<T> out(input.shape());
  if constexpr (std::is_same_v<T, float>) {
    simd::active().leaky_relu(input.data(), out.data(), input.size(), slope);
  } else {
    for (std::size_t i = 0; i < input.size(); ++i)
      out[i] = input[i] > T(0) ? input[i] : slope * input[i];
  }
  return out;
}

template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input, T slope) {
  require_same_shape(grad_out.shape(), input.shape(), "leaky_relu_backward");
  Tensor4<T> grad_in(input.shape());
  if constexpr (std::is_same_v<T, float>) {
    simd::active().leaky_relu_backward(input.data(), grad_out.data(), grad_in.data(),
                                       input.size(), slope);
  } else {
    for (std::size_t i = 0; i < input.size(); ++i)
      grad_in[i] = input[i] > T(0) ? grad_out[i] : slope * grad_out[i];
  }
  return grad_in;
}

template <typename T>
double l1_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "l1_loss");
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  if constexpr (std::is_same_v<T, float>) {
    sum = simd::active().abs_diff_sum(pred.data(), target.data(), pred.size());
  } else {
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::fabs(pred[i] - target[i]);
  }
  return sum / static_cast<double>(pred.size());
}

template <typename T>
Tensor4<T> l1_loss_backward(const Tensor4<T>& pred, const Tensor4<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "l1_loss_backward");
  Tensor4<T> grad(pred.shape());
  const T scale = T(1) / static_cast<T>(std::max<std::size_t>(pred.size(), 1));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    grad[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
  }
  return grad;
}

#define MOFILL_INSTANTIATE_KERNELS(T)                                                      \
  template Tensor4<T> conv2d_forward<T>(const Tensor4<T>&, const ConvSpec&,                \
                                        const Tensor4<T>&, std::span<const T>);            \
  template ConvGrads<T> conv2d_backward<T>(const Tensor4<T>&, const Tensor4<T>&,           \
                                           const ConvSpec&, const Tensor4<T>&);            \
  template void conv2d_backward_into<T>(const Tensor4<T>&, const Tensor4<T>&,              \
                                        const ConvSpec&, const Tensor4<T>&, Tensor4<T>*,   \
                                        Tensor4<T>&, std::span<T>);                        \
  template Tensor4<T> convtranspose2d_forward<T>(const Tensor4<T>&, const ConvSpec&,       \
                                                 const Tensor4<T>&, std::span<const T>,    \
                                                 Size2);                                   \
  template ConvGrads<T> convtranspose2d_backward<T>(const Tensor4<T>&, const Tensor4<T>&,  \
                                                    const ConvSpec&, const Tensor4<T>&);   \
  template void convtranspose2d_backward_into<T>(const Tensor4<T>&, const Tensor4<T>&,     \
                                                 const ConvSpec&, const Tensor4<T>&,       \
                                                 Tensor4<T>*, Tensor4<T>&, std::span<T>);  \
  template PoolResult<T> maxpool2d_forward<T>(const Tensor4<T>&);                          \
  template Tensor4<T> maxpool2d_backward<T>(const Tensor4<T>&, const PoolIndex&);          \
  template Tensor4<T> leaky_relu_forward<T>(const Tensor4<T>&, T);                         \
  template Tensor4<T> leaky_relu_backward<T>(const Tensor4<T>&, const Tensor4<T>&, T);     \
  template double l1_loss<T>(const Tensor4<T>&, const Tensor4<T>&);                        \
  template Tensor4<T> l1_loss_backward<T>(const Tensor4<T>&, const Tensor4<T>&);

MOFILL_INSTANTIATE_KERNELS(float)
MOFILL_INSTANTIATE_KERNELS(double)

}  // namespace mofill

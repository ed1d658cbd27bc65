#pragma once

// Forward/backward numerical kernels for the layers of the autoencoder.
// All kernels are pure functions of their arguments.

#include <cstdint>
#include <span>
#include <vector>

#include "mofill/tensor.hpp"

namespace mofill {

inline constexpr int kKernelSize = 3;

// 3x3 convolution with symmetric-same zero padding. For conv2d the weights
// are (out_channels, in_channels, 3, 3). For convtranspose2d they are
// (in_channels, out_channels, 3, 3), i.e. the same tensor as the strided
// conv2d it is the adjoint of.
struct ConvSpec {
  int out_channels = 0;
  int in_channels = 0;
  int stride_h = 1;
  int stride_w = 1;

  Shape4 conv_weight_shape() const { return {out_channels, in_channels, 3, 3}; }
  Shape4 transposed_weight_shape() const { return {in_channels, out_channels, 3, 3}; }
};

// Output size ceil(in / stride); total padding max((out-1)*stride + k - in, 0)
// with the odd pixel on the high side.
struct SamePadding {
  int out = 0;
  int pad_lo = 0;
  int pad_hi = 0;
};
SamePadding same_padding(int in, int stride, int kernel = kKernelSize);

template <typename T>
struct ConvGrads {
  Tensor4<T> input;
  Tensor4<T> weights;
  std::vector<T> bias;
};

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvSpec& spec,
                          const Tensor4<T>& weights, std::span<const T> bias);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                             const ConvSpec& spec, const Tensor4<T>& weights);

// Accumulates into grad_weights/grad_bias; writes grad_input when non-null.
template <typename T>
void conv2d_backward_into(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                          const ConvSpec& spec, const Tensor4<T>& weights,
                          Tensor4<T>* grad_input, Tensor4<T>& grad_weights,
                          std::span<T> grad_bias);

// `target` is the spatial size of the output; it must satisfy
// ceil(target / stride) == input size in each dimension.
template <typename T>
Tensor4<T> convtranspose2d_forward(const Tensor4<T>& input, const ConvSpec& spec,
                                   const Tensor4<T>& weights, std::span<const T> bias,
                                   Size2 target);

template <typename T>
ConvGrads<T> convtranspose2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                                      const ConvSpec& spec, const Tensor4<T>& weights);

template <typename T>
void convtranspose2d_backward_into(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                                   const ConvSpec& spec, const Tensor4<T>& weights,
                                   Tensor4<T>* grad_input, Tensor4<T>& grad_weights,
                                   std::span<T> grad_bias);

// Arg-max positions of a 2x2/stride-2 ceil-mode max pool. Each entry is the
// flat (h*w) index inside the corresponding input plane.
struct PoolIndex {
  Shape4 input_shape;
  std::vector<std::int32_t> argmax;
};

template <typename T>
struct PoolResult {
  Tensor4<T> output;
  PoolIndex index;
};

template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor4<T>& input);

template <typename T>
Tensor4<T> maxpool2d_backward(const Tensor4<T>& grad_out, const PoolIndex& index);

template <typename T>
Tensor4<T> leaky_relu_forward(const Tensor4<T>& input, T slope);

template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input, T slope);

// Mean absolute error over all entries.
template <typename T>
double l1_loss(const Tensor4<T>& pred, const Tensor4<T>& target);

// sign(pred - target) / count, with sign(0) = 0.
template <typename T>
Tensor4<T> l1_loss_backward(const Tensor4<T>& pred, const Tensor4<T>& target);

}  // namespace mofill

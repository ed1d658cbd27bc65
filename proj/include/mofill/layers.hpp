#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mofill/kernels.hpp"
#include "mofill/tensor.hpp"

namespace mofill {

struct OptimConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// Trainable parameters of one convolution layer plus its Adam state.
template <typename T>
struct LayerParams {
  std::string name;
  Tensor4<T> weights;
  std::vector<T> bias;
  Tensor4<T> adam_m;
  Tensor4<T> adam_v;
  std::vector<T> adam_m_bias;
  std::vector<T> adam_v_bias;
  std::int64_t step = 0;

  LayerParams() = default;
  LayerParams(std::string layer_name, Tensor4<T> w, std::vector<T> b);

  std::size_t parameter_count() const { return weights.size() + bias.size(); }
};

template <typename T>
struct LayerGrads {
  Tensor4<T> weights;
  std::vector<T> bias;

  LayerGrads() = default;
  explicit LayerGrads(const LayerParams<T>& params)
      : weights(params.weights.shape()), bias(params.bias.size(), T(0)) {}

  void zero();
  void add(const LayerGrads& other);
  void scale(T factor);
};

// Uniform samples in +-sqrt(6 / (fan_in + fan_out)) with
// fan_in = shape.c * kh * kw and fan_out = shape.n * kh * kw.
template <typename T>
Tensor4<T> xavier_init(Shape4 shape, std::uint64_t seed);

double xavier_bound(Shape4 shape);

// Bias-corrected Adam. Rejects non-finite gradients, naming the layer.
template <typename T>
void adam_step(LayerParams<T>& params, const LayerGrads<T>& grads, const OptimConfig& config);

// ---------------------------------------------------------------------------
// Sequential stacks of blocks.

enum class BlockKind { conv, conv_transpose, leaky_relu, max_pool };

struct Block {
  BlockKind kind = BlockKind::conv;
  int param = -1;            // conv, conv_transpose: parameter index
  int stride = 1;            // conv, conv_transpose
  int level = -1;            // conv_transpose: which recorded size to restore
  bool record_size = false;  // max_pool, strided conv: push input size
  double slope = 0.2;        // leaky_relu

  static Block conv(int param, int stride = 1);
  static Block conv_transpose(int param, int level, int stride = 2);
  static Block leaky_relu(double slope);
  static Block max_pool();
};

// Activations kept by stack_forward for an exact backward pass.
template <typename T>
struct StackCache {
  std::vector<Tensor4<T>> inputs;  // per block; empty for max_pool
  std::vector<PoolIndex> pools;    // per block; only filled for max_pool
  bool valid = false;
};

// Runs blocks in order. Blocks flagged record_size append their input size to
// `sizes`; conv_transpose blocks read sizes[level] as their output size.
template <typename T>
Tensor4<T> stack_forward(std::span<const Block> blocks, std::span<const LayerParams<T>> params,
                         const Tensor4<T>& input, std::vector<Size2>& sizes,
                         StackCache<T>* cache);

// Accumulates parameter gradients into `grads` (indexed like params) and
// returns the gradient w.r.t. the stack input (empty if !need_input_grad).
template <typename T>
Tensor4<T> stack_backward(std::span<const Block> blocks, std::span<const LayerParams<T>> params,
                          const StackCache<T>& cache, const Tensor4<T>& grad_out,
                          std::span<LayerGrads<T>> grads, bool need_input_grad = true);

}  // namespace mofill

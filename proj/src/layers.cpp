#include "mofill/layers.hpp"

#include <cmath>
#include <string>

#include "mofill/random.hpp"
#include "mofill/simd.hpp"

namespace mofill {

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw UsageError("Adam betas must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw UsageError("Adam epsilon must be > 0");
}

template <typename T>
LayerParams<T>::LayerParams(std::string layer_name, Tensor4<T> w, std::vector<T> b)
    : name(std::move(layer_name)),
      weights(std::move(w)),
      bias(std::move(b)),
      adam_m(weights.shape()),
      adam_v(weights.shape()),
      adam_m_bias(bias.size(), T(0)),
      adam_v_bias(bias.size(), T(0)) {}

template <typename T>
void LayerGrads<T>::zero() {
  weights.fill(T(0));
  std::fill(bias.begin(), bias.end(), T(0));
}

template <typename T>
void LayerGrads<T>::add(const LayerGrads& other) {
  require_same_shape(weights.shape(), other.weights.shape(), "LayerGrads::add");
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] += other.weights[i];
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += other.bias[i];
}

template <typename T>
void LayerGrads<T>::scale(T factor) {
  for (auto& v : weights.values()) v *= factor;
  for (auto& v : bias) v *= factor;
}

double xavier_bound(Shape4 shape) {
  const double receptive = static_cast<double>(shape.h) * shape.w;
  const double fan_in = shape.c * receptive;
  const double fan_out = shape.n * receptive;
  return std::sqrt(6.0 / (fan_in + fan_out));
}

template <typename T>
Tensor4<T> xavier_init(Shape4 shape, std::uint64_t seed) {
  Tensor4<T> w(shape);
  const double bound = xavier_bound(shape);
  Rng rng(seed);
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return w;
}

namespace {

template <typename T>
void adam_scalar(T* p, T* m, T* v, const T* g, std::size_t n, T b1, T b2, T step, T vc,
                 T eps) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * (g[i] * g[i]);
    p[i] -= step * m[i] / (std::sqrt(v[i] * vc) + eps);
  }
}

}  // namespace

template <typename T>
void adam_step(LayerParams<T>& params, const LayerGrads<T>& grads, const OptimConfig& config) {
  require_same_shape(params.weights.shape(), grads.weights.shape(), "adam_step");
  if (params.bias.size() != grads.bias.size())
    throw ShapeError("adam_step: bias gradient size mismatch for layer " + params.name);
  if (!all_finite<T>(grads.weights.values()) || !all_finite<T>(std::span<const T>(grads.bias)))
    throw DataError("adam_step: non-finite gradient in layer " + params.name);

  params.step += 1;
  const double t = static_cast<double>(params.step);
  const T step_size =
      static_cast<T>(config.learning_rate / (1.0 - std::pow(config.beta1, t)));
  const T v_correction = static_cast<T>(1.0 / (1.0 - std::pow(config.beta2, t)));
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T eps = static_cast<T>(config.epsilon);

  if constexpr (std::is_same_v<T, float>) {
    const auto& k = simd::active();
    k.adam_update(params.weights.data(), params.adam_m.data(), params.adam_v.data(),
                  grads.weights.data(), params.weights.size(), b1, b2, step_size,
                  v_correction, eps);
    k.adam_update(params.bias.data(), params.adam_m_bias.data(), params.adam_v_bias.data(),
                  grads.bias.data(), params.bias.size(), b1, b2, step_size, v_correction, eps);
  } else {
    adam_scalar(params.weights.data(), params.adam_m.data(), params.adam_v.data(),
                grads.weights.data(), params.weights.size(), b1, b2, step_size, v_correction,
                eps);
    adam_scalar(params.bias.data(), params.adam_m_bias.data(), params.adam_v_bias.data(),
                grads.bias.data(), params.bias.size(), b1, b2, step_size, v_correction, eps);
  }
}

Block Block::conv(int param, int stride) {
  Block b;
  b.kind = BlockKind::conv;
  b.param = param;
  b.stride = stride;
  b.record_size = stride > 1;
  return b;
}

Block Block::conv_transpose(int param, int level, int stride) {
  Block b;
  b.kind = BlockKind::conv_transpose;
  b.param = param;
  b.level = level;
  b.stride = stride;
  return b;
}

Block Block::leaky_relu(double slope) {
  Block b;
  b.kind = BlockKind::leaky_relu;
  b.slope = slope;
  return b;
}

Block Block::max_pool() {
  Block b;
  b.kind = BlockKind::max_pool;
  b.record_size = true;
  return b;
}

namespace {

template <typename T>
const LayerParams<T>& param_for(const Block& block, std::span<const LayerParams<T>> params,
                                std::size_t index) {
  if (block.param < 0 || static_cast<std::size_t>(block.param) >= params.size())
    throw ShapeError("block " + std::to_string(index) + " references missing parameter " +
                     std::to_string(block.param));
  return params[block.param];
}

ConvSpec conv_spec(const Shape4& w, int stride) {
  return ConvSpec{w.n, w.c, stride, stride};
}

ConvSpec transposed_spec(const Shape4& w, int stride) {
  return ConvSpec{w.c, w.n, stride, stride};
}

}  // namespace

template <typename T>
Tensor4<T> stack_forward(std::span<const Block> blocks, std::span<const LayerParams<T>> params,
                         const Tensor4<T>& input, std::vector<Size2>& sizes,
                         StackCache<T>* cache) {
  if (cache) {
    cache->inputs.assign(blocks.size(), Tensor4<T>());
    cache->pools.assign(blocks.size(), PoolIndex{});
    cache->valid = false;
  }
  Tensor4<T> x = input;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    if (b.record_size) sizes.push_back(Size2{x.h(), x.w()});
    Tensor4<T> y;
    switch (b.kind) {
      case BlockKind::conv: {
        const auto& p = param_for(b, params, i);
        y = conv2d_forward<T>(x, conv_spec(p.weights.shape(), b.stride), p.weights, p.bias);
        break;
      }
      case BlockKind::conv_transpose: {
        const auto& p = param_for(b, params, i);
        if (b.level < 0 || static_cast<std::size_t>(b.level) >= sizes.size())
          throw ShapeError("conv_transpose block " + std::to_string(i) +
                           " has no recorded size for level " + std::to_string(b.level));
        y = convtranspose2d_forward<T>(x, transposed_spec(p.weights.shape(), b.stride),
                                       p.weights, p.bias, sizes[b.level]);
        break;
      }
      case BlockKind::leaky_relu:
        y = leaky_relu_forward<T>(x, static_cast<T>(b.slope));
        break;
      case BlockKind::max_pool: {
        auto pooled = maxpool2d_forward<T>(x);
        if (cache) cache->pools[i] = std::move(pooled.index);
        y = std::move(pooled.output);
        break;
      }
    }
    if (cache && b.kind != BlockKind::max_pool) cache->inputs[i] = std::move(x);
    x = std::move(y);
  }
  if (cache) cache->valid = true;
  return x;
}

template <typename T>
Tensor4<T> stack_backward(std::span<const Block> blocks, std::span<const LayerParams<T>> params,
                          const StackCache<T>& cache, const Tensor4<T>& grad_out,
                          std::span<LayerGrads<T>> grads, bool need_input_grad) {
  if (!cache.valid || cache.inputs.size() != blocks.size())
    throw ShapeError("stack_backward called without a cached forward pass");
  if (grads.size() != params.size())
    throw ShapeError("stack_backward: gradient list does not match parameter list");

  Tensor4<T> g = grad_out;
  for (std::size_t r = blocks.size(); r-- > 0;) {
    const Block& b = blocks[r];
    const bool want_input = need_input_grad || r > 0;
    Tensor4<T> next;
    switch (b.kind) {
      case BlockKind::conv: {
        const auto& p = param_for(b, params, r);
        auto& pg = grads[b.param];
        conv2d_backward_into<T>(g, cache.inputs[r], conv_spec(p.weights.shape(), b.stride),
                                p.weights, want_input ? &next : nullptr, pg.weights,
                                std::span<T>(pg.bias));
        break;
      }
      case BlockKind::conv_transpose: {
        const auto& p = param_for(b, params, r);
        auto& pg = grads[b.param];
        convtranspose2d_backward_into<T>(g, cache.inputs[r],
                                         transposed_spec(p.weights.shape(), b.stride),
                                         p.weights, want_input ? &next : nullptr, pg.weights,
                                         std::span<T>(pg.bias));
        break;
      }
      case BlockKind::leaky_relu:
        next = leaky_relu_backward<T>(g, cache.inputs[r], static_cast<T>(b.slope));
        break;
      case BlockKind::max_pool:
        next = maxpool2d_backward<T>(g, cache.pools[r]);
        break;
    }
    g = std::move(next);
  }
  return g;
}

#define MOFILL_INSTANTIATE_LAYERS(T)                                                         \
  template struct LayerParams<T>;                                                            \
  template struct LayerGrads<T>;                                                             \
  template Tensor4<T> xavier_init<T>(Shape4, std::uint64_t);                                 \
  template void adam_step<T>(LayerParams<T>&, const LayerGrads<T>&, const OptimConfig&);     \
  template Tensor4<T> stack_forward<T>(std::span<const Block>,                               \
                                       std::span<const LayerParams<T>>, const Tensor4<T>&,   \
                                       std::vector<Size2>&, StackCache<T>*);                 \
  template Tensor4<T> stack_backward<T>(std::span<const Block>,                              \
                                        std::span<const LayerParams<T>>,                     \
                                        const StackCache<T>&, const Tensor4<T>&,             \
                                        std::span<LayerGrads<T>>, bool);

MOFILL_INSTANTIATE_LAYERS(float)
MOFILL_INSTANTIATE_LAYERS(double)

}  // namespace mofill

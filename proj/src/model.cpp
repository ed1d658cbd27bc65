#include "mofill/model.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <string>

#include "mofill/error.hpp"
#include "mofill/random.hpp"

namespace mofill {

void ModelConfig::validate() const {
  for (int c : channels)
    if (c <= 0) throw UsageError("channel counts must be positive");
  if (channels.back() != 256)
    throw UsageError("last unit must have 256 channels, got " + std::to_string(channels.back()));
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
    throw UsageError("leaky slope must lie in [0, 1)");
  if (input_rows <= 0) throw UsageError("input rows must be positive");
}

namespace {

int in_channels(const ModelConfig& config, int unit) {
  return unit == 1 ? 1 : config.channels[unit - 2];
}

int add_layer(ModelLayout& layout, std::string name, Shape4 shape, int bias) {
  layout.layers.push_back(LayerSpec{std::move(name), shape, bias});
  return static_cast<int>(layout.layers.size()) - 1;
}

}  // namespace

ModelLayout make_layout(const ModelConfig& config) {
  config.validate();
  ModelLayout layout;
  const double slope = config.leaky_slope;
  const auto& ch = config.channels;

  if (config.architecture == Architecture::full) {
    for (int u = 1; u <= kEncodingUnits; ++u) {
      const int cin = in_channels(config, u);
      const int cout = ch[u - 1];
      const std::string base = "enc" + std::to_string(u);
      const int a = add_layer(layout, base + ".conv1", {cout, cin, 3, 3}, cout);
      const int b = add_layer(layout, base + ".conv2", {cout, cout, 3, 3}, cout);
      layout.encoder.push_back(Block::conv(a));
      layout.encoder.push_back(Block::leaky_relu(slope));
      layout.encoder.push_back(Block::conv(b));
      layout.encoder.push_back(Block::leaky_relu(slope));
      layout.encoder.push_back(Block::max_pool());
    }
    for (int u = kEncodingUnits; u >= 1; --u) {
      const int cin = ch[u - 1];
      // unit 1 keeps its width through the transposed conv and maps to one
      // channel in the final conv
      const int mid = u == 1 ? ch[0] : ch[u - 2];
      const int cout = u == 1 ? 1 : mid;
      const std::string base = "dec" + std::to_string(u);
      const int a = add_layer(layout, base + ".deconv", {cin, mid, 3, 3}, mid);
      const int b = add_layer(layout, base + ".conv", {cout, mid, 3, 3}, cout);
      layout.decoder.push_back(Block::conv_transpose(a, u - 1));
      layout.decoder.push_back(Block::leaky_relu(slope));
      layout.decoder.push_back(Block::conv(b));
      if (u != 1) layout.decoder.push_back(Block::leaky_relu(slope));
    }
  } else {
    for (int u = 1; u <= kEncodingUnits; ++u) {
      const int cin = in_channels(config, u);
      const int cout = ch[u - 1];
      const int a = add_layer(layout, "enc" + std::to_string(u) + ".conv", {cout, cin, 3, 3}, cout);
      layout.encoder.push_back(Block::conv(a, 2));
      layout.encoder.push_back(Block::leaky_relu(slope));
    }
    for (int u = kEncodingUnits; u >= 1; --u) {
      const int cin = ch[u - 1];
      const int cout = in_channels(config, u);
      const int a =
          add_layer(layout, "dec" + std::to_string(u) + ".deconv", {cin, cout, 3, 3}, cout);
      layout.decoder.push_back(Block::conv_transpose(a, u - 1));
      if (u != 1) layout.decoder.push_back(Block::leaky_relu(slope));
    }
  }
  return layout;
}

int receptive_field(const ModelConfig& config) {
  const ModelLayout layout = make_layout(config);
  int rf = 1;
  int jump = 1;
  for (const Block& b : layout.encoder) {
    if (b.kind == BlockKind::conv) {
      rf += (kKernelSize - 1) * jump;
      jump *= b.stride;
    } else if (b.kind == BlockKind::max_pool) {
      rf += jump;
      jump *= 2;
    }
  }
  return rf;
}

template <typename T>
std::size_t ModelWeights<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

template <typename T>
template <typename U>
ModelWeights<U> ModelWeights<T>::cast() const {
  ModelWeights<U> out;
  out.config = config;
  out.layers.reserve(layers.size());
  for (const auto& l : layers) {
    std::vector<U> bias(l.bias.begin(), l.bias.end());
    LayerParams<U> p(l.name, l.weights.template cast<U>(), std::move(bias));
    p.adam_m = l.adam_m.template cast<U>();
    p.adam_v = l.adam_v.template cast<U>();
    p.adam_m_bias.assign(l.adam_m_bias.begin(), l.adam_m_bias.end());
    p.adam_v_bias.assign(l.adam_v_bias.begin(), l.adam_v_bias.end());
    p.step = l.step;
    out.layers.push_back(std::move(p));
  }
  return out;
}

template <typename T>
ModelWeights<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  const ModelLayout layout = make_layout(config);
  ModelWeights<T> w;
  w.config = config;
  for (std::size_t i = 0; i < layout.layers.size(); ++i) {
    const LayerSpec& s = layout.layers[i];
    w.layers.emplace_back(s.name, xavier_init<T>(s.weight_shape, derive_seed(seed, i)),
                          std::vector<T>(s.bias_size, T(0)));
  }
  return w;
}

namespace {

template <typename T>
void check_weights(const ModelWeights<T>& weights, const ModelLayout& layout) {
  if (weights.layers.size() != layout.layers.size())
    throw ShapeError("model has " + std::to_string(weights.layers.size()) +
                     " layers, layout expects " + std::to_string(layout.layers.size()));
  for (std::size_t i = 0; i < layout.layers.size(); ++i) {
    const auto& s = layout.layers[i];
    const auto& l = weights.layers[i];
    if (!(l.weights.shape() == s.weight_shape) ||
        l.bias.size() != static_cast<std::size_t>(s.bias_size))
      throw ShapeError("layer " + s.name + ": expected weights " + s.weight_shape.str() +
                       ", got " + l.weights.shape().str());
  }
}

template <typename T>
void check_input(const Tensor4<T>& x, const ModelConfig& config) {
  if (x.c() != 1 || x.h() != config.input_rows || x.n() < 1 || x.w() < 1)
    throw ShapeError("model input must be n x 1 x " + std::to_string(config.input_rows) +
                     " x W, got " + x.shape().str());
}

Size2 halved(Size2 s) { return Size2{(s.h + 1) / 2, (s.w + 1) / 2}; }

}  // namespace

template <typename T>
EncodeResult<T> encode(const Tensor4<T>& x, const ModelWeights<T>& weights) {
  check_input(x, weights.config);
  const ModelLayout layout = make_layout(weights.config);
  check_weights(weights, layout);
  EncodeResult<T> r;
  r.plan.frames = x.w();
  r.plan.padded_frames = x.w();
  r.bottleneck = stack_forward<T>(layout.encoder, weights.layers, x, r.plan.level_sizes, nullptr);
  return r;
}

template <typename T>
Tensor4<T> decode(const Tensor4<T>& bottleneck, const PadPlan& plan,
                  const ModelWeights<T>& weights) {
  const ModelLayout layout = make_layout(weights.config);
  check_weights(weights, layout);
  if (plan.level_sizes.size() != static_cast<std::size_t>(kEncodingUnits))
    throw ShapeError("decode: pad plan has " + std::to_string(plan.level_sizes.size()) +
                     " level sizes, expected " + std::to_string(kEncodingUnits));
  const Size2 expect = halved(plan.level_sizes.back());
  if (bottleneck.h() != expect.h || bottleneck.w() != expect.w)
    throw ShapeError("decode: bottleneck " + bottleneck.shape().str() +
                     " does not match the recorded encoder sizes");
  std::vector<Size2> sizes = plan.level_sizes;
  return stack_forward<T>(layout.decoder, weights.layers, bottleneck, sizes, nullptr);
}

template <typename T>
Tensor4<T> model_forward(const ModelWeights<T>& weights, const Tensor4<T>& x,
                         ForwardCache<T>* cache) {
  check_input(x, weights.config);
  const ModelLayout layout = make_layout(weights.config);
  check_weights(weights, layout);
  PadPlan plan;
  plan.frames = x.w();
  plan.padded_frames = x.w();
  Tensor4<T> z = stack_forward<T>(layout.encoder, weights.layers, x, plan.level_sizes,
                                  cache ? &cache->encoder : nullptr);
  std::vector<Size2> sizes = plan.level_sizes;
  Tensor4<T> y = stack_forward<T>(layout.decoder, weights.layers, z, sizes,
                                  cache ? &cache->decoder : nullptr);
  if (cache) cache->plan = std::move(plan);
  return y;
}

template <typename T>
void model_backward(const ModelWeights<T>& weights, const ForwardCache<T>& cache,
                    const Tensor4<T>& grad_out, std::vector<LayerGrads<T>>& grads,
                    Tensor4<T>* grad_input) {
  const ModelLayout layout = make_layout(weights.config);
  check_weights(weights, layout);
  if (grads.size() != weights.layers.size())
    throw ShapeError("model_backward: gradient list does not match the model");
  std::span<const LayerParams<T>> params(weights.layers);
  Tensor4<T> g = stack_backward<T>(layout.decoder, params, cache.decoder, grad_out, grads, true);
  g = stack_backward<T>(layout.encoder, params, cache.encoder, g, grads, grad_input != nullptr);
  if (grad_input) *grad_input = std::move(g);
}

template <typename T>
std::vector<LayerGrads<T>> make_grads(const ModelWeights<T>& weights) {
  std::vector<LayerGrads<T>> grads;
  grads.reserve(weights.layers.size());
  for (const auto& l : weights.layers) grads.emplace_back(l);
  return grads;
}

int padded_length(int frames, PadMode mode) {
  if (frames < 1) throw ShapeError("sequence must have at least one frame");
  if (mode == PadMode::minimal) return frames;
  constexpr int kMultiple = 1 << kEncodingUnits;
  return (frames + kMultiple - 1) / kMultiple * kMultiple;
}

template <typename T>
Tensor4<T> pad_for_depth(const Tensor4<T>& x, PadMode mode, PadPlan& plan) {
  const int frames = x.w();
  const int padded = padded_length(frames, mode);
  plan = PadPlan{};
  plan.frames = frames;
  plan.padded_frames = padded;
  if (padded == frames) return x;
  Tensor4<T> out(Shape4{x.n(), x.c(), x.h(), padded});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int h = 0; h < x.h(); ++h) {
        const T* src = &x.at(n, c, h, 0);
        T* dst = &out.at(n, c, h, 0);
        std::copy(src, src + frames, dst);
        std::fill(dst + frames, dst + padded, src[frames - 1]);
      }
  return out;
}

template <typename T>
Tensor4<T> crop_frames(const Tensor4<T>& x, int frames) {
  if (frames < 1 || frames > x.w())
    throw ShapeError("cannot crop " + x.shape().str() + " to " + std::to_string(frames) +
                     " frames");
  if (frames == x.w()) return x;
  Tensor4<T> out(Shape4{x.n(), x.c(), x.h(), frames});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int h = 0; h < x.h(); ++h) {
        const T* src = &x.at(n, c, h, 0);
        std::copy(src, src + frames, &out.at(n, c, h, 0));
      }
  return out;
}

template <typename T>
Tensor4<T> forward(const Tensor4<T>& x, const ModelWeights<T>& weights, PadMode mode) {
  PadPlan plan;
  const Tensor4<T> padded = pad_for_depth(x, mode, plan);
  return crop_frames(model_forward(weights, padded), plan.frames);
}

// ---------------------------------------------------------------------------
// Weight files.

namespace {

constexpr std::string_view kWeightsMagic = "MOFW";
constexpr const char* kMetaEntry = "meta";

ArchiveEntry tensor_entry(const std::string& name, const Tensor4<float>& t) {
  const Shape4 s = t.shape();
  return ArchiveEntry{name,
                      {std::uint32_t(s.n), std::uint32_t(s.c), std::uint32_t(s.h), std::uint32_t(s.w)},
                      std::vector<float>(t.data(), t.data() + t.size())};
}

ArchiveEntry vector_entry(const std::string& name, const std::vector<float>& v) {
  return ArchiveEntry{name, {std::uint32_t(v.size())}, v};
}

}  // namespace

std::vector<std::uint8_t> serialize_weights(const ModelWeights<float>& weights) {
  const ModelLayout layout = make_layout(weights.config);
  check_weights(weights, layout);
  std::vector<ArchiveEntry> entries;
  entries.push_back(vector_entry(
      kMetaEntry, {static_cast<float>(weights.config.leaky_slope),
                   weights.config.architecture == Architecture::full ? 0.0f : 1.0f,
                   static_cast<float>(weights.config.input_rows)}));
  for (const auto& l : weights.layers) {
    entries.push_back(tensor_entry(l.name + ".weight", l.weights));
    entries.push_back(vector_entry(l.name + ".bias", l.bias));
  }
  return encode_archive(kWeightsMagic, entries);
}

ModelWeights<float> deserialize_weights(const std::vector<std::uint8_t>& bytes,
                                        const std::string& origin) {
  const std::vector<ArchiveEntry> entries = decode_archive(bytes, kWeightsMagic, origin);
  auto find = [&](const std::string& name) -> const ArchiveEntry& {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw DataError(origin + ": missing entry " + name);
  };

  const ArchiveEntry& meta = find(kMetaEntry);
  if (meta.data.size() != 3) throw DataError(origin + ": malformed meta entry");
  ModelConfig config;
  config.leaky_slope = std::round(double(meta.data[0]) * 1e6) / 1e6;
  if (meta.data[1] == 0.0f) config.architecture = Architecture::full;
  else if (meta.data[1] == 1.0f) config.architecture = Architecture::vanilla;
  else throw DataError(origin + ": unknown architecture code in meta entry");
  config.input_rows = static_cast<int>(meta.data[2]);

  const char* first = config.architecture == Architecture::full ? ".conv1.weight" : ".conv.weight";
  for (int u = 1; u <= kEncodingUnits; ++u) {
    const std::string name = "enc" + std::to_string(u) + first;
    const ArchiveEntry& e = find(name);
    if (e.dims.size() != 4)
      throw DataError(origin + ": layer enc" + std::to_string(u) + " entry " + name +
                      " at offset " + std::to_string(e.offset) + " is not rank 4");
    config.channels[u - 1] = static_cast<int>(e.dims[0]);
  }
  try {
    config.validate();
  } catch (const Error& ex) {
    throw DataError(origin + ": invalid model description: " + ex.what());
  }

  const ModelLayout layout = make_layout(config);
  ModelWeights<float> w;
  w.config = config;
  for (const auto& spec : layout.layers) {
    const ArchiveEntry& we = find(spec.name + ".weight");
    const ArchiveEntry& be = find(spec.name + ".bias");
    const Shape4 s = spec.weight_shape;
    const std::vector<std::uint32_t> wdims{std::uint32_t(s.n), std::uint32_t(s.c),
                                           std::uint32_t(s.h), std::uint32_t(s.w)};
    if (we.dims != wdims)
      throw DataError(origin + ": layer " + spec.name + " (offset " +
                      std::to_string(we.offset) + ") has the wrong weight shape, expected " +
                      s.str());
    if (be.dims != std::vector<std::uint32_t>{std::uint32_t(spec.bias_size)})
      throw DataError(origin + ": layer " + spec.name + " (offset " +
                      std::to_string(be.offset) + ") has the wrong bias size, expected " +
                      std::to_string(spec.bias_size));
    Tensor4<float> t(s);
    std::copy(we.data.begin(), we.data.end(), t.data());
    if (!all_finite<float>(t.values()) || !all_finite<float>(std::span<const float>(be.data)))
      throw DataError(origin + ": layer " + spec.name + " contains non-finite values");
    w.layers.emplace_back(spec.name, std::move(t), be.data);
  }
  if (entries.size() != 2 * layout.layers.size() + 1)
    throw DataError(origin + ": expected " + std::to_string(2 * layout.layers.size() + 1) +
                    " entries, found " + std::to_string(entries.size()));
  return w;
}

void save_weights(const ModelWeights<float>& weights, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_weights(weights));
}

ModelWeights<float> load_weights(const std::filesystem::path& path) {
  return deserialize_weights(read_file_bytes(path), path.string());
}

#define MOFILL_INSTANTIATE_MODEL(T)                                                          \
  template struct ModelWeights<T>;                                                           \
  template ModelWeights<T> build_model<T>(const ModelConfig&, std::uint64_t);                \
  template EncodeResult<T> encode<T>(const Tensor4<T>&, const ModelWeights<T>&);             \
  template Tensor4<T> decode<T>(const Tensor4<T>&, const PadPlan&, const ModelWeights<T>&);  \
  template Tensor4<T> model_forward<T>(const ModelWeights<T>&, const Tensor4<T>&,            \
                                       ForwardCache<T>*);                                    \
  template void model_backward<T>(const ModelWeights<T>&, const ForwardCache<T>&,            \
                                  const Tensor4<T>&, std::vector<LayerGrads<T>>&,            \
                                  Tensor4<T>*);                                              \
  template std::vector<LayerGrads<T>> make_grads<T>(const ModelWeights<T>&);                 \
  template Tensor4<T> pad_for_depth<T>(const Tensor4<T>&, PadMode, PadPlan&);                \
  template Tensor4<T> crop_frames<T>(const Tensor4<T>&, int);                                \
  template Tensor4<T> forward<T>(const Tensor4<T>&, const ModelWeights<T>&, PadMode);

MOFILL_INSTANTIATE_MODEL(float)
MOFILL_INSTANTIATE_MODEL(double)

template ModelWeights<double> ModelWeights<float>::cast<double>() const;
template ModelWeights<float> ModelWeights<double>::cast<float>() const;
template ModelWeights<float> ModelWeights<float>::cast<float>() const;

}  // namespace mofill

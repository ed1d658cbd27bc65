#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mofill/io.hpp"
#include "mofill/layers.hpp"
#include "mofill/tensor.hpp"

namespace mofill {

inline constexpr int kEncodingUnits = 5;

enum class Architecture {
  full,     // two 3x3 convs + max-pool per encoding unit
  vanilla,  // one stride-2 3x3 conv per encoding unit
};

struct ModelConfig {
  std::array<int, kEncodingUnits> channels{16, 32, 64, 128, 256};
  double leaky_slope = 0.2;
  int input_rows = 69;
  Architecture architecture = Architecture::full;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LayerSpec {
  std::string name;
  Shape4 weight_shape;
  int bias_size = 0;
};

// Block wiring and parameter shapes derived from a config.
struct ModelLayout {
  std::vector<LayerSpec> layers;
  std::vector<Block> encoder;
  std::vector<Block> decoder;
};

ModelLayout make_layout(const ModelConfig& config);

// Bottleneck receptive field (in input pixels along one axis).
int receptive_field(const ModelConfig& config);

template <typename T>
struct ModelWeights {
  ModelConfig config;
  std::vector<LayerParams<T>> layers;

  std::size_t parameter_count() const;
  template <typename U>
  ModelWeights<U> cast() const;
};

template <typename T>
ModelWeights<T> build_model(const ModelConfig& config, std::uint64_t seed);

enum class PadMode {
  minimal,         // no temporal padding; the recorded sizes invert ceil-halving
  multiple_of_32,  // edge-replicate up to the next multiple of 2^5
};

// Per-level sizes recorded while encoding, plus the temporal padding applied.
struct PadPlan {
  int frames = 0;         // original temporal length
  int padded_frames = 0;  // length fed to the network
  std::vector<Size2> level_sizes;
};

template <typename T>
struct EncodeResult {
  Tensor4<T> bottleneck;
  PadPlan plan;
};

template <typename T>
struct ForwardCache {
  StackCache<T> encoder;
  StackCache<T> decoder;
  PadPlan plan;
};

template <typename T>
EncodeResult<T> encode(const Tensor4<T>& x, const ModelWeights<T>& weights);

template <typename T>
Tensor4<T> decode(const Tensor4<T>& bottleneck, const PadPlan& plan,
                  const ModelWeights<T>& weights);

// encode + decode on an n x 1 x rows x W tensor (no padding or cropping).
template <typename T>
Tensor4<T> model_forward(const ModelWeights<T>& weights, const Tensor4<T>& x,
                         ForwardCache<T>* cache = nullptr);

// Accumulates parameter gradients; optionally returns the input gradient.
template <typename T>
void model_backward(const ModelWeights<T>& weights, const ForwardCache<T>& cache,
                    const Tensor4<T>& grad_out, std::vector<LayerGrads<T>>& grads,
                    Tensor4<T>* grad_input = nullptr);

template <typename T>
std::vector<LayerGrads<T>> make_grads(const ModelWeights<T>& weights);

int padded_length(int frames, PadMode mode);

// Edge-replicates the last frame to the padded length.
template <typename T>
Tensor4<T> pad_for_depth(const Tensor4<T>& x, PadMode mode, PadPlan& plan);

template <typename T>
Tensor4<T> crop_frames(const Tensor4<T>& x, int frames);

// Pads, runs one forward pass and crops back to the input length.
template <typename T>
Tensor4<T> forward(const Tensor4<T>& x, const ModelWeights<T>& weights,
                   PadMode mode = PadMode::minimal);

// Little-endian binary: "MOFW", u32 version, u32 entry count; per entry
// u16 name length, name, u8 rank, u32 dims, f32 data; trailing CRC32.
void save_weights(const ModelWeights<float>& weights, const std::filesystem::path& path);
ModelWeights<float> load_weights(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_weights(const ModelWeights<float>& weights);
ModelWeights<float> deserialize_weights(const std::vector<std::uint8_t>& bytes,
                                        const std::string& origin = "<memory>");

}  // namespace mofill

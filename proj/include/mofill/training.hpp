#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mofill/layers.hpp"
#include "mofill/masking.hpp"
#include "mofill/model.hpp"
#include "mofill/motion.hpp"

namespace mofill {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  OptimConfig optim;
  std::uint64_t seed = 1;
  bool curriculum = true;
  int fixed_gap = 60;          // mean gap length when the curriculum is off
  int force_mu = -1;           // >= 0 overrides the mean gap length (0 = no gaps)
  double gap_ratio = 0.5;      // P(gap) vs joint drop per sample
  double val_fraction = 0.1;
  ModelConfig model;
  int checkpoint_every = 0;    // epochs; 0 disables
  std::filesystem::path checkpoint_dir;
  int threads = 0;             // 0 = MOFILL_THREADS or hardware concurrency

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based count of completed epochs
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation split
  int mu = 0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  std::string to_csv() const;
  static TrainLog from_csv(std::string_view text, const std::string& origin = "<memory>");
};

struct DataSplit {
  std::vector<PoseClip> train;
  std::vector<PoseClip> val;
};

// Seeded shuffle, then the first round(n * val_fraction) clips are held out.
DataSplit split_corpus(const std::vector<PoseClip>& corpus, double val_fraction,
                       std::uint64_t seed);

struct TrainResult {
  ModelWeights<float> weights;
  TrainLog log;
  NormStats stats;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Curriculum denoising-autoencoder training. Every random choice is derived
// from (seed, epoch, clip), so runs are reproducible and resumable.
TrainResult train(const std::vector<PoseClip>& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Continues from a checkpoint written by a run with the same corpus and config.
TrainResult resume_training(const std::vector<PoseClip>& corpus, const TrainConfig& config,
                            const std::filesystem::path& checkpoint,
                            const EpochCallback& on_epoch = {});

// Mean gap length used for a (0-based) epoch.
int epoch_mu(const TrainConfig& config, int epoch);

// The perturbed normalized input for one training sample.
PoseClip training_input(const PoseClip& normalized, const TrainConfig& config, int epoch,
                        std::uint64_t sample_key);

// Mean L1 over clips for a fixed perturbation seed stream.
double validation_loss(const ModelWeights<float>& weights, const std::vector<PoseClip>& normalized,
                       const TrainConfig& config, int epoch);

// Checkpoints: <dir>/epoch-NNNN.weights, .adam and .log.csv.
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch);
void save_checkpoint(const std::filesystem::path& base, const ModelWeights<float>& weights,
                     const TrainLog& log);

struct Checkpoint {
  ModelWeights<float> weights;  // including Adam moments and step counters
  TrainLog log;
};
Checkpoint load_checkpoint(const std::filesystem::path& base);

// Worker count from the MOFILL_THREADS environment variable, else hardware.
int default_threads();

// ---------------------------------------------------------------------------
// Held-out evaluation during/after training.

struct GapErrorRow {
  int gap = 0;
  double mean = 0.0;  // cm
  double std = 0.0;
};

// Centered gap per clip and length, infilled, 3D joint error over the gap
// frames (whole clip for gap 0), pooled over clips.
std::vector<GapErrorRow> evaluate_epoch(const ModelWeights<float>& weights,
                                        const std::vector<PoseClip>& val_clips,
                                        const NormStats& stats, const std::vector<int>& gaps);

}  // namespace mofill

#include "mofill/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

#include "mofill/error.hpp"
#include "mofill/evaluation.hpp"
#include "mofill/io.hpp"
#include "mofill/random.hpp"
#include "mofill/tasks.hpp"

namespace mofill {

namespace {

// Seed stream tags.
constexpr std::uint64_t kSplitTag = 0x5b17;
constexpr std::uint64_t kShuffleTag = 0x5f1e;
constexpr std::uint64_t kSampleTag = 0x5a3e;
constexpr std::uint64_t kValTag = 0x7a1d;
constexpr std::uint64_t kInitTag = 0x1417;

// Gradients are computed over fixed chunks of a batch and summed in chunk
// order, so results do not depend on the worker count.
constexpr int kGradChunk = 4;

constexpr const char* kLogHeader = "epoch,train_loss,val_loss,mu_e,seconds";

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw UsageError("validation fraction must lie in (0, 1)");
  if (!(gap_ratio >= 0.0 && gap_ratio <= 1.0)) throw UsageError("gap ratio must lie in [0, 1]");
  if (fixed_gap < 0 || fixed_gap > kMaxGap)
    throw UsageError("fixed gap must lie in [0, " + std::to_string(kMaxGap) + "]");
  if (force_mu > kMaxGap) throw UsageError("forced gap mean exceeds " + std::to_string(kMaxGap));
  if (checkpoint_every < 0) throw UsageError("checkpoint interval must be >= 0");
  if (checkpoint_every > 0 && checkpoint_dir.empty())
    throw UsageError("checkpoints need a directory");
  if (threads < 0) throw UsageError("thread count must be >= 0");
  optim.validate();
  model.validate();
}

std::string TrainLog::to_csv() const {
  std::string out = std::string(kLogHeader) + "\n";
  for (const EpochRecord& r : epochs)
    out += std::to_string(r.epoch) + "," + format_real(r.train_loss) + "," +
           (std::isnan(r.val_loss) ? std::string("nan") : format_real(r.val_loss)) + "," +
           std::to_string(r.mu) + "," + format_real(r.seconds) + "\n";
  return out;
}

TrainLog TrainLog::from_csv(std::string_view text, const std::string& origin) {
  TrainLog log;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (!header) {
      if (line != kLogHeader) throw DataError(where + ": expected header '" + kLogHeader + "'");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    if (f.size() != 5) throw DataError(where + ": expected 5 fields");
    try {
      EpochRecord r;
      r.epoch = std::stoi(f[0]);
      r.train_loss = parse_real(f[1]);
      r.val_loss = f[2] == "nan" ? std::nan("") : parse_real(f[2]);
      r.mu = std::stoi(f[3]);
      r.seconds = parse_real(f[4]);
      if (r.epoch != static_cast<int>(log.epochs.size()) + 1)
        throw DataError("epochs must be numbered 1, 2, ...");
      log.epochs.push_back(r);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    } catch (const std::exception&) {
      throw DataError(where + ": malformed record");
    }
  }
  if (!header) throw DataError(origin + ": empty training log");
  return log;
}

DataSplit split_corpus(const std::vector<PoseClip>& corpus, double val_fraction,
                       std::uint64_t seed) {
  if (corpus.empty()) throw UsageError("corpus is empty");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw UsageError("validation fraction must lie in [0, 1)");
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kSplitTag));
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
  const auto n_val = std::min<std::size_t>(
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction)), n - 1);
  DataSplit s;
  for (std::size_t i = 0; i < n; ++i) (i < n_val ? s.val : s.train).push_back(corpus[order[i]]);
  return s;
}

int epoch_mu(const TrainConfig& config, int epoch) {
  if (config.force_mu >= 0) return config.force_mu;
  if (!config.curriculum) return config.fixed_gap;
  return curriculum_mu(epoch, config.epochs);
}

PoseClip training_input(const PoseClip& normalized, const TrainConfig& config, int epoch,
                        std::uint64_t sample_key) {
  const int mu = epoch_mu(config, epoch);
  if (mu <= 0) return normalized;  // degenerate curriculum: plain reconstruction
  Rng rng(derive_seed(sample_key, 0));
  if (rng.bernoulli(config.gap_ratio)) {
    CurriculumState state;
    state.epoch = epoch;
    state.mu = mu;
    return apply_mask(normalized,
                      sample_gap_mask(normalized.frames(), state, derive_seed(sample_key, 1)).mask);
  }
  return apply_mask(normalized,
                    sample_joint_drop_mask(normalized.frames(), derive_seed(sample_key, 2)).mask);
}

int default_threads() {
  if (const char* env = std::getenv("MOFILL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min(v, 256L));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::vector<PoseClip> normalize_all(const std::vector<PoseClip>& clips, const NormStats& stats) {
  std::vector<PoseClip> out;
  out.reserve(clips.size());
  for (const PoseClip& c : clips) out.push_back(normalize(c, stats));
  return out;
}

void check_corpus(const std::vector<PoseClip>& corpus) {
  if (corpus.empty()) throw UsageError("training corpus is empty");
  const int frames = corpus.front().frames();
  if (frames < 2) throw DataError("training clips need at least 2 frames");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].frames() != frames)
      throw DataError("clip " + std::to_string(i) + " has " + std::to_string(corpus[i].frames()) +
                      " frames, expected " + std::to_string(frames));
    if (!all_finite<double>(corpus[i].values()))
      throw DataError("clip " + std::to_string(i) + " contains non-finite values");
  }
}

struct ChunkResult {
  std::vector<LayerGrads<float>> grads;
  double loss_sum = 0.0;  // sum of per-sample mean losses
};

// Forward/backward over samples [begin, end) of the batch.
ChunkResult run_chunk(const ModelWeights<float>& weights, const std::vector<PoseClip>& inputs,
                      const std::vector<PoseClip>& targets, std::size_t begin, std::size_t end,
                      std::size_t batch) {
  ChunkResult r;
  r.grads = make_grads(weights);
  const std::vector<PoseClip> in(inputs.begin() + begin, inputs.begin() + end);
  const std::vector<PoseClip> tg(targets.begin() + begin, targets.begin() + end);
  const Tensor4<float> x = clips_to_tensor<float>(in);
  const Tensor4<float> y = clips_to_tensor<float>(tg);
  ForwardCache<float> cache;
  const Tensor4<float> pred = model_forward(weights, x, &cache);
  // Per-sample mean L1, averaged over the batch.
  const std::size_t per = pred.shape().plane() * pred.c();
  Tensor4<float> grad(pred.shape());
  const float scale = 1.0f / static_cast<float>(per * batch);
  for (int s = 0; s < pred.n(); ++s) {
    double sum = 0.0;
    const std::size_t off = static_cast<std::size_t>(s) * per;
    for (std::size_t i = off; i < off + per; ++i) {
      const float d = pred[i] - y[i];
      sum += std::fabs(static_cast<double>(d));
      grad[i] = d > 0.0f ? scale : (d < 0.0f ? -scale : 0.0f);
    }
    r.loss_sum += sum / static_cast<double>(per);
  }
  model_backward(weights, cache, grad, r.grads);
  return r;
}

std::vector<ChunkResult> run_batch(const ModelWeights<float>& weights,
                                   const std::vector<PoseClip>& inputs,
                                   const std::vector<PoseClip>& targets, int threads) {
  const std::size_t batch = inputs.size();
  const std::size_t chunks = (batch + kGradChunk - 1) / kGradChunk;
  std::vector<ChunkResult> results(chunks);
  auto work = [&](std::size_t c) {
    const std::size_t b = c * kGradChunk;
    results[c] = run_chunk(weights, inputs, targets, b, std::min(batch, b + kGradChunk), batch);
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
    return results;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) work(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

double batch_loss(const ModelWeights<float>& weights, const std::vector<PoseClip>& inputs,
                  const std::vector<PoseClip>& targets) {
  double total = 0.0;
  for (std::size_t b = 0; b < inputs.size(); b += kGradChunk) {
    const std::size_t e = std::min(inputs.size(), b + kGradChunk);
    const Tensor4<float> x =
        clips_to_tensor<float>({inputs.begin() + b, inputs.begin() + e});
    const Tensor4<float> y =
        clips_to_tensor<float>({targets.begin() + b, targets.begin() + e});
    const Tensor4<float> pred = model_forward(weights, x);
    // equal-size samples: chunk mean times chunk size = sum of sample means
    total += l1_loss(pred, y) * static_cast<double>(e - b);
  }
  return total;
}

std::vector<ArchiveEntry> adam_entries(const ModelWeights<float>& w) {
  std::vector<ArchiveEntry> out;
  auto to_vec = [](std::span<const float> v) { return std::vector<float>(v.begin(), v.end()); };
  auto dims4 = [](const Shape4& s) {
    return std::vector<std::uint32_t>{static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                                      static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
  };
  for (const LayerParams<float>& p : w.layers) {
    const auto nb = static_cast<std::uint32_t>(p.bias.size());
    out.push_back({p.name + ".m", dims4(p.adam_m.shape()), to_vec(p.adam_m.values()), 0});
    out.push_back({p.name + ".v", dims4(p.adam_v.shape()), to_vec(p.adam_v.values()), 0});
    out.push_back({p.name + ".mb", {nb}, p.adam_m_bias, 0});
    out.push_back({p.name + ".vb", {nb}, p.adam_v_bias, 0});
    // the step counter split into two exactly representable 16-bit halves
    const auto step = static_cast<std::uint32_t>(p.step);
    out.push_back({p.name + ".step", {2},
                   {static_cast<float>(step >> 16), static_cast<float>(step & 0xffffu)}, 0});
  }
  return out;
}

void restore_adam(ModelWeights<float>& w, const std::vector<ArchiveEntry>& entries,
                  const std::string& origin) {
  auto find = [&](const std::string& name) -> const ArchiveEntry& {
    for (const ArchiveEntry& e : entries)
      if (e.name == name) return e;
    throw DataError(origin + ": missing entry '" + name + "'");
  };
  if (entries.size() != w.layers.size() * 5)
    throw DataError(origin + ": optimizer state has " + std::to_string(entries.size()) +
                    " entries, expected " + std::to_string(w.layers.size() * 5));
  for (LayerParams<float>& p : w.layers) {
    auto take = [&](const std::string& suffix, std::size_t size, auto&& dst) {
      const ArchiveEntry& e = find(p.name + suffix);
      if (e.data.size() != size)
        throw DataError(origin + ": entry '" + e.name + "' at offset " + std::to_string(e.offset) +
                        " has " + std::to_string(e.data.size()) + " values, expected " +
                        std::to_string(size));
      std::copy(e.data.begin(), e.data.end(), dst.begin());
    };
    take(".m", p.weights.size(), p.adam_m.values());
    take(".v", p.weights.size(), p.adam_v.values());
    take(".mb", p.bias.size(), p.adam_m_bias);
    take(".vb", p.bias.size(), p.adam_v_bias);
    std::vector<float> step(2);
    take(".step", 2, step);
    if (step[0] < 0 || step[1] < 0 || step[0] > 65535 || step[1] > 65535)
      throw DataError(origin + ": corrupt step counter for layer " + p.name);
    p.step = (static_cast<std::int64_t>(step[0]) << 16) | static_cast<std::int64_t>(step[1]);
  }
}

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  return std::filesystem::path(base.string() + suffix);
}

TrainResult run_training(const std::vector<PoseClip>& corpus, const TrainConfig& config,
                         std::optional<Checkpoint> start, const EpochCallback& on_epoch) {
  config.validate();
  check_corpus(corpus);
  const DataSplit split = split_corpus(corpus, config.val_fraction, config.seed);

  TrainResult result;
  result.stats = compute_norm_stats(split.train);
  const std::vector<PoseClip> train_n = normalize_all(split.train, result.stats);
  const std::vector<PoseClip> val_n = normalize_all(split.val, result.stats);

  int first_epoch = 0;
  if (start) {
    if (!(start->weights.config == config.model))
      throw DataError("checkpoint model configuration does not match the run configuration");
    if (static_cast<int>(start->log.epochs.size()) > config.epochs)
      throw DataError("checkpoint is past the configured epoch count");
    result.weights = std::move(start->weights);
    result.log = std::move(start->log);
    first_epoch = static_cast<int>(result.log.epochs.size());
  } else {
    result.weights = build_model<float>(config.model, derive_seed(config.seed, kInitTag));
  }

  const int threads = config.threads > 0 ? config.threads : default_threads();
  const std::size_t n = train_n.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(config.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, i - 1))]);

    double loss_sum = 0.0;
    const std::uint64_t epoch_key =
        derive_seed(config.seed, kSampleTag, static_cast<std::uint64_t>(epoch));
    for (std::size_t b = 0, batch_index = 0; b < n; b += batch, ++batch_index) {
      const std::size_t e = std::min(n, b + batch);
      std::vector<PoseClip> inputs, targets;
      for (std::size_t i = b; i < e; ++i) {
        const std::size_t clip = order[i];
        targets.push_back(train_n[clip]);
        inputs.push_back(training_input(train_n[clip], config, epoch, derive_seed(epoch_key, clip)));
      }
      std::vector<ChunkResult> chunks = run_batch(result.weights, inputs, targets, threads);
      double batch_sum = 0.0;
      for (std::size_t c = 1; c < chunks.size(); ++c)
        for (std::size_t l = 0; l < chunks[0].grads.size(); ++l) chunks[0].grads[l].add(chunks[c].grads[l]);
      for (const ChunkResult& c : chunks) batch_sum += c.loss_sum;
      if (!std::isfinite(batch_sum))
        throw DataError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                        ", batch " + std::to_string(batch_index + 1));
      for (std::size_t l = 0; l < result.weights.layers.size(); ++l) {
        try {
          adam_step(result.weights.layers[l], chunks[0].grads[l], config.optim);
        } catch (const DataError& err) {
          throw DataError("epoch " + std::to_string(epoch + 1) + ", batch " +
                          std::to_string(batch_index + 1) + ": " + err.what());
        }
      }
      loss_sum += batch_sum;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.val_loss = val_n.empty() ? std::nan("") : validation_loss(result.weights, val_n, config, epoch);
    rec.mu = epoch_mu(config, epoch);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);
    if (config.checkpoint_every > 0 && rec.epoch % config.checkpoint_every == 0)
      save_checkpoint(checkpoint_path(config.checkpoint_dir, rec.epoch), result.weights, result.log);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace

double validation_loss(const ModelWeights<float>& weights, const std::vector<PoseClip>& normalized,
                       const TrainConfig& config, int epoch) {
  if (normalized.empty()) throw UsageError("validation set is empty");
  std::vector<PoseClip> inputs;
  inputs.reserve(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i)
    inputs.push_back(training_input(normalized[i], config, epoch,
                                    derive_seed(config.seed, kValTag, i)));
  return batch_loss(weights, inputs, normalized) / static_cast<double>(normalized.size());
}

TrainResult train(const std::vector<PoseClip>& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  return run_training(corpus, config, std::nullopt, on_epoch);
}

TrainResult resume_training(const std::vector<PoseClip>& corpus, const TrainConfig& config,
                            const std::filesystem::path& checkpoint,
                            const EpochCallback& on_epoch) {
  return run_training(corpus, config, load_checkpoint(checkpoint), on_epoch);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch-%04d", epoch);
  return dir / name;
}

void save_checkpoint(const std::filesystem::path& base, const ModelWeights<float>& weights,
                     const TrainLog& log) {
  // log last: its presence marks a complete checkpoint
  save_weights(weights, with_suffix(base, ".weights"));
  write_file_atomic(with_suffix(base, ".adam"), encode_archive("MOFA", adam_entries(weights)));
  write_file_atomic(with_suffix(base, ".log.csv"), log.to_csv());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::filesystem::path base = path;
  if (base.extension() == ".weights") base.replace_extension();
  Checkpoint cp;
  cp.weights = load_weights(with_suffix(base, ".weights"));
  const auto adam_path = with_suffix(base, ".adam");
  restore_adam(cp.weights, decode_archive(read_file_bytes(adam_path), "MOFA", adam_path.string()),
               adam_path.string());
  const auto log_path = with_suffix(base, ".log.csv");
  cp.log = TrainLog::from_csv(read_file_text(log_path), log_path.string());
  return cp;
}

std::vector<GapErrorRow> evaluate_epoch(const ModelWeights<float>& weights,
                                        const std::vector<PoseClip>& val_clips,
                                        const NormStats& stats, const std::vector<int>& gaps) {
  std::vector<GapErrorRow> out;
  for (const SweepRow& r : sweep_gaps(weights, stats, val_clips, gaps))
    out.push_back({r.param, r.model.mean, r.model.std});
  return out;
}

}  // namespace mofill

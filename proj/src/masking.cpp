#include "mofill/masking.hpp"

#include <algorithm>
#include <cmath>

#include "mofill/error.hpp"
#include "mofill/io.hpp"
#include "mofill/random.hpp"

namespace mofill {

FeatureMask::FeatureMask(int frames, std::uint8_t fill)
    : frames_(frames), data_(static_cast<std::size_t>(kFeatures) * std::max(frames, 0), fill) {
  if (frames < 0) throw ShapeError("mask frame count must be >= 0");
  if (fill > 1) throw UsageError("mask entries must be 0 or 1");
}

void FeatureMask::zero_columns(int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > frames_)
    throw ShapeError("columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") are outside a mask of " + std::to_string(frames_) + " frames");
  for (int r = 0; r < kFeatures; ++r)
    std::fill_n(data_.begin() + static_cast<std::ptrdiff_t>(r) * frames_ + begin, count, 0);
}

void FeatureMask::zero_joint(int joint, int begin, int count) {
  if (joint < 0 || joint >= kJoints) throw UsageError("joint index out of range: " + std::to_string(joint));
  if (count < 0) count = frames_ - begin;
  if (begin < 0 || begin + count > frames_) throw ShapeError("joint drop outside the mask");
  for (int axis = 0; axis < 3; ++axis)
    std::fill_n(data_.begin() + static_cast<std::ptrdiff_t>(joint_row(joint, axis)) * frames_ + begin,
                count, 0);
}

std::size_t FeatureMask::zero_count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), 0));
}

FeatureMask& FeatureMask::operator&=(const FeatureMask& other) {
  if (other.frames_ != frames_) throw ShapeError("cannot combine masks of different lengths");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] &= other.data_[i];
  return *this;
}

int curriculum_mu(int epoch) {
  if (epoch < 0) throw UsageError("epoch must be >= 0");
  return std::min(10 + 10 * (epoch / 5), kMaxGap);
}

int curriculum_mu(int epoch, int total_epochs) {
  if (epoch < 0) throw UsageError("epoch must be >= 0");
  if (total_epochs <= 0 || total_epochs >= 60) return curriculum_mu(epoch);
  // floor(e * (60 / E) / 5) in integer arithmetic
  const long scaled = static_cast<long>(epoch) * 60 / (5L * total_epochs);
  return static_cast<int>(std::min<long>(10 + 10 * scaled, kMaxGap));
}

CurriculumState CurriculumState::at_epoch(int epoch, int total_epochs) {
  CurriculumState s;
  s.epoch = epoch;
  s.mu = curriculum_mu(epoch, total_epochs);
  return s;
}

FeatureMask gap_mask(int frames, int start, int length) {
  FeatureMask m(frames);
  m.zero_columns(start, length);
  return m;
}

GapSample sample_gap_mask(int frames, const CurriculumState& state, std::uint64_t seed) {
  if (frames <= 1) throw ShapeError("gap masks need at least 2 frames, got " + std::to_string(frames));
  GapSample g;
  g.mask = FeatureMask(frames);
  if (state.mu <= 0) return g;
  Rng rng(seed);
  const double draw = rng.normal(state.mu, state.sigma);
  const int hi = std::min(state.mu_max, frames - 1);
  g.length = static_cast<int>(std::clamp(std::lround(draw), 1L, static_cast<long>(hi)));
  g.start = static_cast<int>(rng.uniform_int(0, frames - g.length));
  g.mask.zero_columns(g.start, g.length);
  return g;
}

FeatureMask joint_drop_mask(int frames, const std::vector<int>& joints) {
  FeatureMask m(frames);
  for (int j : joints) m.zero_joint(j);
  return m;
}

JointDropSample sample_joint_drop_mask(int frames, std::uint64_t seed) {
  Rng rng(seed);
  const int k = static_cast<int>(rng.uniform_int(1, 3));
  // partial Fisher-Yates over the joint indices
  std::vector<int> pool(kJoints);
  for (int j = 0; j < kJoints; ++j) pool[j] = j;
  for (int i = 0; i < k; ++i) {
    const auto j = rng.uniform_int(i, kJoints - 1);
    std::swap(pool[i], pool[j]);
  }
  JointDropSample s;
  s.joints.assign(pool.begin(), pool.begin() + k);
  s.mask = joint_drop_mask(frames, s.joints);
  return s;
}

FeatureMask sample_frame_drop_mask(int frames, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("drop probability must lie in [0, 1]");
  FeatureMask m(frames);
  Rng rng(seed);
  for (int t = 0; t < frames; ++t)
    for (int j = 0; j < kJoints; ++j)
      if (rng.bernoulli(p))
        for (int axis = 0; axis < 3; ++axis) m.at(joint_row(j, axis), t) = 0;
  return m;
}

PoseClip add_gaussian_noise(const PoseClip& clip, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw UsageError("noise level must be >= 0");
  PoseClip out = clip;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (int r = 0; r < 3 * kJoints; ++r)
    for (int t = 0; t < clip.frames(); ++t) out.at(r, t) += rng.normal(0.0, sigma);
  return out;
}

PoseClip apply_mask(const PoseClip& clip, const FeatureMask& mask) {
  if (clip.frames() != mask.frames())
    throw ShapeError("apply_mask: clip has " + std::to_string(clip.frames()) +
                     " frames, mask has " + std::to_string(mask.frames()));
  PoseClip out = clip;
  auto& v = out.values();
  const auto& m = mask.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!m[i]) v[i] = 0.0;
  return out;
}

PerturbationKind parse_perturbation(std::string_view name) {
  for (auto k : {PerturbationKind::none, PerturbationKind::gap, PerturbationKind::joint_drop,
                 PerturbationKind::frame_drop, PerturbationKind::gaussian})
    if (perturbation_name(k) == name) return k;
  throw UsageError("unknown perturbation '" + std::string(name) +
                   "' (expected none, gap, joint_drop, frame_drop or gaussian)");
}

std::string_view perturbation_name(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::none: return "none";
    case PerturbationKind::gap: return "gap";
    case PerturbationKind::joint_drop: return "joint_drop";
    case PerturbationKind::frame_drop: return "frame_drop";
    case PerturbationKind::gaussian: return "gaussian";
  }
  return "?";
}

PoseClip perturb(const PoseClip& normalized, const PerturbationSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case PerturbationKind::none:
      return normalized;
    case PerturbationKind::gap:
      return apply_mask(normalized, gap_mask(normalized.frames(), spec.gap_start, spec.gap_length));
    case PerturbationKind::joint_drop:
      if (spec.joints.empty())
        return apply_mask(normalized, sample_joint_drop_mask(normalized.frames(), seed).mask);
      return apply_mask(normalized, joint_drop_mask(normalized.frames(), spec.joints));
    case PerturbationKind::frame_drop:
      return apply_mask(normalized, sample_frame_drop_mask(normalized.frames(), spec.drop_p, seed));
    case PerturbationKind::gaussian:
      return add_gaussian_noise(normalized, spec.noise_sigma, seed);
  }
  return normalized;
}

std::string format_mask(const FeatureMask& mask) {
  std::string out = "#mofill-mask v1 joints=" + std::to_string(kJoints) +
                    " frames=" + std::to_string(mask.frames()) + "\n";
  for (int t = 0; t < mask.frames(); ++t) {
    for (int r = 0; r < kFeatures; ++r) {
      if (r) out += ',';
      out += mask.at(r, t) ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

FeatureMask parse_mask(std::string_view text, const std::string& origin) {
  const TextMatrix m = parse_text_matrix(text, "mofill-mask", origin);
  const int joints = m.int_field("joints", origin);
  const int frames = m.int_field("frames", origin);
  if (joints != kJoints) throw DataError(origin + ": expected joints=" + std::to_string(kJoints));
  if (frames < 0 || static_cast<std::size_t>(frames) != m.rows.size())
    throw DataError(origin + ": header declares " + std::to_string(frames) + " frames but " +
                    std::to_string(m.rows.size()) + " rows follow");
  FeatureMask mask(frames);
  for (int t = 0; t < frames; ++t) {
    const std::string where = origin + ":" + std::to_string(m.line_numbers[t]);
    if (m.rows[t].size() != static_cast<std::size_t>(kFeatures))
      throw DataError(where + ": expected " + std::to_string(kFeatures) + " values");
    for (int r = 0; r < kFeatures; ++r) {
      const double v = m.rows[t][r];
      if (v != 0.0 && v != 1.0) throw DataError(where + ": mask values must be 0 or 1");
      mask.at(r, t) = static_cast<std::uint8_t>(v);
    }
  }
  return mask;
}

void save_mask(const FeatureMask& mask, const std::filesystem::path& path) {
  write_file_atomic(path, format_mask(mask));
}

FeatureMask load_mask(const std::filesystem::path& path) {
  return parse_mask(read_file_text(path), path.string());
}

}  // namespace mofill

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mofill/motion.hpp"

namespace mofill {

// 69 x T binary matrix; 0 marks a removed entry.
class FeatureMask {
 public:
  FeatureMask() = default;
  explicit FeatureMask(int frames, std::uint8_t fill = 1);

  int frames() const { return frames_; }
  std::uint8_t& at(int row, int frame) {
    return data_[static_cast<std::size_t>(row) * frames_ + frame];
  }
  std::uint8_t at(int row, int frame) const {
    return data_[static_cast<std::size_t>(row) * frames_ + frame];
  }
  const std::vector<std::uint8_t>& values() const { return data_; }

  void zero_columns(int begin, int count);
  void zero_joint(int joint, int begin = 0, int count = -1);
  std::size_t zero_count() const;

  // Elementwise product with another mask.
  FeatureMask& operator&=(const FeatureMask& other);
  bool operator==(const FeatureMask&) const = default;

 private:
  int frames_ = 0;
  std::vector<std::uint8_t> data_;
};

inline constexpr int kMaxGap = 120;
inline constexpr double kGapSigma = 10.0;

// min(10 + 10 * floor(epoch / 5), 120)
int curriculum_mu(int epoch);

// Same ramp keyed to a shorter run: for total_epochs < 60 the epoch is
// rescaled by 60 / total_epochs so the full 10..120 range is reached.
int curriculum_mu(int epoch, int total_epochs);

struct CurriculumState {
  int epoch = 0;
  int mu = 10;  // mean gap length; 0 disables gaps
  double sigma = kGapSigma;
  int mu_max = kMaxGap;

  static CurriculumState at_epoch(int epoch, int total_epochs = 0);
};

struct GapSample {
  FeatureMask mask;
  int length = 0;  // lambda
  int start = 0;   // tau
};

FeatureMask gap_mask(int frames, int start, int length);

// lambda = round(N(mu, sigma^2)) clamped to [1, min(mu_max, T - 1)],
// tau uniform in [0, T - lambda]; columns [tau, tau + lambda) are zeroed.
GapSample sample_gap_mask(int frames, const CurriculumState& state, std::uint64_t seed);

struct JointDropSample {
  FeatureMask mask;
  std::vector<int> joints;
};

FeatureMask joint_drop_mask(int frames, const std::vector<int>& joints);
// k in {1, 2, 3} distinct joints, whole sequence. Velocity rows are kept.
JointDropSample sample_joint_drop_mask(int frames, std::uint64_t seed);

// Each (joint, frame) pair dropped independently with probability p.
FeatureMask sample_frame_drop_mask(int frames, double p, std::uint64_t seed);

// Joint rows get N(0, sigma^2) added; velocity rows are untouched.
PoseClip add_gaussian_noise(const PoseClip& clip, double sigma, std::uint64_t seed);

PoseClip apply_mask(const PoseClip& clip, const FeatureMask& mask);

enum class PerturbationKind { none, gap, joint_drop, frame_drop, gaussian };

PerturbationKind parse_perturbation(std::string_view name);
std::string_view perturbation_name(PerturbationKind kind);

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::none;
  int gap_start = 0;
  int gap_length = 0;
  std::vector<int> joints;     // joint_drop; empty = sample 1..3
  double drop_p = 0.3;         // frame_drop
  double noise_sigma = 1.0;    // gaussian, normalized units
};

// Applies one perturbation to a normalized clip.
PoseClip perturb(const PoseClip& normalized, const PerturbationSpec& spec, std::uint64_t seed);

std::string format_mask(const FeatureMask& mask);
FeatureMask parse_mask(std::string_view text, const std::string& origin = "<memory>");
void save_mask(const FeatureMask& mask, const std::filesystem::path& path);
FeatureMask load_mask(const std::filesystem::path& path);

}  // namespace mofill

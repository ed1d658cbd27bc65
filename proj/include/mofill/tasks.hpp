#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mofill/masking.hpp"
#include "mofill/model.hpp"
#include "mofill/motion.hpp"

namespace mofill {

struct Gap {
  int start = 0;
  int length = 0;

  int end() const { return start + length; }
  bool operator==(const Gap&) const = default;
};

// "start:length"
Gap parse_gap(std::string_view text);

// Sorted, non-overlapping gaps.
class GapSet {
 public:
  GapSet() = default;
  explicit GapSet(std::vector<Gap> gaps);  // sorts; rejects overlaps

  const std::vector<Gap>& gaps() const { return gaps_; }
  bool empty() const { return gaps_.empty(); }
  bool contains(int frame) const;
  // Throws when a gap leaves [0, frames).
  void check_within(int frames) const;
  FeatureMask mask(int frames) const;
  int total_frames() const;

 private:
  std::vector<Gap> gaps_;
};

// A gap of `length` frames centered in a clip of `frames` frames.
Gap centered_gap(int frames, int length);

// Normalized clip in, normalized reconstruction out (single forward pass).
PoseClip reconstruct_normalized(const PoseClip& normalized, const ModelWeights<float>& weights,
                                PadMode pad = PadMode::minimal);

// Zeros every gap (all 69 rows) after normalization and runs one forward
// pass. keep_known splices the original frames back outside the gaps.
PoseClip infill(const PoseClip& clip, const GapSet& gaps, const ModelWeights<float>& weights,
                const NormStats& stats, bool keep_known = false);

// Perturbs the normalized clip per `spec` (kind none: input is already
// corrupted) and reconstructs it.
PoseClip denoise(const PoseClip& clip, const PerturbationSpec& spec,
                 const ModelWeights<float>& weights, const NormStats& stats,
                 std::uint64_t seed = 0);

// Reconstruction from a clip whose masked entries are removed.
PoseClip denoise_masked(const PoseClip& clip, const FeatureMask& mask,
                        const ModelWeights<float>& weights, const NormStats& stats);

// Baseline for drops: removed entries left at the training mean.
PoseClip leave_at_mean(const PoseClip& clip, const FeatureMask& mask, const NormStats& stats);

// Removes 0..3 joints for the whole clip and reconstructs them.
PoseClip recover_joints(const PoseClip& clip, const std::vector<int>& joints,
                        const ModelWeights<float>& weights, const NormStats& stats);

inline constexpr int kMinConstraintFrames = 5;

// Joint trajectories from a third clip written into part of a gap.
struct BlendConstraint {
  std::vector<int> joints;
  PoseClip source;
  int start = 0;          // first target frame
  int length = 0;
  int source_offset = 0;  // first source frame
  bool with_root = false; // also write the three root velocity rows
};

PoseClip blend_tertiary(const PoseClip& clip, const GapSet& gaps,
                        const std::vector<BlendConstraint>& constraints,
                        const ModelWeights<float>& weights, const NormStats& stats);

// Per-row linear interpolation between the frames bordering each gap.
PoseClip linear_interp(const PoseClip& clip, const GapSet& gaps);

// Ablation: one stride-2 conv per encoding unit, one transposed conv per
// decoding unit, same channel progression.
ModelConfig vanilla_ae_config(const ModelConfig& base = {});

}  // namespace mofill

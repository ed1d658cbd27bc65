#include "mofill/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <string>

#include "mofill/error.hpp"

namespace mofill {

Gap parse_gap(std::string_view text) {
  const auto colon = text.find(':');
  auto parse_int = [&](std::string_view s, const char* what) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw UsageError("gap '" + std::string(text) + "': " + what + " is not an integer");
    return v;
  };
  if (colon == std::string_view::npos)
    throw UsageError("gap '" + std::string(text) + "' must be start:length");
  Gap g{parse_int(text.substr(0, colon), "start"), parse_int(text.substr(colon + 1), "length")};
  if (g.start < 0 || g.length < 1)
    throw UsageError("gap '" + std::string(text) + "' needs start >= 0 and length >= 1");
  return g;
}

GapSet::GapSet(std::vector<Gap> gaps) : gaps_(std::move(gaps)) {
  std::sort(gaps_.begin(), gaps_.end(),
            [](const Gap& a, const Gap& b) { return a.start < b.start; });
  for (const Gap& g : gaps_)
    if (g.start < 0 || g.length < 1)
      throw UsageError("gap " + std::to_string(g.start) + ":" + std::to_string(g.length) +
                       " needs start >= 0 and length >= 1");
  for (std::size_t i = 1; i < gaps_.size(); ++i)
    if (gaps_[i].start < gaps_[i - 1].end())
      throw UsageError("gaps " + std::to_string(gaps_[i - 1].start) + ":" +
                       std::to_string(gaps_[i - 1].length) + " and " +
                       std::to_string(gaps_[i].start) + ":" + std::to_string(gaps_[i].length) +
                       " overlap");
}

bool GapSet::contains(int frame) const {
  for (const Gap& g : gaps_)
    if (frame >= g.start && frame < g.end()) return true;
  return false;
}

void GapSet::check_within(int frames) const {
  for (const Gap& g : gaps_)
    if (g.end() > frames)
      throw UsageError("gap " + std::to_string(g.start) + ":" + std::to_string(g.length) +
                       " extends past the last frame (" + std::to_string(frames) + " frames)");
}

FeatureMask GapSet::mask(int frames) const {
  check_within(frames);
  FeatureMask m(frames);
  for (const Gap& g : gaps_) m.zero_columns(g.start, g.length);
  return m;
}

int GapSet::total_frames() const {
  int n = 0;
  for (const Gap& g : gaps_) n += g.length;
  return n;
}

Gap centered_gap(int frames, int length) {
  if (length < 0 || length >= frames)
    throw UsageError("gap length " + std::to_string(length) + " must be below the clip length " +
                     std::to_string(frames));
  return Gap{(frames - length) / 2, length};
}

PoseClip reconstruct_normalized(const PoseClip& normalized, const ModelWeights<float>& weights,
                                PadMode pad) {
  const Tensor4<float> x = clips_to_tensor<float>({normalized});
  const Tensor4<float> y = forward(x, weights, pad);
  if (!all_finite<float>(y.values())) throw DataError("model produced non-finite output");
  return tensor_to_clip(y, 0, normalized.fps());
}

namespace {

PoseClip run_masked(const PoseClip& clip, const FeatureMask& mask,
                    const ModelWeights<float>& weights, const NormStats& stats) {
  const PoseClip input = apply_mask(normalize(clip, stats), mask);
  return denormalize(reconstruct_normalized(input, weights), stats);
}

}  // namespace

PoseClip infill(const PoseClip& clip, const GapSet& gaps, const ModelWeights<float>& weights,
                const NormStats& stats, bool keep_known) {
  PoseClip out = run_masked(clip, gaps.mask(clip.frames()), weights, stats);
  if (keep_known)
    for (int r = 0; r < kFeatures; ++r)
      for (int t = 0; t < clip.frames(); ++t)
        if (!gaps.contains(t)) out.at(r, t) = clip.at(r, t);
  return out;
}

PoseClip denoise(const PoseClip& clip, const PerturbationSpec& spec,
                 const ModelWeights<float>& weights, const NormStats& stats, std::uint64_t seed) {
  const PoseClip input = perturb(normalize(clip, stats), spec, seed);
  return denormalize(reconstruct_normalized(input, weights), stats);
}

PoseClip denoise_masked(const PoseClip& clip, const FeatureMask& mask,
                        const ModelWeights<float>& weights, const NormStats& stats) {
  return run_masked(clip, mask, weights, stats);
}

PoseClip leave_at_mean(const PoseClip& clip, const FeatureMask& mask, const NormStats& stats) {
  return denormalize(apply_mask(normalize(clip, stats), mask), stats);
}

PoseClip recover_joints(const PoseClip& clip, const std::vector<int>& joints,
                        const ModelWeights<float>& weights, const NormStats& stats) {
  if (joints.size() > 3) throw UsageError("recover_joints handles at most 3 joints");
  std::vector<int> sorted = joints;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw UsageError("recover_joints: duplicate joint");
  return run_masked(clip, joint_drop_mask(clip.frames(), joints), weights, stats);
}

PoseClip blend_tertiary(const PoseClip& clip, const GapSet& gaps,
                        const std::vector<BlendConstraint>& constraints,
                        const ModelWeights<float>& weights, const NormStats& stats) {
  gaps.check_within(clip.frames());
  PoseClip input = apply_mask(normalize(clip, stats), gaps.mask(clip.frames()));
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const BlendConstraint& c = constraints[i];
    const std::string what = "constraint " + std::to_string(i);
    if (c.joints.empty() && !c.with_root) throw UsageError(what + " has no joints");
    if (c.length < kMinConstraintFrames)
      throw UsageError(what + " spans " + std::to_string(c.length) + " frames, minimum is " +
                       std::to_string(kMinConstraintFrames));
    const bool inside = std::any_of(gaps.gaps().begin(), gaps.gaps().end(), [&](const Gap& g) {
      return c.start >= g.start && c.start + c.length <= g.end();
    });
    if (!inside) throw UsageError(what + " is not inside any gap");
    if (c.source_offset < 0 || c.source_offset + c.length > c.source.frames())
      throw UsageError(what + " reads past the end of its source clip");
    const PoseClip src = normalize(c.source, stats);
    std::vector<int> rows;
    for (int j : c.joints) {
      if (j < 0 || j >= kJoints) throw UsageError(what + ": joint index out of range");
      for (int axis = 0; axis < 3; ++axis) rows.push_back(joint_row(j, axis));
    }
    if (c.with_root) rows.insert(rows.end(), {kRowForward, kRowLateral, kRowTurn});
    for (int r : rows)
      for (int k = 0; k < c.length; ++k) input.at(r, c.start + k) = src.at(r, c.source_offset + k);
  }
  return denormalize(reconstruct_normalized(input, weights), stats);
}

PoseClip linear_interp(const PoseClip& clip, const GapSet& gaps) {
  gaps.check_within(clip.frames());
  PoseClip out = clip;
  for (const Gap& g : gaps.gaps()) {
    if (g.start < 1 || g.end() >= clip.frames())
      throw UsageError("linear interpolation needs a known frame on both sides of gap " +
                       std::to_string(g.start) + ":" + std::to_string(g.length));
    const int a = g.start - 1;
    const int b = g.end();
    for (int r = 0; r < kFeatures; ++r) {
      const double va = clip.at(r, a);
      const double vb = clip.at(r, b);
      for (int k = 0; k < g.length; ++k)
        out.at(r, g.start + k) = va + (vb - va) * (k + 1) / (g.length + 1);
    }
  }
  return out;
}

ModelConfig vanilla_ae_config(const ModelConfig& base) {
  ModelConfig c = base;
  c.architecture = Architecture::vanilla;
  return c;
}

}  // namespace mofill

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mofill/model.hpp"
#include "mofill/motion.hpp"
#include "mofill/tasks.hpp"

namespace mofill {

enum class ErrorScope { full, gap_only };
enum class Alignment { root_aligned, global };

ErrorScope parse_scope(std::string_view name);  // "full" or "gap"
std::string_view scope_name(ErrorScope scope);
std::string_view alignment_name(Alignment alignment);

// Per-joint Euclidean error statistics in cm.
struct ErrorReport {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t frames = 0;
  std::size_t terms = 0;  // frames x joints
  ErrorScope scope = ErrorScope::full;
  Alignment alignment = Alignment::root_aligned;
};

// Pools frame-joint error terms across clips (Welford).
class ErrorAccumulator {
 public:
  void add_term(double e);
  void add_frames(std::size_t n) { frames_ += n; }
  void merge(const ErrorAccumulator& other);
  ErrorReport report(ErrorScope scope, Alignment alignment) const;

 private:
  std::size_t n_ = 0;
  std::size_t frames_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Root aligned compares rows 0..65 directly; global compares integrated
// world positions. gap_only needs a non-empty GapSet.
ErrorReport joint_error(const PoseClip& pred, const PoseClip& truth,
                        ErrorScope scope = ErrorScope::full, const GapSet& gaps = {},
                        Alignment alignment = Alignment::root_aligned);

void accumulate_joint_error(ErrorAccumulator& acc, const PoseClip& pred, const PoseClip& truth,
                            ErrorScope scope, const GapSet& gaps,
                            Alignment alignment = Alignment::root_aligned);

struct BoneReport {
  std::string name;  // "<parent>-<child>"
  int parent = 0;
  int child = 0;
  double rig_length = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t count = 0;

  double iqr() const { return q3 - q1; }
};

// Quartiles by linear interpolation between order statistics.
std::vector<BoneReport> bone_length_stats(const std::vector<PoseClip>& clips,
                                          const SkeletonSpec& skeleton = default_skeleton());

struct SweepRow {
  int param = 0;  // gap size or context length
  ErrorReport model;
  ErrorReport interp;
};

// One centered gap per size per clip, gap-only error (gap 0: full-clip
// reconstruction). Linear interpolation is reported alongside.
std::vector<SweepRow> sweep_gaps(const ModelWeights<float>& weights, const NormStats& stats,
                                 const std::vector<PoseClip>& clips, const std::vector<int>& sizes);

// Each clip is cut to `context` known frames, a centered gap, and `context`
// known frames; gap-only error.
std::vector<SweepRow> sweep_context(const ModelWeights<float>& weights, const NormStats& stats,
                                    const std::vector<PoseClip>& clips,
                                    const std::vector<int>& contexts, int gap = 80);

struct BenchRow {
  int frames = 0;
  int runs = 0;
  double median_ms = 0.0;
  double per_frame_ms = 0.0;
};

// One discarded warm-up, then the median of `runs` single forward passes.
std::vector<BenchRow> benchmark_inference(const ModelWeights<float>& weights,
                                          const std::vector<int>& lengths, int runs = 5);

std::string error_report_csv(const std::vector<ErrorReport>& reports);
std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view param_name);
std::string bone_report_csv(const std::vector<BoneReport>& bones);
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace mofill

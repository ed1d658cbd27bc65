#include "mofill/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mofill/error.hpp"
#include "mofill/io.hpp"
#include "mofill/random.hpp"

namespace mofill {

ErrorScope parse_scope(std::string_view name) {
  if (name == "full") return ErrorScope::full;
  if (name == "gap" || name == "gap_only") return ErrorScope::gap_only;
  throw UsageError("unknown scope '" + std::string(name) + "' (expected full or gap)");
}

std::string_view scope_name(ErrorScope scope) {
  return scope == ErrorScope::full ? "full" : "gap";
}

std::string_view alignment_name(Alignment alignment) {
  return alignment == Alignment::root_aligned ? "root" : "global";
}

void ErrorAccumulator::add_term(double e) {
  ++n_;
  const double d = e - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (e - mean_);
}

void ErrorAccumulator::merge(const ErrorAccumulator& o) {
  if (o.n_ == 0) {
    frames_ += o.frames_;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(o.n_);
  const double d = o.mean_ - mean_;
  const double n = na + nb;
  mean_ += d * nb / n;
  m2_ += o.m2_ + d * d * na * nb / n;
  n_ += o.n_;
  frames_ += o.frames_;
}

ErrorReport ErrorAccumulator::report(ErrorScope scope, Alignment alignment) const {
  ErrorReport r;
  r.scope = scope;
  r.alignment = alignment;
  r.frames = frames_;
  r.terms = n_;
  if (n_ > 0) {
    r.mean = mean_;
    r.std = std::sqrt(std::max(0.0, m2_ / static_cast<double>(n_)));
  }
  return r;
}

void accumulate_joint_error(ErrorAccumulator& acc, const PoseClip& pred, const PoseClip& truth,
                            ErrorScope scope, const GapSet& gaps, Alignment alignment) {
  require_same_frames(pred, truth, "joint_error");
  const int frames = truth.frames();
  if (scope == ErrorScope::gap_only) {
    if (gaps.empty()) throw UsageError("gap-only error needs at least one gap");
    gaps.check_within(frames);
  }
  std::vector<double> gp, gt;
  if (alignment == Alignment::global) {
    gp = to_global_positions(pred);
    gt = to_global_positions(truth);
  }
  for (int t = 0; t < frames; ++t) {
    if (scope == ErrorScope::gap_only && !gaps.contains(t)) continue;
    acc.add_frames(1);
    for (int j = 0; j < kJoints; ++j) {
      double ss = 0.0;
      for (int a = 0; a < 3; ++a) {
        double d;
        if (alignment == Alignment::global) {
          const std::size_t i = (static_cast<std::size_t>(j) * frames + t) * 3 + a;
          d = gp[i] - gt[i];
        } else {
          d = pred.at(joint_row(j, a), t) - truth.at(joint_row(j, a), t);
        }
        ss += d * d;
      }
      acc.add_term(std::sqrt(ss));
    }
  }
}

ErrorReport joint_error(const PoseClip& pred, const PoseClip& truth, ErrorScope scope,
                        const GapSet& gaps, Alignment alignment) {
  ErrorAccumulator acc;
  accumulate_joint_error(acc, pred, truth, scope, gaps, alignment);
  return acc.report(scope, alignment);
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

}  // namespace

std::vector<BoneReport> bone_length_stats(const std::vector<PoseClip>& clips,
                                          const SkeletonSpec& skeleton) {
  if (clips.empty()) throw UsageError("bone statistics need at least one clip");
  std::vector<BoneReport> out;
  out.reserve(skeleton.bones.size());
  for (std::size_t b = 0; b < skeleton.bones.size(); ++b) {
    const Bone& bone = skeleton.bones[b];
    std::vector<double> lengths;
    for (const PoseClip& clip : clips)
      for (int t = 0; t < clip.frames(); ++t) {
        double ss = 0.0;
        for (int a = 0; a < 3; ++a) {
          const double d = clip.at(joint_row(bone.child, a), t) - clip.at(joint_row(bone.parent, a), t);
          ss += d * d;
        }
        lengths.push_back(std::sqrt(ss));
      }
    if (lengths.empty()) throw UsageError("bone statistics need at least one frame");
    std::sort(lengths.begin(), lengths.end());
    BoneReport r;
    r.parent = bone.parent;
    r.child = bone.child;
    r.name = skeleton.joint_names[bone.parent] + "-" + skeleton.joint_names[bone.child];
    r.rig_length = skeleton.rest_lengths[b];
    r.min = lengths.front();
    r.max = lengths.back();
    r.q1 = quantile(lengths, 0.25);
    r.median = quantile(lengths, 0.5);
    r.q3 = quantile(lengths, 0.75);
    r.count = lengths.size();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SweepRow> sweep_gaps(const ModelWeights<float>& weights, const NormStats& stats,
                                 const std::vector<PoseClip>& clips,
                                 const std::vector<int>& sizes) {
  if (clips.empty()) throw UsageError("gap sweep needs at least one clip");
  std::vector<SweepRow> rows;
  for (int size : sizes) {
    ErrorAccumulator model, interp;
    bool interp_ok = true;  // needs a known frame on both sides
    const ErrorScope scope = size == 0 ? ErrorScope::full : ErrorScope::gap_only;
    for (const PoseClip& clip : clips) {
      if (size < 0 || size >= clip.frames())
        throw UsageError("gap length " + std::to_string(size) + " does not fit a clip of " +
                         std::to_string(clip.frames()) + " frames");
      if (size == 0) {
        const PoseClip pred = infill(clip, GapSet{}, weights, stats);
        accumulate_joint_error(model, pred, clip, scope, {});
        accumulate_joint_error(interp, clip, clip, scope, {});
        continue;
      }
      const GapSet gaps({centered_gap(clip.frames(), size)});
      accumulate_joint_error(model, infill(clip, gaps, weights, stats), clip, scope, gaps);
      const Gap& g = gaps.gaps().front();
      if (g.start >= 1 && g.end() < clip.frames())
        accumulate_joint_error(interp, linear_interp(clip, gaps), clip, scope, gaps);
      else
        interp_ok = false;
    }
    SweepRow row{size, model.report(scope, Alignment::root_aligned),
                 interp.report(scope, Alignment::root_aligned)};
    if (!interp_ok) row.interp.mean = row.interp.std = std::nan("");
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> sweep_context(const ModelWeights<float>& weights, const NormStats& stats,
                                    const std::vector<PoseClip>& clips,
                                    const std::vector<int>& contexts, int gap) {
  if (clips.empty()) throw UsageError("context sweep needs at least one clip");
  if (gap < 1) throw UsageError("context sweep needs a gap of at least 1 frame");
  std::vector<SweepRow> rows;
  for (int ctx : contexts) {
    if (ctx < 1) throw UsageError("context length must be >= 1");
    ErrorAccumulator model, interp;
    for (const PoseClip& clip : clips) {
      const int span = 2 * ctx + gap;
      if (span > clip.frames())
        throw UsageError("context " + std::to_string(ctx) + " with gap " + std::to_string(gap) +
                         " needs " + std::to_string(span) + " frames, clip has " +
                         std::to_string(clip.frames()));
      const int begin = centered_gap(clip.frames(), gap).start - ctx;
      const PoseClip cut = clip.slice(begin, span);
      const GapSet gaps({Gap{ctx, gap}});
      accumulate_joint_error(model, infill(cut, gaps, weights, stats), cut, ErrorScope::gap_only, gaps);
      accumulate_joint_error(interp, linear_interp(cut, gaps), cut, ErrorScope::gap_only, gaps);
    }
    rows.push_back({ctx, model.report(ErrorScope::gap_only, Alignment::root_aligned),
                    interp.report(ErrorScope::gap_only, Alignment::root_aligned)});
  }
  return rows;
}

std::vector<BenchRow> benchmark_inference(const ModelWeights<float>& weights,
                                          const std::vector<int>& lengths, int runs) {
  if (runs < 1) throw UsageError("benchmark needs at least one run");
  std::vector<BenchRow> rows;
  for (int frames : lengths) {
    if (frames < 1) throw UsageError("benchmark lengths must be >= 1");
    Tensor4<float> x(Shape4{1, 1, weights.config.input_rows, frames});
    Rng rng(derive_seed(0xbe4c, static_cast<std::uint64_t>(frames)));
    for (float& v : x.values()) v = static_cast<float>(rng.normal(0.0, 1.0));
    forward(x, weights);  // warm-up
    std::vector<double> ms;
    for (int r = 0; r < runs; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor4<float> y = forward(x, weights);
      const auto t1 = std::chrono::steady_clock::now();
      if (y.w() != frames) throw ShapeError("forward changed the frame count");
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    const double median = ms.size() % 2 ? ms[ms.size() / 2]
                                        : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
    rows.push_back({frames, runs, median, median / frames});
  }
  return rows;
}

std::string error_report_csv(const std::vector<ErrorReport>& reports) {
  std::string out = "scope,alignment,frames,mean_cm,std_cm\n";
  for (const ErrorReport& r : reports)
    out += std::string(scope_name(r.scope)) + "," + std::string(alignment_name(r.alignment)) + "," +
           std::to_string(r.frames) + "," + format_real(r.mean) + "," + format_real(r.std) + "\n";
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view param_name) {
  std::string out = std::string(param_name) +
                    ",frames,model_mean_cm,model_std_cm,interp_mean_cm,interp_std_cm\n";
  for (const SweepRow& r : rows)
    out += std::to_string(r.param) + "," + std::to_string(r.model.frames) + "," +
           format_real(r.model.mean) + "," + format_real(r.model.std) + "," +
           format_real(r.interp.mean) + "," + format_real(r.interp.std) + "\n";
  return out;
}

std::string bone_report_csv(const std::vector<BoneReport>& bones) {
  std::string out = "bone,rig_cm,min,q1,median,q3,max,count\n";
  for (const BoneReport& b : bones)
    out += b.name + "," + format_real(b.rig_length) + "," + format_real(b.min) + "," +
           format_real(b.q1) + "," + format_real(b.median) + "," + format_real(b.q3) + "," +
           format_real(b.max) + "," + std::to_string(b.count) + "\n";
  return out;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "frames,runs,median_ms,per_frame_ms\n";
  for (const BenchRow& r : rows)
    out += std::to_string(r.frames) + "," + std::to_string(r.runs) + "," +
           format_real(r.median_ms) + "," + format_real(r.per_frame_ms) + "\n";
  return out;
}

}  // namespace mofill

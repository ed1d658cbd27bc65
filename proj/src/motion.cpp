#include "mofill/motion.hpp"

#include <algorithm>
#include <numbers>

#include "mofill/error.hpp"
#include "mofill/io.hpp"
#include "mofill/random.hpp"

namespace mofill {

namespace {

SkeletonSpec make_skeleton() {
  struct J {
    const char* name;
    int parent;
    std::array<double, 3> offset;
  };
  // +z is the character's left.
  const J joints[kJoints] = {
      {"Hips", -1, {0, 0, 0}},
      {"LeftUpLeg", 0, {0, -6, 9}},
      {"LeftLeg", 1, {0, -42, 0}},
      {"LeftFoot", 2, {0, -40, 0}},
      {"LeftToe", 3, {13, -5, 0}},
      {"RightUpLeg", 0, {0, -6, -9}},
      {"RightLeg", 5, {0, -42, 0}},
      {"RightFoot", 6, {0, -40, 0}},
      {"RightToe", 7, {13, -5, 0}},
      {"Spine", 0, {0, 11, 0}},
      {"Spine1", 9, {0, 12, 0}},
      {"Spine2", 10, {0, 12, 0}},
      {"Neck", 11, {0, 15, 0}},
      {"Head", 12, {0, 12, 0}},
      {"LeftShoulder", 11, {0, 10, 6}},
      {"LeftArm", 14, {0, 0, 13}},
      {"LeftForeArm", 15, {0, -28, 0}},
      {"LeftHand", 16, {0, -25, 0}},
      {"RightShoulder", 11, {0, 10, -6}},
      {"RightArm", 18, {0, 0, -13}},
      {"RightForeArm", 19, {0, -28, 0}},
      {"RightHand", 20, {0, -25, 0}},
  };
  SkeletonSpec s;
  for (int j = 0; j < kJoints; ++j) {
    s.joint_names.emplace_back(joints[j].name);
    s.parents.push_back(joints[j].parent);
    s.offsets.push_back(joints[j].offset);
    if (joints[j].parent >= 0) {
      s.bones.push_back(Bone{joints[j].parent, j});
      const auto& o = joints[j].offset;
      s.rest_lengths.push_back(std::sqrt(o[0] * o[0] + o[1] * o[1] + o[2] * o[2]));
    }
  }
  return s;
}

}  // namespace

int SkeletonSpec::joint_index(std::string_view name) const {
  for (std::size_t i = 0; i < joint_names.size(); ++i)
    if (joint_names[i] == name) return static_cast<int>(i);
  throw UsageError("unknown joint '" + std::string(name) + "'");
}

const SkeletonSpec& default_skeleton() {
  static const SkeletonSpec s = make_skeleton();
  return s;
}

PoseClip::PoseClip(int frames, int fps)
    : frames_(frames), fps_(fps), data_(static_cast<std::size_t>(kFeatures) * frames, 0.0) {
  if (frames < 0) throw ShapeError("clip frame count must be >= 0");
  if (fps < 1) throw UsageError("fps must be >= 1");
}

PoseClip PoseClip::slice(int begin, int count) const {
  if (begin < 0 || count < 0 || begin + count > frames_)
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") is outside a clip of " + std::to_string(frames_) + " frames");
  PoseClip out(count, fps_);
  for (int r = 0; r < kFeatures; ++r) std::copy(row(r) + begin, row(r) + begin + count, out.row(r));
  return out;
}

void require_same_frames(const PoseClip& a, const PoseClip& b, const char* what) {
  if (a.frames() != b.frames())
    throw ShapeError(std::string(what) + ": clips have " + std::to_string(a.frames()) + " and " +
                     std::to_string(b.frames()) + " frames");
}

std::vector<PoseClip> window_clips(const PoseClip& sequence, int window, int stride) {
  if (window < 1 || stride < 1) throw UsageError("window and stride must be >= 1");
  std::vector<PoseClip> out;
  for (int begin = 0; begin + window <= sequence.frames(); begin += stride)
    out.push_back(sequence.slice(begin, window));
  return out;
}

void NormStats::validate() const {
  if (mean.size() != static_cast<std::size_t>(kFeatures) ||
      std.size() != static_cast<std::size_t>(kFeatures))
    throw ShapeError("normalization stats must have " + std::to_string(kFeatures) +
                     " rows, got " + std::to_string(mean.size()) + " means and " +
                     std::to_string(std.size()) + " stds");
  for (int r = 0; r < kFeatures; ++r)
    if (!std::isfinite(mean[r]) || !std::isfinite(std[r]) || !(std[r] > 0.0))
      throw DataError("normalization stats row " + std::to_string(r) + " is invalid");
}

NormStats compute_norm_stats(const std::vector<PoseClip>& clips) {
  NormStats s;
  s.mean.assign(kFeatures, 0.0);
  s.std.assign(kFeatures, 1.0);
  std::size_t count = 0;
  for (const auto& c : clips) count += c.frames();
  if (count == 0) throw DataError("cannot compute normalization stats from zero frames");
  for (int r = 0; r < kFeatures; ++r) {
    double sum = 0.0;
    for (const auto& c : clips)
      for (int t = 0; t < c.frames(); ++t) sum += c.at(r, t);
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (const auto& c : clips)
      for (int t = 0; t < c.frames(); ++t) {
        const double d = c.at(r, t) - mean;
        sq += d * d;
      }
    const double sd = std::sqrt(sq / static_cast<double>(count));
    s.mean[r] = mean;
    s.std[r] = sd < kStdFloor ? 1.0 : sd;
  }
  return s;
}

PoseClip normalize(const PoseClip& clip, const NormStats& stats) {
  stats.validate();
  PoseClip out(clip.frames(), clip.fps());
  for (int r = 0; r < kFeatures; ++r)
    for (int t = 0; t < clip.frames(); ++t)
      out.at(r, t) = (clip.at(r, t) - stats.mean[r]) / stats.std[r];
  return out;
}

PoseClip denormalize(const PoseClip& clip, const NormStats& stats) {
  stats.validate();
  PoseClip out(clip.frames(), clip.fps());
  for (int r = 0; r < kFeatures; ++r)
    for (int t = 0; t < clip.frames(); ++t)
      out.at(r, t) = clip.at(r, t) * stats.std[r] + stats.mean[r];
  return out;
}

template <typename T>
Tensor4<T> clips_to_tensor(const std::vector<PoseClip>& clips) {
  if (clips.empty()) throw ShapeError("clips_to_tensor: no clips");
  const int frames = clips.front().frames();
  Tensor4<T> out(Shape4{static_cast<int>(clips.size()), 1, kFeatures, frames});
  for (std::size_t n = 0; n < clips.size(); ++n) {
    if (clips[n].frames() != frames)
      throw ShapeError("clips_to_tensor: clip " + std::to_string(n) + " has " +
                       std::to_string(clips[n].frames()) + " frames, expected " +
                       std::to_string(frames));
    T* dst = out.sample(static_cast<int>(n));
    const auto& v = clips[n].values();
    for (std::size_t i = 0; i < v.size(); ++i) dst[i] = static_cast<T>(v[i]);
  }
  return out;
}

template <typename T>
PoseClip tensor_to_clip(const Tensor4<T>& t, int sample, int fps) {
  if (t.c() != 1 || t.h() != kFeatures || sample < 0 || sample >= t.n())
    throw ShapeError("tensor_to_clip: cannot read sample " + std::to_string(sample) + " of " +
                     t.shape().str());
  PoseClip out(t.w(), fps);
  const T* src = t.sample(sample);
  for (std::size_t i = 0; i < out.values().size(); ++i)
    out.values()[i] = static_cast<double>(src[i]);
  return out;
}

template Tensor4<float> clips_to_tensor<float>(const std::vector<PoseClip>&);
template Tensor4<double> clips_to_tensor<double>(const std::vector<PoseClip>&);
template PoseClip tensor_to_clip<float>(const Tensor4<float>&, int, int);
template PoseClip tensor_to_clip<double>(const Tensor4<double>&, int, int);

// ---------------------------------------------------------------------------

Trajectory integrate_trajectory(const PoseClip& clip) {
  const int frames = clip.frames();
  Trajectory p;
  p.x.assign(frames, 0.0);
  p.z.assign(frames, 0.0);
  p.heading.assign(frames, 0.0);
  for (int t = 1; t < frames; ++t) {
    double gx, gz;
    rotate_floor(p.heading[t - 1], clip.at(kRowForward, t), clip.at(kRowLateral, t), gx, gz);
    p.x[t] = p.x[t - 1] + gx;
    p.z[t] = p.z[t - 1] + gz;
    p.heading[t] = p.heading[t - 1] + clip.at(kRowTurn, t);
  }
  return p;
}

void write_velocities(PoseClip& clip, const Trajectory& path, double prev_x, double prev_z,
                      double prev_heading) {
  if (path.frames() != clip.frames())
    throw ShapeError("write_velocities: path length does not match the clip");
  for (int t = 0; t < clip.frames(); ++t) {
    const double px = t == 0 ? prev_x : path.x[t - 1];
    const double pz = t == 0 ? prev_z : path.z[t - 1];
    const double ph = t == 0 ? prev_heading : path.heading[t - 1];
    double fx, fz;
    rotate_floor(-ph, path.x[t] - px, path.z[t] - pz, fx, fz);
    clip.at(kRowForward, t) = fx;
    clip.at(kRowLateral, t) = fz;
    clip.at(kRowTurn, t) = path.heading[t] - ph;
  }
}

std::vector<double> to_global_positions(const PoseClip& clip) {
  const Trajectory path = integrate_trajectory(clip);
  const int frames = clip.frames();
  std::vector<double> out(static_cast<std::size_t>(kJoints) * frames * 3);
  for (int j = 0; j < kJoints; ++j)
    for (int t = 0; t < frames; ++t) {
      double gx, gz;
      rotate_floor(path.heading[t], clip.at(joint_row(j, 0), t), clip.at(joint_row(j, 2), t), gx,
                   gz);
      double* o = &out[(static_cast<std::size_t>(j) * frames + t) * 3];
      o[0] = path.x[t] + gx;
      o[1] = clip.at(joint_row(j, 1), t);
      o[2] = path.z[t] + gz;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic motion: sinusoidal local joint angles through forward kinematics,
// so every frame matches the rig's bone lengths exactly.

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r[i * 3 + j] = a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j] + a[i * 3 + 2] * b[6 + j];
  return r;
}

Vec3 transform(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {1, 0, 0, 0, c, -s, 0, s, c};
}
Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c, 0, s, 0, 1, 0, -s, 0, c};
}
// Positive angles swing a downward limb towards +x (forward).
Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c, -s, 0, s, c, 0, 0, 0, 1};
}

// Local joint angles: twist about y, swing about z, abduction about x.
struct JointAngles {
  double twist = 0, swing = 0, abduct = 0;
};

struct PoseSample {
  std::array<JointAngles, kJoints> angles{};
  double speed = 0;    // cm/s along local +x
  double lateral = 0;  // cm/s along local +z
  double turn = 0;     // rad/s
};

enum J : int {
  kHips = 0, kLUpLeg, kLLeg, kLFoot, kLToe, kRUpLeg, kRLeg, kRFoot, kRToe, kSpine, kSpine1,
  kSpine2, kNeck, kHead, kLShoulder, kLArm, kLForeArm, kLHand, kRShoulder, kRArm, kRForeArm,
  kRHand
};

struct FamilyParams {
  MotionFamily family = MotionFamily::idle;
  double freq = 1.0;  // Hz
  double phase = 0.0;
  double amp = 1.0;
  double speed = 0.0;
  double turn = 0.0;
  double lateral = 0.0;
  double side = 1.0;  // which arm waves
};

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void gait(PoseSample& s, double ph, double hip, double knee, double arm, double elbow,
          double lean) {
  auto& a = s.angles;
  a[kLUpLeg].swing = hip * std::sin(ph);
  a[kRUpLeg].swing = -hip * std::sin(ph);
  a[kLLeg].swing = -(0.1 + knee * 0.5 * (1.0 + std::sin(ph + 1.2)));
  a[kRLeg].swing = -(0.1 + knee * 0.5 * (1.0 + std::sin(ph + std::numbers::pi + 1.2)));
  a[kLFoot].swing = 0.15 * std::sin(ph - 0.5);
  a[kRFoot].swing = 0.15 * std::sin(ph + std::numbers::pi - 0.5);
  a[kLArm].swing = -arm * std::sin(ph);
  a[kRArm].swing = arm * std::sin(ph);
  a[kLArm].abduct = -0.12;
  a[kRArm].abduct = 0.12;
  a[kLForeArm].swing = elbow * (0.7 + 0.3 * std::sin(ph));
  a[kRForeArm].swing = elbow * (0.7 - 0.3 * std::sin(ph));
  a[kSpine].twist = 0.08 * std::sin(ph);
  a[kSpine1].swing = -lean;
  a[kHead].swing = 0.03 * std::sin(2.0 * ph);
  a[kSpine].abduct = 0.03 * std::sin(ph);
}

PoseSample evaluate(const FamilyParams& p, double time) {
  PoseSample s;
  const double ph = kTwoPi * p.freq * time + p.phase;
  const double a = p.amp;
  auto& ang = s.angles;
  switch (p.family) {
    case MotionFamily::walk:
      gait(s, ph, 0.42 * a, 0.55 * a, 0.35 * a, 0.3, 0.04);
      s.speed = p.speed * (1.0 + 0.08 * std::cos(2.0 * ph));
      s.lateral = p.lateral * std::sin(ph);
      s.turn = p.turn;
      break;
    case MotionFamily::run:
      gait(s, ph, 0.7 * a, 1.1 * a, 0.6 * a, 1.2, 0.2);
      s.speed = p.speed * (1.0 + 0.12 * std::cos(2.0 * ph));
      s.lateral = p.lateral * std::sin(ph);
      s.turn = p.turn;
      break;
    case MotionFamily::wave: {
      const int arm = p.side > 0 ? kRArm : kLArm;
      const int fore = p.side > 0 ? kRForeArm : kLForeArm;
      ang[arm].abduct = p.side * 2.3 * a;
      ang[arm].swing = 0.3;
      ang[fore].abduct = p.side * (0.35 + 0.45 * std::sin(ph));
      ang[fore].swing = 0.4;
      const int rest = p.side > 0 ? kLArm : kRArm;
      ang[rest].abduct = -p.side * 0.1;
      ang[rest].swing = 0.05 * std::sin(0.5 * ph);
      ang[kSpine].abduct = 0.04 * std::sin(0.5 * ph);
      ang[kHead].twist = 0.1 * std::sin(0.25 * ph) * p.side;
      break;
    }
    case MotionFamily::squat: {
      const double d = 0.5 * (1.0 - std::cos(ph)) * a;
      for (int hip : {kLUpLeg, kRUpLeg}) ang[hip].swing = 1.3 * d;
      for (int knee : {kLLeg, kRLeg}) ang[knee].swing = -2.1 * d;
      for (int foot : {kLFoot, kRFoot}) ang[foot].swing = 0.8 * d;
      ang[kSpine].swing = -0.45 * d;
      for (int arm : {kLArm, kRArm}) ang[arm].swing = 1.3 * d;
      ang[kLArm].abduct = -0.1;
      ang[kRArm].abduct = 0.1;
      break;
    }
    case MotionFamily::idle:
    case MotionFamily::mixed:
      ang[kSpine].swing = 0.012 * std::sin(ph);
      ang[kLArm].swing = 0.02 * std::sin(ph + 0.3);
      ang[kRArm].swing = 0.02 * std::sin(ph + 0.5);
      ang[kLArm].abduct = -0.08;
      ang[kRArm].abduct = 0.08;
      break;
  }
  return s;
}

PoseSample blend(const PoseSample& a, const PoseSample& b, double w) {
  PoseSample r;
  auto mix = [w](double x, double y) { return (1.0 - w) * x + w * y; };
  for (int j = 0; j < kJoints; ++j) {
    r.angles[j].twist = mix(a.angles[j].twist, b.angles[j].twist);
    r.angles[j].swing = mix(a.angles[j].swing, b.angles[j].swing);
    r.angles[j].abduct = mix(a.angles[j].abduct, b.angles[j].abduct);
  }
  r.speed = mix(a.speed, b.speed);
  r.lateral = mix(a.lateral, b.lateral);
  r.turn = mix(a.turn, b.turn);
  return r;
}

// Root-relative joint positions; the hips are lifted so the lowest foot
// joint touches the floor.
std::array<Vec3, kJoints> forward_kinematics(const PoseSample& s) {
  const SkeletonSpec& sk = default_skeleton();
  std::array<Vec3, kJoints> pos{};
  std::array<Mat3, kJoints> rot{};
  for (int j = 0; j < kJoints; ++j) {
    const auto& a = s.angles[j];
    const Mat3 local = mul(rot_y(a.twist), mul(rot_z(a.swing), rot_x(a.abduct)));
    const int p = sk.parents[j];
    if (p < 0) {
      pos[j] = {0, 0, 0};
      rot[j] = local;
    } else {
      const Vec3 o = transform(rot[p], sk.offsets[j]);
      pos[j] = {pos[p][0] + o[0], pos[p][1] + o[1], pos[p][2] + o[2]};
      rot[j] = mul(rot[p], local);
    }
  }
  double lowest = 0.0;
  for (int j : {kLFoot, kLToe, kRFoot, kRToe}) lowest = std::min(lowest, pos[j][1]);
  for (auto& v : pos) v[1] -= lowest;
  return pos;
}

FamilyParams sample_params(MotionFamily family, Rng& rng) {
  FamilyParams p;
  p.family = family;
  p.phase = rng.uniform(0.0, kTwoPi);
  p.amp = rng.uniform(0.85, 1.15);
  switch (family) {
    case MotionFamily::walk:
      p.freq = 0.9 * rng.uniform(0.9, 1.1);
      p.speed = 130.0 * rng.uniform(0.85, 1.15);
      p.turn = rng.uniform(-0.4, 0.4);
      p.lateral = rng.uniform(5.0, 12.0);
      break;
    case MotionFamily::run:
      p.freq = 1.4 * rng.uniform(0.9, 1.1);
      p.speed = 340.0 * rng.uniform(0.85, 1.15);
      p.turn = rng.uniform(-0.4, 0.4);
      p.lateral = rng.uniform(8.0, 18.0);
      break;
    case MotionFamily::wave:
      p.freq = 1.5 * rng.uniform(0.85, 1.15);
      p.side = rng.bernoulli(0.5) ? 1.0 : -1.0;
      break;
    case MotionFamily::squat:
      p.freq = 0.35 * rng.uniform(0.85, 1.15);
      break;
    case MotionFamily::idle:
    case MotionFamily::mixed:
      p.family = MotionFamily::idle;
      p.freq = 0.25 * rng.uniform(0.85, 1.15);
      p.amp = 1.0;
      break;
  }
  return p;
}

SynthClip generate_one(MotionFamily family, int frames, std::uint64_t seed) {
  Rng rng(seed);
  const double fps = kDefaultFps;
  FamilyParams first;
  FamilyParams second;
  double center = 0.0, width = 1.0;
  const bool mixed = family == MotionFamily::mixed;
  if (mixed) {
    const MotionFamily pool[] = {MotionFamily::walk, MotionFamily::run, MotionFamily::wave,
                                 MotionFamily::squat, MotionFamily::idle};
    const auto a = rng.uniform_int(0, 4);
    auto b = rng.uniform_int(0, 3);
    if (b >= a) ++b;
    first = sample_params(pool[a], rng);
    second = sample_params(pool[b], rng);
    center = rng.uniform(0.3, 0.7) * frames;
    width = std::max(1.0, std::min(40.0, 0.3 * frames));
  } else {
    first = sample_params(family, rng);
  }

  auto sample_at = [&](int t) {
    const double time = t / fps;
    PoseSample s = evaluate(first, time);
    if (mixed) {
      double w = std::clamp((t - center) / width + 0.5, 0.0, 1.0);
      w = w * w * (3.0 - 2.0 * w);
      s = blend(s, evaluate(second, time), w);
    }
    return s;
  };

  SynthClip out;
  out.clip = PoseClip(frames, kDefaultFps);
  out.path.x.resize(frames);
  out.path.z.resize(frames);
  out.path.heading.resize(frames);
  out.prev_x = rng.uniform(-200.0, 200.0);
  out.prev_z = rng.uniform(-200.0, 200.0);
  out.prev_heading = rng.uniform(-std::numbers::pi, std::numbers::pi);

  double px = out.prev_x, pz = out.prev_z, ph = out.prev_heading;
  for (int t = 0; t < frames; ++t) {
    const PoseSample s = sample_at(t);
    const auto pos = forward_kinematics(s);
    for (int j = 0; j < kJoints; ++j)
      for (int k = 0; k < 3; ++k) out.clip.at(joint_row(j, k), t) = pos[j][k];
    double gx, gz;
    rotate_floor(ph, s.speed / fps, s.lateral / fps, gx, gz);
    px += gx;
    pz += gz;
    ph += s.turn / fps;
    out.path.x[t] = px;
    out.path.z[t] = pz;
    out.path.heading[t] = ph;
  }
  write_velocities(out.clip, out.path, out.prev_x, out.prev_z, out.prev_heading);
  return out;
}

}  // namespace

MotionFamily parse_family(std::string_view name) {
  for (auto f : {MotionFamily::walk, MotionFamily::run, MotionFamily::wave, MotionFamily::squat,
                 MotionFamily::idle, MotionFamily::mixed})
    if (family_name(f) == name) return f;
  throw UsageError("unknown motion family '" + std::string(name) +
                   "' (expected walk, run, wave, squat, idle or mixed)");
}

std::string_view family_name(MotionFamily family) {
  switch (family) {
    case MotionFamily::walk: return "walk";
    case MotionFamily::run: return "run";
    case MotionFamily::wave: return "wave";
    case MotionFamily::squat: return "squat";
    case MotionFamily::idle: return "idle";
    case MotionFamily::mixed: return "mixed";
  }
  return "?";
}

std::vector<SynthClip> synth_generate_detailed(MotionFamily family, int count,
                                               std::uint64_t seed, int frames) {
  if (count < 0) throw UsageError("clip count must be >= 0");
  if (frames < 1) throw UsageError("clip length must be >= 1 frame");
  std::vector<SynthClip> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(generate_one(family, frames,
                               derive_seed(seed, static_cast<std::uint64_t>(family), i)));
  return out;
}

std::vector<PoseClip> synth_generate(MotionFamily family, int count, std::uint64_t seed,
                                     int frames) {
  std::vector<PoseClip> out;
  for (auto& s : synth_generate_detailed(family, count, seed, frames))
    out.push_back(std::move(s.clip));
  return out;
}

std::vector<PoseClip> synth_corpus(int count, std::uint64_t seed, int frames) {
  constexpr MotionFamily order[] = {MotionFamily::walk, MotionFamily::run, MotionFamily::wave,
                                    MotionFamily::squat, MotionFamily::idle,
                                    MotionFamily::mixed};
  std::vector<PoseClip> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const MotionFamily f = order[i % 6];
    out.push_back(generate_one(f, frames, derive_seed(seed, 0x5e11, i)).clip);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string format_clip(const PoseClip& clip) {
  std::string out = "#mofill-clip v1 fps=" + std::to_string(clip.fps()) +
                    " joints=" + std::to_string(kJoints) +
                    " frames=" + std::to_string(clip.frames()) + "\n";
  std::vector<double> frame(kFeatures);
  for (int t = 0; t < clip.frames(); ++t) {
    for (int r = 0; r < kFeatures; ++r) frame[r] = clip.at(r, t);
    out += format_row(frame.data(), frame.size());
    out += '\n';
  }
  return out;
}

PoseClip parse_clip(std::string_view text, const std::string& origin) {
  const TextMatrix m = parse_text_matrix(text, "mofill-clip", origin);
  const int fps = m.int_field("fps", origin);
  const int joints = m.int_field("joints", origin);
  const int frames = m.int_field("frames", origin);
  if (fps < 1) throw DataError(origin + ": fps must be >= 1");
  if (joints != kJoints)
    throw DataError(origin + ": expected joints=" + std::to_string(kJoints) + ", got " +
                    std::to_string(joints));
  if (frames < 0 || static_cast<std::size_t>(frames) != m.rows.size())
    throw DataError(origin + ": header declares " + std::to_string(frames) + " frames but " +
                    std::to_string(m.rows.size()) + " rows follow");
  PoseClip clip(frames, fps);
  for (int t = 0; t < frames; ++t) {
    if (m.rows[t].size() != static_cast<std::size_t>(kFeatures))
      throw DataError(origin + ":" + std::to_string(m.line_numbers[t]) + ": expected " +
                      std::to_string(kFeatures) + " values, got " +
                      std::to_string(m.rows[t].size()));
    for (int r = 0; r < kFeatures; ++r) clip.at(r, t) = m.rows[t][r];
  }
  return clip;
}

void save_clip(const PoseClip& clip, const std::filesystem::path& path) {
  write_file_atomic(path, format_clip(clip));
}

PoseClip load_clip(const std::filesystem::path& path) {
  return parse_clip(read_file_text(path), path.string());
}

std::string format_stats(const NormStats& stats) {
  stats.validate();
  return "#mofill-stats v1\n" + format_row(stats.mean.data(), stats.mean.size()) + "\n" +
         format_row(stats.std.data(), stats.std.size()) + "\n";
}

NormStats parse_stats(std::string_view text, const std::string& origin) {
  const TextMatrix m = parse_text_matrix(text, "mofill-stats", origin);
  if (m.rows.size() != 2)
    throw DataError(origin + ": expected two rows (mean, std), got " +
                    std::to_string(m.rows.size()));
  NormStats s{m.rows[0], m.rows[1]};
  try {
    s.validate();
  } catch (const Error& e) {
    throw DataError(origin + ": " + e.what());
  }
  return s;
}

void save_stats(const NormStats& stats, const std::filesystem::path& path) {
  write_file_atomic(path, format_stats(stats));
}

NormStats load_stats(const std::filesystem::path& path) {
  return parse_stats(read_file_text(path), path.string());
}

}  // namespace mofill

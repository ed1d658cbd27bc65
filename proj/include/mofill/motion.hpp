#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mofill/tensor.hpp"

namespace mofill {

inline constexpr int kJoints = 22;
inline constexpr int kFeatures = 3 * kJoints + 3;  // 69
inline constexpr int kRowForward = 3 * kJoints;    // 66: forward velocity (local +x)
inline constexpr int kRowLateral = kRowForward + 1;  // 67: lateral velocity (local +z)
inline constexpr int kRowTurn = kRowForward + 2;     // 68: heading change about +y (rad)
inline constexpr int kWindow = 240;
inline constexpr int kWindowStride = 120;
inline constexpr int kDefaultFps = 60;

// Joint rows are (x, y, z) in a character-local frame: y up, +x the facing
// direction, origin at the floor projection of the root. Centimeters.
inline constexpr int joint_row(int joint, int axis) { return 3 * joint + axis; }

struct Bone {
  int parent = 0;
  int child = 0;
};

struct SkeletonSpec {
  std::vector<std::string> joint_names;
  std::vector<int> parents;  // -1 for the root
  std::vector<Bone> bones;
  std::vector<double> rest_lengths;            // per bone, cm
  std::vector<std::array<double, 3>> offsets;  // rest offset from the parent, cm

  int joint_index(std::string_view name) const;
};

// The 22-joint rig used by the synthetic generator and all bone statistics.
const SkeletonSpec& default_skeleton();

// 69 x T feature matrix, row-major (row = feature channel, column = frame).
class PoseClip {
 public:
  PoseClip() = default;
  explicit PoseClip(int frames, int fps = kDefaultFps);

  int frames() const { return frames_; }
  int fps() const { return fps_; }
  void set_fps(int fps) { fps_ = fps; }

  double& at(int row, int frame) { return data_[static_cast<std::size_t>(row) * frames_ + frame]; }
  double at(int row, int frame) const {
    return data_[static_cast<std::size_t>(row) * frames_ + frame];
  }
  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * frames_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * frames_; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  // Frames [begin, begin + count).
  PoseClip slice(int begin, int count) const;

  bool operator==(const PoseClip&) const = default;

 private:
  int frames_ = 0;
  int fps_ = kDefaultFps;
  std::vector<double> data_;
};

void require_same_frames(const PoseClip& a, const PoseClip& b, const char* what);

// Windows of `window` frames every `stride` frames; the remainder is dropped.
std::vector<PoseClip> window_clips(const PoseClip& sequence, int window = kWindow,
                                   int stride = kWindowStride);

struct NormStats {
  std::vector<double> mean;  // kFeatures
  std::vector<double> std;   // kFeatures, already floored

  void validate() const;
  bool operator==(const NormStats&) const = default;
};

inline constexpr double kStdFloor = 1e-4;

// Per-row mean and population std pooled over every frame of every clip.
// Rows with std < kStdFloor get std = 1.
NormStats compute_norm_stats(const std::vector<PoseClip>& clips);
PoseClip normalize(const PoseClip& clip, const NormStats& stats);
PoseClip denormalize(const PoseClip& clip, const NormStats& stats);

// Clips as an n x 1 x 69 x T tensor (all clips must share T) and back.
template <typename T>
Tensor4<T> clips_to_tensor(const std::vector<PoseClip>& clips);
template <typename T>
PoseClip tensor_to_clip(const Tensor4<T>& t, int sample, int fps = kDefaultFps);

// ---------------------------------------------------------------------------
// Root trajectory.

struct Trajectory {
  std::vector<double> x;        // floor plane
  std::vector<double> z;
  std::vector<double> heading;  // radians about +y

  int frames() const { return static_cast<int>(x.size()); }
};

// Planar rotation by heading h applied to a local floor vector (fx, fz).
inline void rotate_floor(double h, double fx, double fz, double& gx, double& gz);

// theta_t = theta_{t-1} + gamma_t, p_t = p_{t-1} + R(theta_{t-1}) v_t for
// t >= 1; frame 0 sits at the origin with heading 0.
Trajectory integrate_trajectory(const PoseClip& clip);

// Inverse of integrate_trajectory for frames t >= 1; frame 0 velocities are
// taken from `prev` (the state one frame before the clip).
void write_velocities(PoseClip& clip, const Trajectory& path, double prev_x, double prev_z,
                      double prev_heading);

// Global joint positions, kJoints x T x 3, laid out [joint][frame][axis].
std::vector<double> to_global_positions(const PoseClip& clip);

// ---------------------------------------------------------------------------
// Synthetic corpus.

enum class MotionFamily { walk, run, wave, squat, idle, mixed };

MotionFamily parse_family(std::string_view name);
std::string_view family_name(MotionFamily family);

struct SynthClip {
  PoseClip clip;
  Trajectory path;  // generated global path, frames [0, T)
  double prev_x = 0.0, prev_z = 0.0, prev_heading = 0.0;  // virtual frame -1
};

std::vector<SynthClip> synth_generate_detailed(MotionFamily family, int count,
                                               std::uint64_t seed, int frames = kWindow);
std::vector<PoseClip> synth_generate(MotionFamily family, int count, std::uint64_t seed,
                                     int frames = kWindow);

// Round-robin over walk, run, wave, squat, idle and mixed.
std::vector<PoseClip> synth_corpus(int count, std::uint64_t seed, int frames = kWindow);

// ---------------------------------------------------------------------------
// Text files.

std::string format_clip(const PoseClip& clip);
PoseClip parse_clip(std::string_view text, const std::string& origin = "<memory>");
void save_clip(const PoseClip& clip, const std::filesystem::path& path);
PoseClip load_clip(const std::filesystem::path& path);

std::string format_stats(const NormStats& stats);
NormStats parse_stats(std::string_view text, const std::string& origin = "<memory>");
void save_stats(const NormStats& stats, const std::filesystem::path& path);
NormStats load_stats(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

inline void rotate_floor(double h, double fx, double fz, double& gx, double& gz) {
  const double c = std::cos(h);
  const double s = std::sin(h);
  gx = c * fx - s * fz;
  gz = s * fx + c * fz;
}

}  // namespace mofill

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mofill/evaluation.hpp"
#include "mofill/motion.hpp"
#include "mofill/tasks.hpp"

namespace mofill {

struct SvgOptions {
  int stride = 10;            // one figure every `stride` frames
  double scale = 1.0;         // px per cm
  double spacing = 60.0;      // horizontal px between figures
  std::string known_color = "#9a9a9a";
  std::string gap_color = "#2e9e44";
};

// Side view (x forward, y up) stick-figure strip; frames inside a gap use
// gap_color. Output contains no timestamps, so it is reproducible.
std::string clip_to_svg(const PoseClip& clip, const GapSet& gaps, const SvgOptions& options = {});

void export_svg(const PoseClip& clip, const GapSet& gaps, const std::filesystem::path& path,
                const SvgOptions& options = {});

// Mean model and interpolation error against the swept parameter.
std::string error_curve_svg(const std::vector<SweepRow>& rows, const std::string& x_label);

}  // namespace mofill

#include "mofill/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mofill/error.hpp"
#include "mofill/io.hpp"

namespace mofill {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string line(double x1, double y1, double x2, double y2) {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
         num(y2) + "\"/>";
}

}  // namespace

std::string clip_to_svg(const PoseClip& clip, const GapSet& gaps, const SvgOptions& opt) {
  if (opt.stride < 1) throw UsageError("SVG stride must be >= 1");
  if (clip.frames() < 1) throw DataError("cannot draw an empty clip");
  if (!(opt.scale > 0.0) || !(opt.spacing > 0.0)) throw UsageError("SVG scale and spacing must be > 0");
  gaps.check_within(clip.frames());
  const SkeletonSpec& sk = default_skeleton();

  double min_x = 0, max_x = 0, max_y = 0;
  bool first = true;
  std::vector<int> frames;
  for (int t = 0; t < clip.frames(); t += opt.stride) frames.push_back(t);
  for (int t : frames)
    for (int j = 0; j < kJoints; ++j) {
      const double x = clip.at(joint_row(j, 0), t);
      const double y = clip.at(joint_row(j, 1), t);
      if (first) min_x = max_x = x, max_y = y, first = false;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
  const double margin = 10.0;
  const double fig_w = (max_x - min_x) * opt.scale;
  const double width = 2 * margin + fig_w + opt.spacing * static_cast<double>(frames.size() - 1);
  const double height = 2 * margin + std::max(max_y, 1.0) * opt.scale;

  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  out += "<line x1=\"0\" y1=\"" + num(height - margin) + "\" x2=\"" + num(width) + "\" y2=\"" +
         num(height - margin) + "\" stroke=\"#dddddd\"/>\n";
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const int t = frames[k];
    const bool in_gap = gaps.contains(t);
    const double ox = margin + opt.spacing * static_cast<double>(k) - min_x * opt.scale;
    out += "<g data-frame=\"" + std::to_string(t) + "\" stroke=\"" +
           (in_gap ? opt.gap_color : opt.known_color) +
           "\" stroke-width=\"2\" stroke-linecap=\"round\">";
    for (const Bone& b : sk.bones) {
      const double x1 = ox + clip.at(joint_row(b.parent, 0), t) * opt.scale;
      const double y1 = height - margin - clip.at(joint_row(b.parent, 1), t) * opt.scale;
      const double x2 = ox + clip.at(joint_row(b.child, 0), t) * opt.scale;
      const double y2 = height - margin - clip.at(joint_row(b.child, 1), t) * opt.scale;
      out += line(x1, y1, x2, y2);
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

void export_svg(const PoseClip& clip, const GapSet& gaps, const std::filesystem::path& path,
                const SvgOptions& options) {
  write_file_atomic(path, clip_to_svg(clip, gaps, options));
}

std::string error_curve_svg(const std::vector<SweepRow>& rows, const std::string& x_label) {
  if (rows.empty()) throw UsageError("error curve needs at least one row");
  const double w = 480, h = 320, m = 40;
  double max_x = 1, max_y = 1e-9;
  for (const SweepRow& r : rows) {
    max_x = std::max(max_x, static_cast<double>(r.param));
    max_y = std::max(max_y, r.model.mean);
    if (std::isfinite(r.interp.mean)) max_y = std::max(max_y, r.interp.mean);
  }
  auto px = [&](double x) { return m + x / max_x * (w - 2 * m); };
  auto py = [&](double y) { return h - m - y / max_y * (h - 2 * m); };
  auto polyline = [&](bool model, const char* color) {
    std::string pts;
    for (const SweepRow& r : rows) {
      const double y = model ? r.model.mean : r.interp.mean;
      if (!std::isfinite(y)) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(r.param)) + "," + num(py(y));
    }
    return "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" +
           pts + "\"/>\n";
  };
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"320\" viewBox=\"0 0 480 320\">\n";
  out += "<g stroke=\"#444444\">" + line(m, h - m, w - m, h - m) + line(m, m, m, h - m) + "</g>\n";
  out += "<text x=\"" + num(w / 2) + "\" y=\"" + num(h - 8) + "\" text-anchor=\"middle\" font-size=\"12\">" +
         x_label + "</text>\n";
  out += "<text x=\"12\" y=\"" + num(h / 2) + "\" font-size=\"12\" transform=\"rotate(-90 12 " +
         num(h / 2) + ")\" text-anchor=\"middle\">error (cm), max " + num(max_y) + "</text>\n";
  out += polyline(true, "#2e9e44");
  out += polyline(false, "#c0392b");
  out += "</svg>\n";
  return out;
}

}  // namespace mofill

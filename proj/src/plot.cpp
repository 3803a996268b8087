#include "crosstrack/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>

namespace crosstrack {

namespace {

std::string color_for(int id) {
  // Golden-angle hue rotation keeps adjacent ids visually distinct.
  const int hue = static_cast<int>(id * 137.508) % 360;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "hsl(%d,70%%,45%%)", hue);
  return buf;
}

void polyline(std::ostream& out, const std::vector<std::pair<double, double>>& pts,
              const std::string& style) {
  if (pts.size() < 2) return;
  out << "  <polyline fill=\"none\" " << style << " points=\"";
  char buf[64];
  for (const auto& [x, y] : pts) {
    std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", x, y);
    out << buf;
  }
  out << "\"/>\n";
}

}  // namespace

void plot_tracks_svg(const std::vector<Track>& tracks, const GroundTruth& gt, std::ostream& out) {
  double max_x = 1.0, max_y = 1.0;
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) {
      max_x = std::max(max_x, e.detection.box.x);
      max_y = std::max(max_y, e.detection.box.y);
    }
  }
  std::map<int, std::vector<std::pair<double, double>>> gt_paths;
  for (const auto& frame : gt.frames) {
    for (const auto& g : frame) {
      gt_paths[g.object_id].emplace_back(g.box.x, g.box.y);
      max_x = std::max(max_x, g.box.x);
      max_y = std::max(max_y, g.box.y);
    }
  }
  const int w = static_cast<int>(max_x) + 20;
  const int h = static_cast<int>(max_y) + 20;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (const auto& [id, pts] : gt_paths) {
    polyline(out, pts, "stroke=\"#999\" stroke-width=\"1\" stroke-dasharray=\"4 3\"");
  }
  for (const auto& t : tracks) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(t.entries.size());
    for (const auto& e : t.entries) pts.emplace_back(e.detection.box.x, e.detection.box.y);
    polyline(out, pts, "stroke=\"" + color_for(t.id) + "\" stroke-width=\"1.5\"");
    if (!pts.empty()) {
      out << "  <circle cx=\"" << pts.front().first << "\" cy=\"" << pts.front().second
          << "\" r=\"2.5\" fill=\"" << color_for(t.id) << "\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace crosstrack

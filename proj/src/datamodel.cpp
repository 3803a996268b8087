#include "crosstrack/datamodel.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace crosstrack {

namespace {

double overlap_1d(double c0, double l0, double c1, double l1) {
  const double lo = std::max(c0 - l0 / 2.0, c1 - l1 / 2.0);
  const double hi = std::min(c0 + l0 / 2.0, c1 + l1 / 2.0);
  return hi - lo;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_field(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": non-numeric field '" + s +
                             "'");
  }
}

std::string format2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct MotLine {
  int frame;  // 1-based
  long id;
  Box box;  // converted to center convention
};

MotLine parse_mot_line(const std::string& line, int line_no) {
  auto fields = split_csv(line);
  if (fields.size() < 6) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": expected >= 6 fields, got " +
                             std::to_string(fields.size()));
  }
  MotLine out;
  const double frame = parse_field(fields[0], line_no);
  if (frame < 1 || frame != static_cast<int>(frame)) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad frame number '" +
                             fields[0] + "'");
  }
  out.frame = static_cast<int>(frame);
  out.id = static_cast<long>(parse_field(fields[1], line_no));
  const double left = parse_field(fields[2], line_no);
  const double top = parse_field(fields[3], line_no);
  out.box.w = parse_field(fields[4], line_no);
  out.box.h = parse_field(fields[5], line_no);
  out.box.x = left + out.box.w / 2.0;
  out.box.y = top + out.box.h / 2.0;
  for (std::size_t i = 6; i < fields.size(); ++i) parse_field(fields[i], line_no);
  return out;
}

void write_mot_line(std::ostream& out, int frame_index, long id, const Box& b) {
  out << (frame_index + 1) << ',' << id << ',' << format2(b.x - b.w / 2.0) << ','
      << format2(b.y - b.h / 2.0) << ',' << format2(b.w) << ',' << format2(b.h)
      << ",1,-1,-1,-1\n";
}

}  // namespace

double iou(const Box& a, const Box& b) {
  const double ow = overlap_1d(a.x, a.w, b.x, b.w);
  const double oh = overlap_1d(a.y, a.h, b.y, b.h);
  if (ow <= 0.0 || oh <= 0.0) return 0.0;
  const double inter = ow * oh;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

bool boxes_intersect(const Box& a, const Box& b) {
  return overlap_1d(a.x, a.w, b.x, b.w) > 0.0 && overlap_1d(a.y, a.h, b.y, b.h) > 0.0;
}

std::vector<FrameDetections> read_mot_detections(std::istream& in, int appearance_dim) {
  std::vector<FrameDetections> frames;
  std::string line;
  int line_no = 0;
  int max_frame = 0;
  std::vector<std::pair<int, Detection>> parsed;  // (0-based frame, det)
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MotLine m = parse_mot_line(line, line_no);
    Detection d;
    d.frame_index = m.frame - 1;
    d.box = m.box;
    d.appearance = Eigen::VectorXd::Zero(appearance_dim);
    parsed.emplace_back(d.frame_index, std::move(d));
    max_frame = std::max(max_frame, m.frame);
  }
  frames.resize(max_frame);
  for (int i = 0; i < max_frame; ++i) frames[i].frame_index = i;
  for (auto& [fi, d] : parsed) frames[fi].detections.push_back(std::move(d));
  return frames;
}

void write_mot_detections(const std::vector<FrameDetections>& frames, std::ostream& out) {
  for (const auto& f : frames) {
    for (const auto& d : f.detections) write_mot_line(out, f.frame_index, -1, d.box);
  }
}

void write_mot_tracks(const std::vector<Track>& tracks, std::ostream& out) {
  // MOT result files are conventionally ordered by frame, then id.
  std::vector<std::tuple<int, int, const TrackEntry*>> flat;  // (frame, id, entry)
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) flat.emplace_back(e.frame_index, t.id, &e);
  }
  std::sort(flat.begin(), flat.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    return std::get<1>(a) < std::get<1>(b);
  });
  for (const auto& [frame, id, e] : flat) write_mot_line(out, frame, id, e->detection.box);
}

std::vector<Track> read_mot_tracks(std::istream& in) {
  std::map<long, Track> by_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MotLine m = parse_mot_line(line, line_no);
    Track& t = by_id[m.id];
    t.id = static_cast<int>(m.id);
    TrackEntry e;
    e.frame_index = m.frame - 1;
    e.detection.frame_index = m.frame - 1;
    e.detection.box = m.box;
    t.entries.push_back(std::move(e));
  }
  std::vector<Track> tracks;
  for (auto& [id, t] : by_id) {
    std::sort(t.entries.begin(), t.entries.end(),
              [](const TrackEntry& a, const TrackEntry& b) { return a.frame_index < b.frame_index; });
    for (std::size_t i = 1; i < t.entries.size(); ++i) {
      if (t.entries[i].frame_index == t.entries[i - 1].frame_index) {
        throw std::runtime_error("track " + std::to_string(id) + ": duplicate entry for frame " +
                                 std::to_string(t.entries[i].frame_index + 1));
      }
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

void write_appearances(const std::vector<FrameDetections>& frames, std::ostream& out) {
  char buf[64];
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < f.detections.size(); ++i) {
      out << (f.frame_index + 1) << ',' << i;
      const auto& a = f.detections[i].appearance;
      for (Eigen::Index j = 0; j < a.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", a(j));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

void read_appearances(std::istream& in, std::vector<FrameDetections>& frames) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() < 2) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected frame,index,...");
    }
    const int frame = static_cast<int>(parse_field(fields[0], line_no)) - 1;
    const int idx = static_cast<int>(parse_field(fields[1], line_no));
    if (frame < 0 || frame >= static_cast<int>(frames.size())) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": frame " +
                               std::to_string(frame + 1) + " outside detection file range");
    }
    auto& dets = frames[frame].detections;
    if (idx < 0 || idx >= static_cast<int>(dets.size())) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": detection index " +
                               std::to_string(idx) + " out of range for frame " +
                               std::to_string(frame + 1));
    }
    Eigen::VectorXd a(static_cast<Eigen::Index>(fields.size()) - 2);
    for (std::size_t j = 2; j < fields.size(); ++j) {
      a(static_cast<Eigen::Index>(j) - 2) = parse_field(fields[j], line_no);
    }
    dets[idx].appearance = std::move(a);
  }
}

}  // namespace crosstrack

#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <vector>

namespace crosstrack {

/// Axis-aligned box, center-point convention (x, y = center), pixels.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

double iou(const Box& a, const Box& b);
bool boxes_intersect(const Box& a, const Box& b);

struct Detection {
  int frame_index = 0;
  Box box;
  Eigen::VectorXd appearance;  // length k, same k across a corpus
  bool is_artificial = false;
  long source_id = -1;  // opaque provenance id, unique per generated detection
};

struct FrameDetections {
  int frame_index = 0;
  std::vector<Detection> detections;  // order is matrix row/column identity
};

struct TrackEntry {
  int frame_index = 0;
  Detection detection;
};

struct Track {
  int id = 0;
  std::vector<TrackEntry> entries;  // frame indices strictly increasing
  bool terminated = false;
};

/// A contiguous window of n+1 frames; frames[0] has >= 1 detection.
struct SequenceSample {
  std::vector<FrameDetections> frames;
  int n = 0;
};

/// Parses MOTChallenge detection lines "frame,id,left,top,w,h,conf,x,y,z"
/// (1-based frames, top-left boxes). Output is 0-based and contiguous:
/// missing frames become empty FrameDetections. Appearance vectors are
/// zero-filled with dimension appearance_dim. Malformed input throws
/// std::runtime_error naming the line number.
std::vector<FrameDetections> read_mot_detections(std::istream& in, int appearance_dim);

/// Inverse of read_mot_detections (id column written as -1).
void write_mot_detections(const std::vector<FrameDetections>& frames, std::ostream& out);

/// MOTChallenge result format, one line per (frame, track) entry,
/// boxes converted back to top-left, 2 decimal places, conf = 1.
void write_mot_tracks(const std::vector<Track>& tracks, std::ostream& out);

/// Parses a result file back into tracks (appearance left empty).
std::vector<Track> read_mot_tracks(std::istream& in);

/// Appearance sidecar: "frame,index,v0,...,v{k-1}" with the det file's
/// 1-based frame numbers and 0-based in-frame detection indices.
void write_appearances(const std::vector<FrameDetections>& frames, std::ostream& out);

/// Fills appearance vectors in-place from a sidecar stream. Lines that
/// reference unknown frames or indices throw std::runtime_error.
void read_appearances(std::istream& in, std::vector<FrameDetections>& frames);

}  // namespace crosstrack

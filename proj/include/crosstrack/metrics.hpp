#pragma once

#include <string>
#include <vector>

#include "crosstrack/datamodel.hpp"
#include "crosstrack/simulator.hpp"

namespace crosstrack {

struct EvalReport {
  double mota = 0.0;
  double idf1 = 0.0;
  long fp = 0, fn = 0, idsw = 0, frag = 0;
  long mt = 0, ml = 0;  // mostly (>= 80%) / mostly-lost (<= 20%) trajectories
  long gt_total = 0;    // ground-truth detections
  long pred_total = 0;
  long idtp = 0, idfp = 0, idfn = 0;
  long num_gt_tracks = 0;
};

/// CLEAR-MOT events with previous-frame correspondence carryover, plus
/// IDF1 from a global bijective track matching. Predicted frames outside
/// the ground-truth range are rejected.
EvalReport evaluate(const std::vector<Track>& predicted, const GroundTruth& gt,
                    double iou_match_threshold = 0.5);

/// Micro-average: sums event counts, recomputes the ratios.
EvalReport aggregate(const std::vector<EvalReport>& reports);

std::string format_report(const EvalReport& report);

std::string report_csv_header();
std::string report_csv_row(const std::string& label, const EvalReport& report);

}  // namespace crosstrack

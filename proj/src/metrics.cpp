#include "crosstrack/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "crosstrack/transition.hpp"

namespace crosstrack {

namespace {

struct PredBox {
  int track_id;
  Box box;
};

}  // namespace

EvalReport evaluate(const std::vector<Track>& predicted, const GroundTruth& gt,
                    double iou_match_threshold) {
  const int num_frames = static_cast<int>(gt.frames.size());

  std::vector<std::vector<PredBox>> preds(num_frames);
  for (const auto& t : predicted) {
    for (const auto& e : t.entries) {
      if (e.frame_index < 0 || e.frame_index >= num_frames) {
        throw std::invalid_argument("evaluate: predicted frame " +
                                    std::to_string(e.frame_index) +
                                    " outside ground-truth range [0, " +
                                    std::to_string(num_frames - 1) + "]");
      }
      preds[e.frame_index].push_back({t.id, e.detection.box});
    }
  }

  EvalReport r;
  std::map<int, int> last_match;            // gt id -> last matched track id
  std::map<int, int> prev_frame_match;      // gt id -> track id matched in previous frame
  std::map<int, long> gt_frames_present;    // gt id -> frames in gt
  std::map<int, long> gt_frames_covered;    // gt id -> frames matched
  std::map<int, long> gt_coverage_gap;      // gt id -> unmatched frames since last match
  std::set<int> gt_ever_covered;

  for (int f = 0; f < num_frames; ++f) {
    const auto& gts = gt.frames[f];
    const auto& ps = preds[f];
    const int ng = static_cast<int>(gts.size());
    const int np = static_cast<int>(ps.size());
    r.gt_total += ng;
    r.pred_total += np;
    for (const auto& g : gts) ++gt_frames_present[g.object_id];

    std::vector<int> gt_to_pred(ng, -1);
    std::vector<bool> pred_used(np, false);

    // Carry over still-valid correspondences before optimizing the rest.
    for (int i = 0; i < ng; ++i) {
      auto it = prev_frame_match.find(gts[i].object_id);
      if (it == prev_frame_match.end()) continue;
      for (int j = 0; j < np; ++j) {
        if (pred_used[j] || ps[j].track_id != it->second) continue;
        if (iou(gts[i].box, ps[j].box) >= iou_match_threshold) {
          gt_to_pred[i] = j;
          pred_used[j] = true;
        }
        break;
      }
    }

    std::vector<int> free_gt, free_pred;
    for (int i = 0; i < ng; ++i) {
      if (gt_to_pred[i] < 0) free_gt.push_back(i);
    }
    for (int j = 0; j < np; ++j) {
      if (!pred_used[j]) free_pred.push_back(j);
    }
    if (!free_gt.empty() && !free_pred.empty()) {
      Eigen::MatrixXd cost(free_gt.size(), free_pred.size());
      for (std::size_t a = 0; a < free_gt.size(); ++a) {
        for (std::size_t b = 0; b < free_pred.size(); ++b) {
          const double v = iou(gts[free_gt[a]].box, ps[free_pred[b]].box);
          cost(a, b) = v >= iou_match_threshold ? 1.0 - v : 1e6;
        }
      }
      for (auto [a, b] : hungarian(cost).matches) {
        if (cost(a, b) >= 1e6) continue;
        gt_to_pred[free_gt[a]] = free_pred[b];
        pred_used[free_pred[b]] = true;
      }
    }

    prev_frame_match.clear();
    for (int i = 0; i < ng; ++i) {
      const int gid = gts[i].object_id;
      if (gt_to_pred[i] < 0) {
        ++r.fn;
        if (gt_ever_covered.count(gid)) ++gt_coverage_gap[gid];
        continue;
      }
      const int tid = ps[gt_to_pred[i]].track_id;
      auto last = last_match.find(gid);
      if (last != last_match.end() && last->second != tid) ++r.idsw;
      if (gt_ever_covered.count(gid) && gt_coverage_gap[gid] > 0) ++r.frag;
      gt_coverage_gap[gid] = 0;
      gt_ever_covered.insert(gid);
      last_match[gid] = tid;
      prev_frame_match[gid] = tid;
      ++gt_frames_covered[gid];
    }
    for (int j = 0; j < np; ++j) {
      if (!pred_used[j]) ++r.fp;
    }
  }

  r.num_gt_tracks = static_cast<long>(gt_frames_present.size());
  for (const auto& [gid, present] : gt_frames_present) {
    const double ratio = static_cast<double>(gt_frames_covered[gid]) / present;
    if (ratio >= 0.8) ++r.mt;
    if (ratio <= 0.2) ++r.ml;
  }
  r.mota = r.gt_total > 0 ? 1.0 - static_cast<double>(r.fp + r.fn + r.idsw) / r.gt_total : 1.0;

  // IDF1: bijective (gt track, predicted track) matching maximizing the
  // per-pair count of frames where the pair's boxes are compatible.
  std::vector<int> gt_ids, pred_ids;
  for (const auto& [gid, cnt] : gt_frames_present) gt_ids.push_back(gid);
  {
    std::set<int> seen;
    for (const auto& t : predicted) {
      if (seen.insert(t.id).second) pred_ids.push_back(t.id);
    }
  }
  if (!gt_ids.empty() && !pred_ids.empty()) {
    std::map<int, int> gt_pos, pred_pos;
    for (std::size_t i = 0; i < gt_ids.size(); ++i) gt_pos[gt_ids[i]] = static_cast<int>(i);
    for (std::size_t j = 0; j < pred_ids.size(); ++j) pred_pos[pred_ids[j]] = static_cast<int>(j);
    Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(gt_ids.size(), pred_ids.size());
    for (int f = 0; f < num_frames; ++f) {
      for (const auto& g : gt.frames[f]) {
        for (const auto& p : preds[f]) {
          if (iou(g.box, p.box) >= iou_match_threshold) {
            overlap(gt_pos[g.object_id], pred_pos[p.track_id]) += 1.0;
          }
        }
      }
    }
    for (auto [a, b] : hungarian(-overlap).matches) {
      r.idtp += static_cast<long>(overlap(a, b));
    }
  }
  r.idfp = r.pred_total - r.idtp;
  r.idfn = r.gt_total - r.idtp;
  const double denom = static_cast<double>(2 * r.idtp + r.idfp + r.idfn);
  r.idf1 = denom > 0.0 ? 2.0 * r.idtp / denom : 1.0;
  return r;
}

EvalReport aggregate(const std::vector<EvalReport>& reports) {
  EvalReport r;
  for (const auto& s : reports) {
    r.fp += s.fp;
    r.fn += s.fn;
    r.idsw += s.idsw;
    r.frag += s.frag;
    r.mt += s.mt;
    r.ml += s.ml;
    r.gt_total += s.gt_total;
    r.pred_total += s.pred_total;
    r.idtp += s.idtp;
    r.idfp += s.idfp;
    r.idfn += s.idfn;
    r.num_gt_tracks += s.num_gt_tracks;
  }
  r.mota = r.gt_total > 0 ? 1.0 - static_cast<double>(r.fp + r.fn + r.idsw) / r.gt_total : 1.0;
  const double denom = static_cast<double>(2 * r.idtp + r.idfp + r.idfn);
  r.idf1 = denom > 0.0 ? 2.0 * r.idtp / denom : 1.0;
  return r;
}

std::string format_report(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "MOTA %6.3f | IDF1 %6.3f | FP %ld | FN %ld | IDSW %ld | Frag %ld | MT %ld/%ld | "
                "ML %ld/%ld | GT %ld",
                r.mota, r.idf1, r.fp, r.fn, r.idsw, r.frag, r.mt, r.num_gt_tracks, r.ml,
                r.num_gt_tracks, r.gt_total);
  return buf;
}

std::string report_csv_header() {
  return "label,mota,idf1,fp,fn,idsw,frag,mt,ml,gt_tracks,gt_total,pred_total,idtp,idfp,idfn";
}

std::string report_csv_row(const std::string& label, const EvalReport& r) {
  std::ostringstream out;
  out << label << ',' << r.mota << ',' << r.idf1 << ',' << r.fp << ',' << r.fn << ',' << r.idsw
      << ',' << r.frag << ',' << r.mt << ',' << r.ml << ',' << r.num_gt_tracks << ','
      << r.gt_total << ',' << r.pred_total << ',' << r.idtp << ',' << r.idfp << ',' << r.idfn;
  return out.str();
}

}  // namespace crosstrack

#pragma once

#include <memory>
#include <vector>

#include "crosstrack/datamodel.hpp"
#include "crosstrack/model.hpp"

namespace crosstrack {

enum class InferenceMode {
  kFused,       // min(visual-only, spatial-only) transition per frame
  kPlain,       // full features, recurrent only (occlusion-trained models)
  kSpatialOnly  // spatial branch alone
};

struct InferenceConfig {
  InferenceMode mode = InferenceMode::kFused;
  // Transition entries are min(row softmax, col softmax), so two rows
  // claiming one column are capped at exactly 0.5: a threshold at or above
  // 0.5 can never accept either claim again once a duplicate track exists,
  // and every rejection spawns another duplicate. The usable operating
  // range therefore sits well below the cap.
  double accept_threshold = 0.2;
  int visual_samples = 5;  // past detections averaged by the visual branch
  int t_miss = 30;         // consecutive unmatched frames before termination
  // Recurrent state covers at most this many recent observations (0 = the
  // whole track). Training rolls the LSTM over short windows only, so
  // unbounded states drift out of the distribution the matcher was fit to;
  // bounding the state keeps long tracks scoring like training-length ones.
  int state_window = 8;
  unsigned long seed = 0;
};

void validate(const InferenceConfig& config);

/// Per-frame scoring strategy. The pipeline owns track bookkeeping and
/// calls back: start_track when a track is born, observe on every matched
/// detection, score for the active-track/detection probability matrix
/// (entries in [0,1], higher = same object).
class TrackScorer {
 public:
  virtual ~TrackScorer() = default;
  virtual void start_track(int track_id, const Detection& d) = 0;
  virtual void observe(int track_id, const Detection& d) = 0;
  virtual Eigen::MatrixXd score(const std::vector<int>& track_ids,
                                const std::vector<Detection>& dets) = 0;
};

/// Online tracking loop: frame 0 seeds one track per detection, later
/// frames match by Hungarian on 1 - score with accept_threshold demotion,
/// unmatched detections spawn tracks, tracks unmatched for t_miss frames
/// terminate. Every detection ends up in exactly one track.
std::vector<Track> track_sequence_with_scorer(TrackScorer& scorer,
                                              const std::vector<FrameDetections>& frames,
                                              const InferenceConfig& config);

/// Model-backed scorer honoring config.mode (recurrent state detached
/// per frame; visual branch averages raw scores over up to
/// config.visual_samples randomly drawn past detections of the track).
std::unique_ptr<TrackScorer> make_model_scorer(const ModelParams& params,
                                               const InferenceConfig& config);

std::vector<Track> track_sequence(const ModelParams& params,
                                  const std::vector<FrameDetections>& frames,
                                  const InferenceConfig& config);

/// Greedy max-IoU association; a track not matched in a frame terminates
/// immediately, so occlusions split tracks.
std::vector<Track> iou_baseline(const std::vector<FrameDetections>& frames, double iou_threshold);

}  // namespace crosstrack

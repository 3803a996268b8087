#pragma once

#include <random>
#include <set>
#include <utility>
#include <vector>

#include "crosstrack/model.hpp"
#include "crosstrack/transition.hpp"

namespace crosstrack {

enum class Scheme { kVisualSpatial, kOcclusion };

struct OcclusionPlanConfig {
  int min_windows = 1;
  int max_windows = 2;
  int min_window_len = 1;
  int max_window_len = 3;
};

/// What each of the two input variations hides. The two occluded sets are
/// subsets of {1..n-1}, always differ, and never contain the hand-off
/// frame h (the second rollout needs detections there to seed tracks).
struct HidingPlan {
  Scheme scheme = Scheme::kVisualSpatial;
  std::set<int> occluded_a, occluded_b;
  int handoff = -1;  // 1 < h < n for occlusion with n >= 3; -1 = no hand-off
};

HidingPlan sample_hiding_plan(Scheme scheme, int n, const OcclusionPlanConfig& config,
                              std::mt19937_64& rng);

/// Feasibility mask, |D_0| x (|D_n| + 1): entry (i, j) is 1 iff the label
/// of first-frame detection i reaches last-frame detection j through
/// chains of intersecting boxes with lookback up to max_lookback frames.
/// Artificial-detection columns are 0; the exit column is 1.
using MaskMatrix = Eigen::MatrixXd;
MaskMatrix floodfill_mask(const SequenceSample& sample, int max_lookback = 10);

/// Ones mask of the same layout (artificial columns still 0, exit 1).
MaskMatrix ones_mask(const SequenceSample& sample);

struct ArtificialResult {
  SequenceSample sample;
  bool no_far_donor = false;  // set when the corpus had no eligible donor
};

/// Appends one artificial detection per real final-frame detection: same
/// box, appearance copied from a donor whose frame is at least
/// min_temporal_distance from the sample window (pass 0 to accept any
/// donor frame, e.g. when the donor corpus is a different sequence).
ArtificialResult add_artificial_detections(const SequenceSample& sample,
                                           const std::vector<FrameDetections>& donor_corpus,
                                           int min_temporal_distance, std::mt19937_64& rng);

/// One tracker input. Frames are stored unmodified apart from occlusion
/// dropout; field hiding happens at encode time (hide), so frames 0 and n
/// stay byte-identical across the two variations.
struct InputVariation {
  SequenceSample frames;
  Hide hide = Hide::kNone;
  bool recurrent = true;  // false: visual-only, scores (d0_i, dn_j) directly
};

/// The detection as the model sees it under hide (spatial or appearance
/// fields zeroed).
Detection hidden_view(const Detection& d, Hide hide);

std::pair<InputVariation, InputVariation> apply_hiding(const SequenceSample& sample,
                                                       const HidingPlan& plan);

/// First-to-last-frame transition matrix for one variation. Recurrent
/// variations roll out with hard Hungarian matching on intermediate
/// frames (threshold 0); unmatched tracks keep their state. An occlusion
/// hand-off multiplies the two leg matrices with an absorbing exit row.
diff::Value track_variation(const ModelParams& params, const InputVariation& input,
                            const HidingPlan& plan,
                            TransitionNorm norm = TransitionNorm::kMinRowCol);

/// L = -sum_i log(eps + sum_j A_ij * B_ij * C_ij), eps = 1e-8.
diff::Value consistency_loss(const diff::Value& a, const diff::Value& b, const MaskMatrix& mask);

}  // namespace crosstrack

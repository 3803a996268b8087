#pragma once

#include <iosfwd>
#include <random>
#include <utility>
#include <vector>

#include "crosstrack/datamodel.hpp"

namespace crosstrack {

struct WorldConfig {
  double width = 512.0;
  double height = 512.0;
  int min_objects = 4;
  int max_objects = 8;
  double spawn_rate = 0.05;    // per-frame probability of one spawn while below max
  double despawn_rate = 0.0;   // added to 1/mean_lifetime for the per-frame end probability
  double mean_lifetime = 32.0;  // frames; drives geometric object lifetimes
  double min_speed = 1.0;
  double max_speed = 5.0;
  double velocity_noise_std = 0.3;
  double min_box_size = 16.0;
  double max_box_size = 48.0;
  int appearance_dim = 16;
  double signature_scale = 1.0;        // per-object signature ~ N(0, scale^2) per entry
  double appearance_noise_std = 0.05;  // per-observation noise
  double miss_rate = 0.05;
  double false_positive_rate = 0.1;  // expected false positives per frame
  double box_jitter_std = 1.0;
  double occlusion_rate = 0.02;  // per object per frame
  int occlusion_min = 1;
  int occlusion_max = 10;
  unsigned long seed = 0;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const WorldConfig& config);

struct GtBox {
  int object_id = 0;
  Box box;
};

struct OcclusionEvent {
  int object_id = 0;
  int start_frame = 0;
  int end_frame = 0;  // inclusive
};

/// Evaluation-only channel; training code never receives this type.
struct GroundTruth {
  std::vector<std::vector<GtBox>> frames;  // includes occluded objects
  std::vector<std::vector<long>> detection_labels;  // per detection: object id, -1 = false positive
  std::vector<OcclusionEvent> occlusions;
};

/// Noisy constant-velocity world with boundary reflection, geometric
/// lifetimes, occlusion windows, and a miss/false-positive/jitter detector.
/// Deterministic under config.seed.
std::pair<std::vector<FrameDetections>, GroundTruth> generate(const WorldConfig& config,
                                                              int num_frames);

/// Uniform window start and uniform n in [n_min, n_max], resampled until
/// the first frame has a detection. Throws std::invalid_argument when the
/// corpus is shorter than n_max + 1 frames or no non-empty start exists.
SequenceSample sample_training_sequence(const std::vector<FrameDetections>& corpus, int n_min,
                                        int n_max, std::mt19937_64& rng);

void write_mot_ground_truth(const GroundTruth& gt, std::ostream& out);

/// Reads per-frame (id, box) lists; detection labels and occlusion log are
/// not representable in the MOT format and stay empty.
GroundTruth read_mot_ground_truth(std::istream& in);

}  // namespace crosstrack

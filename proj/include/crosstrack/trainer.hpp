#pragma once

#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "crosstrack/consistency.hpp"
#include "crosstrack/inference.hpp"
#include "crosstrack/metrics.hpp"
#include "crosstrack/model.hpp"

namespace crosstrack {

struct TrainConfig {
  Scheme scheme = Scheme::kVisualSpatial;
  TransitionNorm norm = TransitionNorm::kMinRowCol;
  int n_min = 4;
  int n_max = 16;
  double learning_rate = 1e-4;
  double plateau_learning_rate = 1e-5;
  int eval_interval = 500;  // steps between held-out loss probes
  int plateau_patience = 3; // probes without improvement before decay
  int max_steps = 4000;
  int checkpoint_interval = 1000;
  bool use_artificial = true;
  bool use_mask = true;
  int artificial_min_distance = 80;  // frames; donors from other sequences need none
  int heldout_tuples = 32;           // fixed loss probes drawn from reserved sequences
  OcclusionPlanConfig occlusion_plan;
  unsigned long seed = 0;
};

void validate(const TrainConfig& config);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);

  /// One bias-corrected update from the accumulated gradients; zeroes the
  /// gradients afterwards. Parameter list identity must stay stable
  /// across calls.
  void step(const std::vector<diff::Value*>& params);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

/// No-improvement counter: record() returns true once the tracked value
/// has failed to improve (by at least min_delta) for `patience`
/// consecutive calls.
class PlateauDetector {
 public:
  PlateauDetector(int patience, double min_delta = 1e-4);
  bool record(double value);

 private:
  int patience_;
  double min_delta_;
  double best_;
  int stale_ = 0;
};

struct TrainingCorpus {
  std::vector<std::vector<FrameDetections>> sequences;
};

/// A pre-built training example: sample + plan + artificials + mask.
struct TrainingTuple {
  SequenceSample sample;
  HidingPlan plan;
  MaskMatrix mask;
};

/// Samples a tuple from the corpus (resampling empty first/final frames),
/// optionally appending artificial detections and building the mask.
TrainingTuple sample_training_tuple(const TrainingCorpus& corpus, const TrainConfig& config,
                                    std::mt19937_64& rng);

/// Loss for one tuple: both variations tracked, masked dot-product loss.
diff::Value tuple_loss(const ModelParams& params, const TrainingTuple& tuple,
                       TransitionNorm norm);

/// One optimization step on one freshly sampled sequence.
double train_step(ModelParams& params, AdamOptimizer& opt, const TrainingCorpus& corpus,
                  const TrainConfig& config, std::mt19937_64& rng);

struct TrainResult {
  int steps = 0;
  double final_heldout_loss = 0.0;
  bool plateau_decay_applied = false;
};

/// Full loop: reserves ~10% of sequences for held-out loss probes, logs
/// "step,loss,lr" CSV lines to log (when given), checkpoints periodically
/// and at the end (when checkpoint_path is non-empty).
TrainResult train(ModelParams& params, const TrainingCorpus& corpus, const TrainConfig& config,
                  std::ostream* log, const std::string& checkpoint_path);

/// Tracks every held-out sequence and aggregates CLEAR/IDF1 metrics.
EvalReport evaluate_checkpoint(const ModelParams& params,
                               const std::vector<std::vector<FrameDetections>>& heldout,
                               const std::vector<GroundTruth>& ground_truths,
                               const InferenceConfig& infer_config);

}  // namespace crosstrack

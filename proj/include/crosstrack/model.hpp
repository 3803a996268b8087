#pragma once

#include <string>
#include <vector>

#include "crosstrack/autodiff.hpp"
#include "crosstrack/datamodel.hpp"

namespace crosstrack {

enum class Hide { kNone, kSpatial, kAppearance };

struct ModelConfig {
  int appearance_dim = 16;
  int encoder_hidden = 64;  // appearance_dim -> encoder_hidden -> feature_dim
  int feature_dim = 64;
  int lstm_hidden = 64;
  std::vector<int> matcher_hidden = {64, 64, 32};  // four layers total, last -> 1
  double spatial_scale = 512.0;  // divides x, y, w, h before entering features
};

/// Detection feature width: feature_dim + 4 spatial entries.
inline int detection_feature_dim(const ModelConfig& c) { return c.feature_dim + 4; }

/// All trainable weights. Enumeration order (and the flat vector layout) is
/// fixed: encoder (W, b per layer), LSTM gates i, f, g, o (W, U, b each),
/// matcher (W, b per layer), exit bias.
struct ModelParams {
  ModelConfig config;
  std::vector<diff::Value> enc_w, enc_b;
  std::vector<diff::Value> lstm_w, lstm_u, lstm_b;  // size 4, gate order i, f, g, o
  std::vector<diff::Value> match_w, match_b;
  diff::Value exit_bias;  // 1x1

  std::vector<diff::Value*> all();
  std::vector<const diff::Value*> all() const;
};

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights, zero for
/// biases; deterministic under seed.
ModelParams init_params(const ModelConfig& config, unsigned long seed);

long parameter_count(const ModelParams& params);
Eigen::VectorXd flatten(const ModelParams& params);
/// Throws std::invalid_argument on length mismatch.
void unflatten(ModelParams& params, const Eigen::VectorXd& flat);

/// JSON checkpoint with a shape manifest; load validates the manifest
/// against the stored config and throws std::runtime_error on mismatch.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

/// Column-per-detection feature matrix, (feature_dim + 4) x D:
/// encoder(appearance) stacked on (x, y, w, h) / spatial_scale.
/// hide=kSpatial zeroes the spatial rows; hide=kAppearance zeroes the
/// appearance vectors before encoding.
diff::Value encode_detections(const ModelParams& params, const std::vector<Detection>& dets,
                              Hide hide);
diff::Value encode_detection(const ModelParams& params, const Detection& det, Hide hide);

struct TrackState {
  diff::Value h;  // lstm_hidden x 1
  diff::Value c;
  int length = 0;
};

TrackState lstm_init(const ModelParams& params);
TrackState lstm_step(const ModelParams& params, const TrackState& state, const diff::Value& x);

/// LSTM over the feature sequence; returns the last hidden state.
/// Incremental extension through lstm_step matches recomputation.
diff::Value encode_track(const ModelParams& params, const std::vector<diff::Value>& features);

/// Zero-pads a track feature column block from lstm_hidden to the
/// detection feature width, so both matcher slots share one layout.
diff::Value pad_track_features(const ModelParams& params, const diff::Value& h);

/// Matching network over all column pairs: left (F x T), right (F x D),
/// result T x D of raw scores.
diff::Value score_pairs(const ModelParams& params, const diff::Value& left,
                        const diff::Value& right);

double match_score(const ModelParams& params, const diff::Value& track_feature,
                   const diff::Value& det_feature);

/// Appends the exit column (broadcast exit bias) to a T x D score block.
diff::Value append_exit_column(const ModelParams& params, const diff::Value& scores);

/// Full score matrix T x (D+1) for track features (lstm_hidden x T)
/// against detections encoded with hide.
diff::Value score_matrix(const ModelParams& params, const diff::Value& track_features,
                         const std::vector<Detection>& dets, Hide hide);

}  // namespace crosstrack

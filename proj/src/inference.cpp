#include "crosstrack/inference.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>

#include "crosstrack/transition.hpp"

namespace crosstrack {

void validate(const InferenceConfig& c) {
  if (c.accept_threshold < 0.0 || c.accept_threshold > 1.0) {
    throw std::invalid_argument("InferenceConfig.accept_threshold must be in [0,1]");
  }
  if (c.visual_samples < 1) {
    throw std::invalid_argument("InferenceConfig.visual_samples must be >= 1");
  }
  if (c.t_miss < 1) throw std::invalid_argument("InferenceConfig.t_miss must be >= 1");
  if (c.state_window < 0) {
    throw std::invalid_argument("InferenceConfig.state_window must be >= 0");
  }
}

namespace {

class ModelScorer : public TrackScorer {
 public:
  ModelScorer(const ModelParams& params, const InferenceConfig& config)
      : params_(params), config_(config), rng_(config.seed) {}

  void start_track(int track_id, const Detection& d) override {
    TrackMemory& t = tracks_[track_id];
    t.state = lstm_init(params_);
    feed(t, d);
  }

  void observe(int track_id, const Detection& d) override { feed(tracks_.at(track_id), d); }

  Eigen::MatrixXd score(const std::vector<int>& track_ids,
                        const std::vector<Detection>& dets) override {
    const int t = static_cast<int>(track_ids.size());
    const int d = static_cast<int>(dets.size());
    if (t == 0 || d == 0) return Eigen::MatrixXd::Zero(t, d);

    switch (config_.mode) {
      case InferenceMode::kPlain:
        return recurrent_probs(track_ids, dets, Hide::kNone);
      case InferenceMode::kSpatialOnly:
        return recurrent_probs(track_ids, dets, Hide::kAppearance);
      case InferenceMode::kFused: {
        Eigen::MatrixXd spatial = recurrent_probs(track_ids, dets, Hide::kAppearance);
        Eigen::MatrixXd visual = visual_probs(track_ids, dets);
        return spatial.cwiseMin(visual);
      }
    }
    return Eigen::MatrixXd::Zero(t, d);
  }

 private:
  struct TrackMemory {
    TrackState state;  // incremental, maintained only when state_window == 0
    std::vector<Detection> history;
    std::vector<diff::Value> features;  // recurrent-hide encodings, detached
  };

  void feed(TrackMemory& t, const Detection& d) {
    diff::Value x = encode_detection(params_, d, recurrent_hide());
    if (config_.state_window == 0) {
      // States are detached every step so graphs never chain across frames.
      TrackState next = lstm_step(params_, t.state, x);
      t.state.h = next.h.detach();
      t.state.c = next.c.detach();
      t.state.length = next.length;
    }
    t.history.push_back(d);
    t.features.push_back(x.detach());
  }

  /// State over the last state_window observations (or the cached
  /// incremental state when the window is unbounded).
  diff::Value track_state(const TrackMemory& t) {
    if (config_.state_window == 0) return t.state.h;
    TrackState st = lstm_init(params_);
    const std::size_t from = t.features.size() > static_cast<std::size_t>(config_.state_window)
                                 ? t.features.size() - config_.state_window
                                 : 0;
    for (std::size_t q = from; q < t.features.size(); ++q) {
      st = lstm_step(params_, st, t.features[q]);
    }
    return st.h;
  }

  Hide recurrent_hide() const {
    return config_.mode == InferenceMode::kPlain ? Hide::kNone : Hide::kAppearance;
  }

  /// Detection-column probabilities of the transition built from the
  /// recurrent branch's scores (exit column dropped after normalization).
  Eigen::MatrixXd recurrent_probs(const std::vector<int>& track_ids,
                                  const std::vector<Detection>& dets, Hide hide) {
    std::vector<diff::Value> cols;
    cols.reserve(track_ids.size());
    for (int id : track_ids) cols.push_back(track_state(tracks_.at(id)));
    diff::Value features = diff::concat_cols(cols);
    diff::Value m = build_transition(score_matrix(params_, features, dets, hide));
    return m.data().leftCols(dets.size());
  }

  /// Visual branch: raw matcher scores of (past detection, candidate)
  /// pairs averaged over up to visual_samples past detections per track,
  /// then normalized like any other score matrix.
  Eigen::MatrixXd visual_probs(const std::vector<int>& track_ids,
                               const std::vector<Detection>& dets) {
    const int t = static_cast<int>(track_ids.size());
    const int d = static_cast<int>(dets.size());
    diff::Value cand = encode_detections(params_, dets, Hide::kSpatial);
    Eigen::MatrixXd scores(t, d);
    for (int i = 0; i < t; ++i) {
      const auto& history = tracks_.at(track_ids[i]).history;
      std::vector<Detection> sampled;
      if (static_cast<int>(history.size()) <= config_.visual_samples) {
        sampled = history;
      } else {
        std::vector<std::size_t> idx(history.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        std::shuffle(idx.begin(), idx.end(), rng_);
        for (int k = 0; k < config_.visual_samples; ++k) sampled.push_back(history[idx[k]]);
      }
      diff::Value past = encode_detections(params_, sampled, Hide::kSpatial);
      scores.row(i) = score_pairs(params_, past, cand).data().colwise().mean();
    }
    diff::Value m = build_transition(append_exit_column(params_, diff::Value(scores)));
    return m.data().leftCols(d);
  }

  const ModelParams& params_;
  InferenceConfig config_;
  std::mt19937_64 rng_;
  std::map<int, TrackMemory> tracks_;
};

}  // namespace

std::vector<Track> track_sequence_with_scorer(TrackScorer& scorer,
                                              const std::vector<FrameDetections>& frames,
                                              const InferenceConfig& config) {
  validate(config);
  std::vector<Track> tracks;
  struct Active {
    int index;  // into tracks
    int misses = 0;
  };
  std::vector<Active> active;
  int next_id = 1;

  auto spawn = [&](const Detection& d, int frame) {
    Track t;
    t.id = next_id++;
    t.entries.push_back({frame, d});
    tracks.push_back(std::move(t));
    active.push_back({static_cast<int>(tracks.size()) - 1, 0});
    scorer.start_track(tracks.back().id, d);
  };

  for (const auto& frame : frames) {
    const auto& dets = frame.detections;
    if (active.empty()) {
      for (const auto& d : dets) spawn(d, frame.frame_index);
      continue;
    }

    std::vector<int> track_ids;
    track_ids.reserve(active.size());
    for (const auto& a : active) track_ids.push_back(tracks[a.index].id);
    Eigen::MatrixXd probs = dets.empty()
                                ? Eigen::MatrixXd::Zero(static_cast<int>(active.size()), 0)
                                : scorer.score(track_ids, dets);

    Eigen::MatrixXd with_exit(probs.rows(), probs.cols() + 1);
    with_exit << probs, Eigen::MatrixXd::Zero(probs.rows(), 1);
    Assignment assign = match_frame(with_exit, config.accept_threshold);

    std::vector<bool> det_matched(dets.size(), false);
    std::vector<bool> row_matched(active.size(), false);
    for (auto [i, j] : assign.matches) {
      row_matched[i] = true;
      det_matched[j] = true;
      tracks[active[i].index].entries.push_back({frame.frame_index, dets[j]});
      scorer.observe(track_ids[i], dets[j]);
      active[i].misses = 0;
    }
    std::vector<Active> still_active;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (!row_matched[i]) ++active[i].misses;
      if (active[i].misses >= config.t_miss) {
        tracks[active[i].index].terminated = true;
      } else {
        still_active.push_back(active[i]);
      }
    }
    active = std::move(still_active);
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (!det_matched[j]) spawn(dets[j], frame.frame_index);
    }
  }
  return tracks;
}

std::unique_ptr<TrackScorer> make_model_scorer(const ModelParams& params,
                                               const InferenceConfig& config) {
  return std::make_unique<ModelScorer>(params, config);
}

std::vector<Track> track_sequence(const ModelParams& params,
                                  const std::vector<FrameDetections>& frames,
                                  const InferenceConfig& config) {
  auto scorer = make_model_scorer(params, config);
  return track_sequence_with_scorer(*scorer, frames, config);
}

std::vector<Track> iou_baseline(const std::vector<FrameDetections>& frames,
                                double iou_threshold) {
  std::vector<Track> tracks;
  std::vector<int> active;  // indices of tracks matched in the previous frame
  int next_id = 1;
  for (const auto& frame : frames) {
    const auto& dets = frame.detections;
    std::vector<bool> det_used(dets.size(), false);
    std::vector<int> next_active;

    // Greedy best-IoU pairs between last boxes and current detections.
    std::vector<std::tuple<double, int, int>> pairs;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const Box& last = tracks[active[a]].entries.back().detection.box;
      for (std::size_t j = 0; j < dets.size(); ++j) {
        const double v = iou(last, dets[j].box);
        if (v > 0.0 && v >= iou_threshold) {
          pairs.emplace_back(v, static_cast<int>(a), static_cast<int>(j));
        }
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
      if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
      if (std::get<1>(x) != std::get<1>(y)) return std::get<1>(x) < std::get<1>(y);
      return std::get<2>(x) < std::get<2>(y);
    });
    std::vector<bool> row_used(active.size(), false);
    for (const auto& [v, a, j] : pairs) {
      if (row_used[a] || det_used[j]) continue;
      row_used[a] = true;
      det_used[j] = true;
      tracks[active[a]].entries.push_back({frame.frame_index, dets[j]});
      next_active.push_back(active[a]);
    }
    for (std::size_t a = 0; a < active.size(); ++a) {
      if (!row_used[a]) tracks[active[a]].terminated = true;
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (det_used[j]) continue;
      Track t;
      t.id = next_id++;
      t.entries.push_back({frame.frame_index, dets[j]});
      tracks.push_back(std::move(t));
      next_active.push_back(static_cast<int>(tracks.size()) - 1);
    }
    active = std::move(next_active);
  }
  return tracks;
}

}  // namespace crosstrack

#include "crosstrack/consistency.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace crosstrack {

namespace {

using diff::Value;

std::set<int> sample_windows(int n, int forbidden, const OcclusionPlanConfig& c,
                             std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_windows(c.min_windows, c.max_windows);
  std::uniform_int_distribution<int> win_len(c.min_window_len, c.max_window_len);
  std::uniform_int_distribution<int> start(1, n - 1);
  std::set<int> frames;
  const int windows = n_windows(rng);
  for (int w = 0; w < windows; ++w) {
    const int s = start(rng);
    const int len = win_len(rng);
    for (int f = s; f < s + len && f <= n - 1; ++f) {
      if (f != forbidden) frames.insert(f);
    }
  }
  return frames;
}

}  // namespace

HidingPlan sample_hiding_plan(Scheme scheme, int n, const OcclusionPlanConfig& config,
                              std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("sample_hiding_plan: n must be >= 1");
  HidingPlan plan;
  plan.scheme = scheme;
  if (scheme == Scheme::kVisualSpatial) return plan;
  if (n < 2) {
    throw std::invalid_argument("sample_hiding_plan: occlusion scheme needs n >= 2, got " +
                                std::to_string(n));
  }
  // A hand-off needs a frame strictly between 1 and n; n == 2 rolls out
  // in one piece.
  if (n >= 3) {
    std::uniform_int_distribution<int> pick_h(2, n - 1);
    plan.handoff = pick_h(rng);
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    plan.occluded_a = sample_windows(n, plan.handoff, config, rng);
    plan.occluded_b = sample_windows(n, plan.handoff, config, rng);
    if (plan.occluded_a != plan.occluded_b) return plan;
  }
  // Tiny n can leave no room for distinct non-empty sets; fall back to
  // occluding nothing in one variation.
  if (!plan.occluded_a.empty()) {
    plan.occluded_b.clear();
    return plan;
  }
  throw std::invalid_argument("sample_hiding_plan: cannot build distinct occlusion sets for n=" +
                              std::to_string(n));
}

MaskMatrix floodfill_mask(const SequenceSample& sample, int max_lookback) {
  const int n = sample.n;
  const auto& first = sample.frames.front().detections;
  const auto& last = sample.frames.back().detections;
  const int t = static_cast<int>(first.size());
  const int d = static_cast<int>(last.size());

  // labels[k][j] = set of first-frame indices whose label reached
  // detection j of frame k.
  std::vector<std::vector<std::set<int>>> labels(n + 1);
  labels[0].resize(t);
  for (int i = 0; i < t; ++i) labels[0][i].insert(i);
  for (int k = 1; k <= n; ++k) {
    const auto& dets = sample.frames[k].detections;
    labels[k].resize(dets.size());
    for (std::size_t j = 0; j < dets.size(); ++j) {
      for (int l = 1; l <= max_lookback && k - l >= 0; ++l) {
        const auto& prev = sample.frames[k - l].detections;
        for (std::size_t i = 0; i < prev.size(); ++i) {
          if (!boxes_intersect(dets[j].box, prev[i].box)) continue;
          labels[k][j].insert(labels[k - l][i].begin(), labels[k - l][i].end());
        }
      }
    }
  }

  MaskMatrix mask = MaskMatrix::Zero(t, d + 1);
  for (int j = 0; j < d; ++j) {
    if (last[j].is_artificial) continue;
    for (int i : labels[n][j]) mask(i, j) = 1.0;
  }
  mask.col(d).setOnes();
  return mask;
}

MaskMatrix ones_mask(const SequenceSample& sample) {
  const int t = static_cast<int>(sample.frames.front().detections.size());
  const auto& last = sample.frames.back().detections;
  MaskMatrix mask = MaskMatrix::Ones(t, static_cast<int>(last.size()) + 1);
  for (std::size_t j = 0; j < last.size(); ++j) {
    if (last[j].is_artificial) mask.col(static_cast<int>(j)).setZero();
  }
  return mask;
}

ArtificialResult add_artificial_detections(const SequenceSample& sample,
                                           const std::vector<FrameDetections>& donor_corpus,
                                           int min_temporal_distance, std::mt19937_64& rng) {
  ArtificialResult out;
  out.sample = sample;
  const int lo = sample.frames.front().frame_index;
  const int hi = sample.frames.back().frame_index;

  std::vector<const Detection*> donors;
  for (const auto& f : donor_corpus) {
    const int dist = f.frame_index < lo ? lo - f.frame_index
                     : f.frame_index > hi ? f.frame_index - hi
                                          : 0;
    if (dist < min_temporal_distance) continue;
    for (const auto& det : f.detections) donors.push_back(&det);
  }
  if (donors.empty()) {
    out.no_far_donor = true;
    return out;
  }

  auto& last = out.sample.frames.back().detections;
  const std::size_t real = last.size();
  std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
  for (std::size_t j = 0; j < real; ++j) {
    const Detection* donor = donors[pick(rng)];
    Detection art = last[j];
    art.appearance = donor->appearance;
    art.is_artificial = true;
    art.source_id = donor->source_id;
    last.push_back(std::move(art));
  }
  return out;
}

Detection hidden_view(const Detection& d, Hide hide) {
  Detection out = d;
  if (hide == Hide::kSpatial) out.box = Box{};
  if (hide == Hide::kAppearance) out.appearance.setZero();
  return out;
}

std::pair<InputVariation, InputVariation> apply_hiding(const SequenceSample& sample,
                                                       const HidingPlan& plan) {
  InputVariation a, b;
  a.frames = sample;
  b.frames = sample;
  if (plan.scheme == Scheme::kVisualSpatial) {
    a.hide = Hide::kSpatial;
    a.recurrent = false;
    b.hide = Hide::kAppearance;
    b.recurrent = true;
  } else {
    a.hide = Hide::kNone;
    b.hide = Hide::kNone;
    for (int f : plan.occluded_a) a.frames.frames[f].detections.clear();
    for (int f : plan.occluded_b) b.frames.frames[f].detections.clear();
  }
  return {std::move(a), std::move(b)};
}

namespace {

/// Recurrent rollout over frames [from, to] of the variation: tracks are
/// seeded from frame `from`, updated by Hungarian matches on intermediate
/// frames, and scored against frame `to`. Returns T x (D_to + 1).
Value rollout_transition(const ModelParams& params, const InputVariation& input, int from, int to,
                         TransitionNorm norm) {
  const auto& frames = input.frames.frames;
  const auto& seed_dets = frames[from].detections;
  if (seed_dets.empty()) {
    throw std::invalid_argument("rollout: zero detections in frame " +
                                std::to_string(frames[from].frame_index));
  }
  const int t = static_cast<int>(seed_dets.size());
  Value seed_features = encode_detections(params, seed_dets, input.hide);
  std::vector<TrackState> states(t, lstm_init(params));
  for (int i = 0; i < t; ++i) {
    states[i] = lstm_step(params, states[i], diff::slice_cols(seed_features, i, 1));
  }

  auto track_block = [&]() {
    std::vector<Value> cols;
    cols.reserve(states.size());
    for (const auto& s : states) cols.push_back(s.h);
    return diff::concat_cols(cols);
  };

  for (int k = from + 1; k < to; ++k) {
    const auto& dets = frames[k].detections;
    if (dets.empty()) continue;
    Value feats = encode_detections(params, dets, input.hide);
    Value scores = append_exit_column(params, score_pairs(params, pad_track_features(params, track_block()), feats));
    Value m = build_transition(scores, norm);
    // Hard routing decision; gradients flow through the features of the
    // chosen detections on later frames, not through the choice itself.
    Assignment assign = match_frame(m.data(), 0.0);
    for (auto [i, j] : assign.matches) {
      states[i] = lstm_step(params, states[i], diff::slice_cols(feats, j, 1));
    }
  }

  Value final_scores = score_matrix(params, track_block(), frames[to].detections, input.hide);
  return build_transition(final_scores, norm);
}

}  // namespace

diff::Value track_variation(const ModelParams& params, const InputVariation& input,
                            const HidingPlan& plan, TransitionNorm norm) {
  const auto& frames = input.frames.frames;
  const int n = input.frames.n;
  if (frames.front().detections.empty()) {
    throw std::invalid_argument("track_variation: zero detections in frame 0");
  }

  if (frames.back().detections.empty()) {
    throw std::invalid_argument("track_variation: zero detections in final frame " +
                                std::to_string(frames.back().frame_index));
  }

  if (!input.recurrent) {
    // Visual-only: score first-frame against last-frame detections
    // directly, no recurrence, intermediate frames never read.
    Value left = encode_detections(params, frames.front().detections, input.hide);
    Value right = encode_detections(params, frames.back().detections, input.hide);
    Value scores = append_exit_column(params, score_pairs(params, left, right));
    return build_transition(scores, norm);
  }

  if (plan.scheme == Scheme::kOcclusion && plan.handoff > 0) {
    const int h = plan.handoff;
    if (frames[h].detections.empty()) {
      // Nothing to hand off to: the row softmax at h puts all mass on
      // exit, and the absorbing merge keeps it there.
      Eigen::MatrixXd all_exit = Eigen::MatrixXd::Zero(
          frames.front().detections.size(), frames.back().detections.size() + 1);
      all_exit.col(all_exit.cols() - 1).setOnes();
      return Value(std::move(all_exit));
    }
    Value m1 = rollout_transition(params, input, 0, h, norm);  // T x (D_h + 1)
    Value m2 = rollout_transition(params, input, h, n, norm);  // D_h x (D_n + 1)
    Eigen::MatrixXd exit_row = Eigen::MatrixXd::Zero(1, m2.cols());
    exit_row(0, m2.cols() - 1) = 1.0;
    return diff::matmul(m1, diff::concat_rows({m2, Value(std::move(exit_row))}));
  }
  return rollout_transition(params, input, 0, n, norm);
}

diff::Value consistency_loss(const diff::Value& a, const diff::Value& b, const MaskMatrix& mask) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != mask.rows() ||
      a.cols() != mask.cols()) {
    throw std::invalid_argument(
        "consistency_loss: shape mismatch between transition matrices and mask");
  }
  Value masked = diff::mul(diff::mul(a, b), Value(mask));
  Value row_dots = diff::add_scalar(diff::row_sums(masked), 1e-8);
  return diff::neg(diff::sum(diff::log(row_dots)));
}

}  // namespace crosstrack

#include "crosstrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace crosstrack {

namespace {

void check_rate(double v, const char* name) {
  if (v < 0.0 || v > 1.0) {
    throw std::invalid_argument(std::string("WorldConfig.") + name + " must be in [0,1], got " +
                                std::to_string(v));
  }
}

struct SimObject {
  int id;
  double x, y, vx, vy;
  double w, h;
  Eigen::VectorXd signature;
  int occluded_until = -1;  // last occluded frame, inclusive
};

}  // namespace

void validate(const WorldConfig& c) {
  if (c.width <= 0.0 || c.height <= 0.0) {
    throw std::invalid_argument("WorldConfig.width/height must be > 0");
  }
  if (c.min_objects < 0 || c.max_objects < c.min_objects) {
    throw std::invalid_argument("WorldConfig object count range invalid: [" +
                                std::to_string(c.min_objects) + ", " +
                                std::to_string(c.max_objects) + "]");
  }
  check_rate(c.spawn_rate, "spawn_rate");
  check_rate(c.despawn_rate, "despawn_rate");
  check_rate(c.miss_rate, "miss_rate");
  check_rate(c.occlusion_rate, "occlusion_rate");
  if (c.false_positive_rate < 0.0) {
    throw std::invalid_argument("WorldConfig.false_positive_rate must be >= 0");
  }
  if (c.mean_lifetime <= 0.0) throw std::invalid_argument("WorldConfig.mean_lifetime must be > 0");
  if (c.min_speed < 0.0 || c.max_speed < c.min_speed) {
    throw std::invalid_argument("WorldConfig speed range invalid");
  }
  if (c.min_box_size <= 0.0 || c.max_box_size < c.min_box_size) {
    throw std::invalid_argument("WorldConfig box size range invalid");
  }
  if (c.appearance_dim < 1) throw std::invalid_argument("WorldConfig.appearance_dim must be >= 1");
  if (c.occlusion_min < 1 || c.occlusion_max < c.occlusion_min) {
    throw std::invalid_argument("WorldConfig occlusion duration range invalid");
  }
  if (c.velocity_noise_std < 0.0 || c.appearance_noise_std < 0.0 || c.box_jitter_std < 0.0 ||
      c.signature_scale < 0.0) {
    throw std::invalid_argument("WorldConfig noise parameters must be >= 0");
  }
}

std::pair<std::vector<FrameDetections>, GroundTruth> generate(const WorldConfig& config,
                                                              int num_frames) {
  validate(config);
  if (num_frames < 1) throw std::invalid_argument("generate: num_frames must be >= 1");

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> speed(config.min_speed, config.max_speed);
  std::uniform_real_distribution<double> size(config.min_box_size, config.max_box_size);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);

  const double end_prob = std::min(1.0, config.despawn_rate + 1.0 / config.mean_lifetime);
  int next_id = 1;
  long next_source = 0;

  auto spawn = [&](std::vector<SimObject>& objs) {
    SimObject o;
    o.id = next_id++;
    o.w = size(rng);
    o.h = size(rng);
    o.x = unit(rng) * config.width;
    o.y = unit(rng) * config.height;
    const double s = speed(rng);
    const double a = angle(rng);
    o.vx = s * std::cos(a);
    o.vy = s * std::sin(a);
    o.signature = Eigen::VectorXd::NullaryExpr(
        config.appearance_dim, [&](Eigen::Index) { return gauss(rng) * config.signature_scale; });
    objs.push_back(std::move(o));
  };

  std::vector<SimObject> objs;
  std::uniform_int_distribution<int> count(config.min_objects, config.max_objects);
  const int initial = count(rng);
  for (int i = 0; i < initial; ++i) spawn(objs);

  std::vector<FrameDetections> frames(num_frames);
  GroundTruth gt;
  gt.frames.resize(num_frames);
  gt.detection_labels.resize(num_frames);

  for (int f = 0; f < num_frames; ++f) {
    if (f > 0) {
      // Lifecycle, then motion.
      for (std::size_t i = 0; i < objs.size();) {
        if (unit(rng) < end_prob) {
          objs.erase(objs.begin() + static_cast<long>(i));
        } else {
          ++i;
        }
      }
      while (static_cast<int>(objs.size()) < config.min_objects) spawn(objs);
      if (static_cast<int>(objs.size()) < config.max_objects && unit(rng) < config.spawn_rate) {
        spawn(objs);
      }
      for (auto& o : objs) {
        o.vx += gauss(rng) * config.velocity_noise_std;
        o.vy += gauss(rng) * config.velocity_noise_std;
        o.x += o.vx;
        o.y += o.vy;
        if (o.x < 0.0) {
          o.x = -o.x;
          o.vx = -o.vx;
        }
        if (o.x > config.width) {
          o.x = 2.0 * config.width - o.x;
          o.vx = -o.vx;
        }
        if (o.y < 0.0) {
          o.y = -o.y;
          o.vy = -o.vy;
        }
        if (o.y > config.height) {
          o.y = 2.0 * config.height - o.y;
          o.vy = -o.vy;
        }
        o.x = std::clamp(o.x, 0.0, config.width);
        o.y = std::clamp(o.y, 0.0, config.height);
      }
    }

    frames[f].frame_index = f;
    for (auto& o : objs) {
      gt.frames[f].push_back({o.id, {o.x, o.y, o.w, o.h}});
      if (o.occluded_until < f && unit(rng) < config.occlusion_rate) {
        std::uniform_int_distribution<int> dur(config.occlusion_min, config.occlusion_max);
        o.occluded_until = f + dur(rng) - 1;
        gt.occlusions.push_back({o.id, f, o.occluded_until});
      }
      if (f <= o.occluded_until) continue;
      if (unit(rng) < config.miss_rate) continue;
      Detection d;
      d.frame_index = f;
      d.box.x = std::clamp(o.x + gauss(rng) * config.box_jitter_std, 0.0, config.width);
      d.box.y = std::clamp(o.y + gauss(rng) * config.box_jitter_std, 0.0, config.height);
      d.box.w = std::max(1.0, o.w + gauss(rng) * config.box_jitter_std);
      d.box.h = std::max(1.0, o.h + gauss(rng) * config.box_jitter_std);
      d.appearance = o.signature + Eigen::VectorXd::NullaryExpr(config.appearance_dim, [&](Eigen::Index) {
                       return gauss(rng) * config.appearance_noise_std;
                     });
      d.source_id = next_source++;
      frames[f].detections.push_back(std::move(d));
      gt.detection_labels[f].push_back(o.id);
    }

    std::poisson_distribution<int> fp_count(config.false_positive_rate);
    const int fps = config.false_positive_rate > 0.0 ? fp_count(rng) : 0;
    for (int i = 0; i < fps; ++i) {
      Detection d;
      d.frame_index = f;
      d.box.x = unit(rng) * config.width;
      d.box.y = unit(rng) * config.height;
      d.box.w = size(rng);
      d.box.h = size(rng);
      d.appearance = Eigen::VectorXd::NullaryExpr(config.appearance_dim, [&](Eigen::Index) {
        return gauss(rng) * config.signature_scale + gauss(rng) * config.appearance_noise_std;
      });
      d.source_id = next_source++;
      frames[f].detections.push_back(std::move(d));
      gt.detection_labels[f].push_back(-1);
    }
  }
  return {std::move(frames), std::move(gt)};
}

SequenceSample sample_training_sequence(const std::vector<FrameDetections>& corpus, int n_min,
                                        int n_max, std::mt19937_64& rng) {
  if (n_min < 1 || n_max < n_min) {
    throw std::invalid_argument("sample_training_sequence: bad n range [" + std::to_string(n_min) +
                                ", " + std::to_string(n_max) + "]");
  }
  if (static_cast<int>(corpus.size()) < n_max + 1) {
    throw std::invalid_argument("sample_training_sequence: corpus has " +
                                std::to_string(corpus.size()) + " frames, need >= " +
                                std::to_string(n_max + 1));
  }
  std::uniform_int_distribution<int> pick_n(n_min, n_max);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const int n = pick_n(rng);
    std::uniform_int_distribution<int> pick_start(0, static_cast<int>(corpus.size()) - 1 - n);
    const int start = pick_start(rng);
    if (corpus[start].detections.empty()) continue;
    SequenceSample s;
    s.n = n;
    s.frames.assign(corpus.begin() + start, corpus.begin() + start + n + 1);
    return s;
  }
  throw std::invalid_argument("sample_training_sequence: no window with a non-empty first frame");
}

void write_mot_ground_truth(const GroundTruth& gt, std::ostream& out) {
  char buf[160];
  for (std::size_t f = 0; f < gt.frames.size(); ++f) {
    for (const auto& g : gt.frames[f]) {
      std::snprintf(buf, sizeof(buf), "%zu,%d,%.2f,%.2f,%.2f,%.2f,1,-1,-1,-1\n", f + 1,
                    g.object_id, g.box.x - g.box.w / 2.0, g.box.y - g.box.h / 2.0, g.box.w,
                    g.box.h);
      out << buf;
    }
  }
}

GroundTruth read_mot_ground_truth(std::istream& in) {
  // The gt file is structurally a track file; reuse that parser.
  std::vector<Track> tracks = read_mot_tracks(in);
  int max_frame = -1;
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) max_frame = std::max(max_frame, e.frame_index);
  }
  GroundTruth gt;
  gt.frames.resize(max_frame + 1);
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) gt.frames[e.frame_index].push_back({t.id, e.detection.box});
  }
  return gt;
}

}  // namespace crosstrack

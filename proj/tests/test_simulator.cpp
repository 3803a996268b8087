#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "crosstrack/simulator.hpp"

using namespace crosstrack;

namespace {

WorldConfig clean_world() {
  WorldConfig c;
  c.min_objects = 2;
  c.max_objects = 2;
  c.spawn_rate = 0.0;
  c.mean_lifetime = 1e9;
  c.miss_rate = 0.0;
  c.false_positive_rate = 0.0;
  c.occlusion_rate = 0.0;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("fixed object count with a perfect detector") {
  auto [frames, gt] = generate(clean_world(), 5);
  REQUIRE(frames.size() == 5);
  for (const auto& f : frames) CHECK(f.detections.size() == 2);
  for (const auto& g : gt.frames) CHECK(g.size() == 2);
}

TEST_CASE("same seed reproduces byte-identical output") {
  WorldConfig c;
  c.seed = 7;
  auto [f1, g1] = generate(c, 30);
  auto [f2, g2] = generate(c, 30);
  std::ostringstream a, b;
  write_mot_detections(f1, a);
  write_mot_detections(f2, b);
  CHECK(a.str() == b.str());
  std::ostringstream aa, ab;
  write_appearances(f1, aa);
  write_appearances(f2, ab);
  CHECK(aa.str() == ab.str());
  std::ostringstream ga, gb;
  write_mot_ground_truth(g1, ga);
  write_mot_ground_truth(g2, gb);
  CHECK(ga.str() == gb.str());

  c.seed = 8;
  auto [f3, g3] = generate(c, 30);
  std::ostringstream other;
  write_mot_detections(f3, other);
  CHECK(a.str() != other.str());
}

TEST_CASE("occlusion events suppress detections per the event log") {
  WorldConfig c = clean_world();
  c.occlusion_rate = 0.05;
  c.occlusion_min = 2;
  c.occlusion_max = 4;
  c.seed = 3;
  auto [frames, gt] = generate(c, 60);
  REQUIRE(!gt.occlusions.empty());

  // Detections carry no object ids; recover them from the label channel.
  std::map<int, std::set<int>> detected_frames;  // object id -> frames with a detection
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (long id : gt.detection_labels[f]) {
      if (id >= 0) detected_frames[static_cast<int>(id)].insert(static_cast<int>(f));
    }
  }
  std::map<int, std::set<int>> present_frames;  // object id -> frames alive
  for (std::size_t f = 0; f < gt.frames.size(); ++f) {
    for (const auto& g : gt.frames[f]) present_frames[g.object_id].insert(static_cast<int>(f));
  }
  std::map<int, std::set<int>> occluded_frames;
  for (const auto& e : gt.occlusions) {
    for (int f = e.start_frame; f <= e.end_frame; ++f) occluded_frames[e.object_id].insert(f);
  }

  for (const auto& [id, present] : present_frames) {
    for (int f : present) {
      const bool occluded = occluded_frames.count(id) && occluded_frames[id].count(f);
      const bool detected = detected_frames.count(id) && detected_frames[id].count(f);
      // miss rate 0: detection iff alive and not occluded
      CHECK(detected == !occluded);
    }
  }
}

TEST_CASE("generated boxes intersect the frame rectangle") {
  WorldConfig c;
  c.min_speed = 5.0;
  c.max_speed = 15.0;  // fast objects exercise boundary reflection
  c.seed = 5;
  auto [frames, gt] = generate(c, 120);
  for (const auto& g : gt.frames) {
    for (const auto& box : g) {
      CHECK(box.box.x - box.box.w / 2.0 < c.width);
      CHECK(box.box.x + box.box.w / 2.0 > 0.0);
      CHECK(box.box.y - box.box.h / 2.0 < c.height);
      CHECK(box.box.y + box.box.h / 2.0 > 0.0);
    }
  }
}

TEST_CASE("appearance noise 0 gives one signature per object") {
  WorldConfig c = clean_world();
  c.appearance_noise_std = 0.0;
  c.seed = 11;
  auto [frames, gt] = generate(c, 20);
  std::map<long, Eigen::VectorXd> sig;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t i = 0; i < frames[f].detections.size(); ++i) {
      const long id = gt.detection_labels[f][i];
      REQUIRE(id >= 0);
      auto it = sig.find(id);
      if (it == sig.end()) {
        sig[id] = frames[f].detections[i].appearance;
      } else {
        CHECK((it->second - frames[f].detections[i].appearance).norm() == 0.0);
      }
    }
  }
}

TEST_CASE("detection labels identify false positives") {
  WorldConfig c = clean_world();
  c.false_positive_rate = 2.0;
  c.seed = 13;
  auto [frames, gt] = generate(c, 40);
  long fps = 0, reals = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    REQUIRE(gt.detection_labels[f].size() == frames[f].detections.size());
    for (long id : gt.detection_labels[f]) (id < 0 ? fps : reals)++;
  }
  CHECK(reals == 2 * 40);
  CHECK(fps > 20);  // Poisson mean 2 per frame over 40 frames
}

TEST_CASE("sample_training_sequence respects the n range") {
  WorldConfig c = clean_world();
  auto [frames, gt] = generate(c, 60);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    SequenceSample s = sample_training_sequence(frames, 4, 4, rng);
    CHECK(s.n == 4);
    CHECK(s.frames.size() == 5);
    CHECK(!s.frames[0].detections.empty());
  }
  CHECK_THROWS_AS(sample_training_sequence(frames, 4, 100, rng), std::invalid_argument);
}

TEST_CASE("sampled n is roughly uniform and empty starts are skipped") {
  WorldConfig c = clean_world();
  auto [frames, gt] = generate(c, 200);
  // Hollow out everything but frame 0 to force all samples to start there.
  std::vector<FrameDetections> sparse = frames;
  for (std::size_t f = 1; f < sparse.size(); ++f) sparse[f].detections.clear();
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    SequenceSample s = sample_training_sequence(sparse, 4, 16, rng);
    CHECK(s.frames[0].frame_index == 0);
  }

  std::map<int, int> counts;
  const int trials = 13000;
  for (int i = 0; i < trials; ++i) counts[sample_training_sequence(frames, 4, 16, rng).n]++;
  REQUIRE(counts.size() == 13);
  const double expected = trials / 13.0;
  const double sigma = std::sqrt(expected * (1.0 - 1.0 / 13.0));
  for (const auto& [n, count] : counts) {
    CHECK(std::abs(count - expected) < 4.0 * sigma);
  }
}

TEST_CASE("world config validation names the bad field") {
  WorldConfig c;
  c.miss_rate = 1.5;
  CHECK_THROWS_WITH_AS(validate(c), "WorldConfig.miss_rate must be in [0,1], got 1.500000",
                       std::invalid_argument);
  WorldConfig c2;
  c2.mean_lifetime = 0.0;
  CHECK_THROWS_AS(validate(c2), std::invalid_argument);
  WorldConfig c3;
  c3.max_objects = c3.min_objects - 1;
  CHECK_THROWS_AS(validate(c3), std::invalid_argument);
}

TEST_CASE("ground truth file round-trip") {
  WorldConfig c = clean_world();
  auto [frames, gt] = generate(c, 10);
  std::ostringstream out;
  write_mot_ground_truth(gt, out);
  std::istringstream in(out.str());
  GroundTruth back = read_mot_ground_truth(in);
  REQUIRE(back.frames.size() == gt.frames.size());
  for (std::size_t f = 0; f < gt.frames.size(); ++f) {
    REQUIRE(back.frames[f].size() == gt.frames[f].size());
    // Order within a frame may differ (writer sorts by id); compare sets.
    auto key = [](const GtBox& g) { return g.object_id; };
    std::vector<int> a, b;
    for (const auto& g : gt.frames[f]) a.push_back(key(g));
    for (const auto& g : back.frames[f]) b.push_back(key(g));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

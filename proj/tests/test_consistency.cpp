#include <doctest.h>

#include <random>

#include "crosstrack/consistency.hpp"
#include "crosstrack/simulator.hpp"
#include "oracles.hpp"

using namespace crosstrack;
using diff::Value;

namespace {

Detection make_det(double x, double y, double w, double h, std::initializer_list<double> app,
                   long source_id = -1) {
  Detection d;
  d.box = {x, y, w, h};
  d.appearance = Eigen::VectorXd(static_cast<Eigen::Index>(app.size()));
  Eigen::Index i = 0;
  for (double v : app) d.appearance[i++] = v;
  d.source_id = source_id;
  return d;
}

SequenceSample make_sample(std::vector<std::vector<Detection>> frames) {
  SequenceSample s;
  s.n = static_cast<int>(frames.size()) - 1;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    FrameDetections fd;
    fd.frame_index = static_cast<int>(f);
    for (auto& d : frames[f]) {
      d.frame_index = static_cast<int>(f);
      fd.detections.push_back(std::move(d));
    }
    s.frames.push_back(std::move(fd));
  }
  return s;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.appearance_dim = 2;
  c.encoder_hidden = 4;
  c.feature_dim = 4;
  c.lstm_hidden = 4;
  c.matcher_hidden = {6, 5};
  c.spatial_scale = 100.0;
  return c;
}

ModelParams zero_params() {
  ModelParams p = init_params(tiny_config(), 0);
  unflatten(p, Eigen::VectorXd::Zero(parameter_count(p)));
  return p;
}

double loss_value(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const MaskMatrix& m) {
  return consistency_loss(Value(a), Value(b), m).item();
}

}  // namespace

TEST_CASE("visual-spatial plans hide fields, not frames") {
  std::mt19937_64 rng(1);
  HidingPlan plan = sample_hiding_plan(Scheme::kVisualSpatial, 8, {}, rng);
  CHECK(plan.scheme == Scheme::kVisualSpatial);
  CHECK(plan.occluded_a.empty());
  CHECK(plan.occluded_b.empty());
  CHECK(plan.handoff == -1);
}

TEST_CASE("occlusion plans stay inside the window interior and differ") {
  std::mt19937_64 rng(2);
  OcclusionPlanConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 10);
    HidingPlan plan = sample_hiding_plan(Scheme::kOcclusion, n, cfg, rng);
    CHECK(plan.handoff >= 2);
    CHECK(plan.handoff <= n - 1);
    CHECK(plan.occluded_a != plan.occluded_b);
    for (const auto* s : {&plan.occluded_a, &plan.occluded_b}) {
      for (int f : *s) {
        CHECK(f >= 1);
        CHECK(f <= n - 1);
        CHECK(f != plan.handoff);
      }
    }
  }

  // n = 2 leaves {1} as the only candidate frame; the fallback keeps one
  // variation clean rather than giving up.
  HidingPlan two = sample_hiding_plan(Scheme::kOcclusion, 2, cfg, rng);
  CHECK(two.handoff == -1);
  CHECK(two.occluded_a != two.occluded_b);

  CHECK_THROWS_AS(sample_hiding_plan(Scheme::kOcclusion, 1, cfg, rng), std::invalid_argument);
}

TEST_CASE("floodfill propagates labels through box-intersection chains") {
  // Detections drift right by 8 per frame with 10-wide boxes: neighbours
  // intersect, but frame 0 and frame 2 do not.
  SequenceSample chain = make_sample({{make_det(0, 0, 10, 10, {0, 0})},
                                      {make_det(8, 0, 10, 10, {0, 0})},
                                      {make_det(16, 0, 10, 10, {0, 0}),
                                       make_det(100, 100, 10, 10, {0, 0})}});
  MaskMatrix m = floodfill_mask(chain);
  REQUIRE(m.rows() == 1);
  REQUIRE(m.cols() == 3);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 0.0);
  CHECK(m(0, 2) == 1.0);

  // Without the intermediate frame the chain needs lookback 2 to bridge.
  SequenceSample gap = make_sample({{make_det(0, 0, 10, 10, {0, 0})},
                                    {},
                                    {make_det(8, 0, 10, 10, {0, 0})}});
  CHECK(floodfill_mask(gap, 10)(0, 0) == 1.0);
  CHECK(floodfill_mask(gap, 1)(0, 0) == 0.0);

  // Two well-separated objects never share labels.
  SequenceSample split = make_sample(
      {{make_det(0, 0, 10, 10, {0, 0}), make_det(200, 200, 10, 10, {0, 0})},
       {make_det(4, 0, 10, 10, {0, 0}), make_det(204, 200, 10, 10, {0, 0})},
       {make_det(8, 0, 10, 10, {0, 0}), make_det(208, 200, 10, 10, {0, 0})}});
  MaskMatrix ms = floodfill_mask(split);
  CHECK(ms(0, 0) == 1.0);
  CHECK(ms(1, 1) == 1.0);
  CHECK(ms(0, 1) == 0.0);
  CHECK(ms(1, 0) == 0.0);
  CHECK(ms(0, 2) == 1.0);
  CHECK(ms(1, 2) == 1.0);

  // Artificial detections are unreachable by definition.
  SequenceSample art = chain;
  art.frames.back().detections[0].is_artificial = true;
  CHECK(floodfill_mask(art)(0, 0) == 0.0);
}

TEST_CASE("floodfill agrees with breadth-first reachability on simulated worlds") {
  WorldConfig wc;
  wc.seed = 31;
  auto [frames, gt] = generate(wc, 80);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    SequenceSample s = sample_training_sequence(frames, 2, 10, rng);
    const MaskMatrix actual = floodfill_mask(s);
    const MaskMatrix expected = oracles::reachability_mask_oracle(s);
    CHECK(actual == expected);
  }
}

TEST_CASE("ones mask keeps everything except artificial columns") {
  SequenceSample s = make_sample({{make_det(0, 0, 10, 10, {0, 0})},
                                  {make_det(8, 0, 10, 10, {0, 0}),
                                   make_det(9, 0, 10, 10, {0, 0})}});
  s.frames.back().detections[1].is_artificial = true;
  MaskMatrix m = ones_mask(s);
  REQUIRE(m.rows() == 1);
  REQUIRE(m.cols() == 3);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 0.0);
  CHECK(m(0, 2) == 1.0);
}

TEST_CASE("artificial detections copy a distant appearance into the final frame") {
  SequenceSample s = make_sample({{make_det(0, 0, 10, 10, {1, 1}, 100)},
                                  {make_det(8, 0, 10, 10, {1, 1}, 101),
                                   make_det(50, 50, 10, 10, {2, 2}, 102)}});
  s.frames[0].frame_index = 10;
  s.frames[1].frame_index = 11;

  std::vector<FrameDetections> corpus(21);
  for (int f = 0; f <= 20; ++f) {
    corpus[f].frame_index = f;
    Detection d = make_det(f, f, 5, 5, {double(f), -double(f)}, 1000 + f);
    d.frame_index = f;
    corpus[f].detections.push_back(std::move(d));
  }

  std::mt19937_64 rng(6);
  ArtificialResult res = add_artificial_detections(s, corpus, 5, rng);
  CHECK(!res.no_far_donor);
  const auto& last = res.sample.frames.back().detections;
  REQUIRE(last.size() == 4);
  for (int j = 0; j < 2; ++j) {
    const Detection& real = last[j];
    const Detection& art = last[j + 2];
    CHECK(!real.is_artificial);
    CHECK(art.is_artificial);
    CHECK(art.box.x == real.box.x);
    CHECK(art.box.y == real.box.y);
    CHECK(art.box.w == real.box.w);
    CHECK(art.box.h == real.box.h);
    // Donor provenance: frame at distance >= 5 from the window [10, 11].
    const long donor_frame = art.source_id - 1000;
    const bool far_enough = donor_frame <= 5 || donor_frame >= 16;
    CHECK(far_enough);
    CHECK((art.appearance - corpus[donor_frame].detections[0].appearance).norm() == 0.0);
  }
  // Earlier frames untouched.
  CHECK(res.sample.frames[0].detections.size() == 1);

  std::vector<FrameDetections> near_only(corpus.begin() + 8, corpus.begin() + 14);
  ArtificialResult none = add_artificial_detections(s, near_only, 5, rng);
  CHECK(none.no_far_donor);
  CHECK(none.sample.frames.back().detections.size() == 2);
}

TEST_CASE("hidden_view zeroes one field and keeps the other") {
  Detection d = make_det(3, 4, 5, 6, {7, 8});
  Detection s = hidden_view(d, Hide::kSpatial);
  CHECK(s.box.x == 0.0);
  CHECK(s.box.y == 0.0);
  CHECK(s.box.w == 0.0);
  CHECK(s.box.h == 0.0);
  CHECK((s.appearance - d.appearance).norm() == 0.0);
  Detection a = hidden_view(d, Hide::kAppearance);
  CHECK(a.appearance.isZero(0.0));
  CHECK(a.box.x == 3.0);
  Detection n = hidden_view(d, Hide::kNone);
  CHECK(n.box.x == 3.0);
  CHECK((n.appearance - d.appearance).norm() == 0.0);
}

TEST_CASE("apply_hiding keeps shared frames byte-identical") {
  SequenceSample s = make_sample({{make_det(0, 0, 10, 10, {1, 2})},
                                  {make_det(8, 0, 10, 10, {3, 4})},
                                  {make_det(16, 0, 10, 10, {5, 6})},
                                  {make_det(24, 0, 10, 10, {7, 8})}});

  auto same_frame = [](const FrameDetections& x, const FrameDetections& y) {
    if (x.detections.size() != y.detections.size()) return false;
    for (std::size_t i = 0; i < x.detections.size(); ++i) {
      const auto& a = x.detections[i];
      const auto& b = y.detections[i];
      if (a.box.x != b.box.x || a.box.y != b.box.y || a.box.w != b.box.w || a.box.h != b.box.h) {
        return false;
      }
      if ((a.appearance - b.appearance).norm() != 0.0) return false;
    }
    return true;
  };

  HidingPlan vs;
  vs.scheme = Scheme::kVisualSpatial;
  auto [va, vb] = apply_hiding(s, vs);
  CHECK(va.hide == Hide::kSpatial);
  CHECK(!va.recurrent);
  CHECK(vb.hide == Hide::kAppearance);
  CHECK(vb.recurrent);
  for (int f = 0; f <= 3; ++f) {
    CHECK(same_frame(va.frames.frames[f], s.frames[f]));
    CHECK(same_frame(vb.frames.frames[f], s.frames[f]));
  }

  HidingPlan oc;
  oc.scheme = Scheme::kOcclusion;
  oc.occluded_a = {1};
  oc.occluded_b = {2};
  oc.handoff = -1;
  auto [oa, ob] = apply_hiding(s, oc);
  CHECK(oa.hide == Hide::kNone);
  CHECK(ob.hide == Hide::kNone);
  CHECK(oa.frames.frames[1].detections.empty());
  CHECK(ob.frames.frames[2].detections.empty());
  CHECK(same_frame(oa.frames.frames[2], s.frames[2]));
  CHECK(same_frame(ob.frames.frames[1], s.frames[1]));
  for (int f : {0, 3}) {
    CHECK(same_frame(oa.frames.frames[f], s.frames[f]));
    CHECK(same_frame(ob.frames.frames[f], s.frames[f]));
  }
}

TEST_CASE("visual-only variation ignores boxes and intermediate frames") {
  ModelParams p = init_params(tiny_config(), 7);
  SequenceSample s = make_sample({{make_det(0, 0, 10, 10, {1, 2}), make_det(30, 0, 10, 10, {-1, 0.5})},
                                  {make_det(4, 0, 10, 10, {1, 2})},
                                  {make_det(8, 0, 10, 10, {1.1, 2.1}), make_det(38, 0, 10, 10, {-0.9, 0.6})}});
  HidingPlan plan;
  plan.scheme = Scheme::kVisualSpatial;
  auto [a, b] = apply_hiding(s, plan);

  const Eigen::MatrixXd base = track_variation(p, a, plan).data();
  REQUIRE(base.rows() == 2);
  REQUIRE(base.cols() == 3);
  for (int i = 0; i < 2; ++i) CHECK(base.row(i).sum() <= 1.0 + 1e-9);

  // Moving every box and rewriting the middle frame changes nothing.
  SequenceSample moved = s;
  for (auto& f : moved.frames) {
    for (auto& d : f.detections) {
      d.box.x += 100.0;
      d.box.y += 50.0;
    }
  }
  moved.frames[1].detections = {make_det(500, 500, 3, 3, {9, 9}),
                                make_det(600, 600, 3, 3, {-9, -9})};
  auto [a2, b2] = apply_hiding(moved, plan);
  CHECK(track_variation(p, a2, plan).data() == base);

  // The recurrent spatial variation is blind to appearance edits instead.
  const Eigen::MatrixXd spatial_base = track_variation(p, b, plan).data();
  SequenceSample recolored = s;
  for (auto& f : recolored.frames) {
    for (auto& d : f.detections) d.appearance = -5.0 * d.appearance;
  }
  auto [a3, b3] = apply_hiding(recolored, plan);
  CHECK(track_variation(p, b3, plan).data() == spatial_base);
  CHECK(track_variation(p, a3, plan).data() != base);
}

TEST_CASE("track_variation rejects empty boundary frames") {
  ModelParams p = init_params(tiny_config(), 7);
  HidingPlan plan;
  plan.scheme = Scheme::kVisualSpatial;
  SequenceSample no_first = make_sample({{}, {make_det(0, 0, 5, 5, {1, 1})}});
  auto [a1, b1] = apply_hiding(no_first, plan);
  CHECK_THROWS_AS(track_variation(p, a1, plan), std::invalid_argument);
  SequenceSample no_last = make_sample({{make_det(0, 0, 5, 5, {1, 1})}, {}});
  auto [a2, b2] = apply_hiding(no_last, plan);
  CHECK_THROWS_AS(track_variation(p, b2, plan), std::invalid_argument);
}

TEST_CASE("occlusion hand-off merges legs with an absorbing exit") {
  // All-zero parameters give uniform scores, so the merge arithmetic is
  // exact: leg1 = [0.5, 0.5], leg2 = [1/3, 1/3, 1/3], and the product with
  // the absorbing exit row is [1/6, 1/6, 2/3].
  ModelParams p = zero_params();
  SequenceSample s = make_sample({{make_det(0, 0, 10, 10, {1, 2})},
                                  {make_det(4, 0, 10, 10, {1, 2})},
                                  {make_det(8, 0, 10, 10, {1, 2})},
                                  {make_det(12, 0, 10, 10, {1, 2}),
                                   make_det(40, 40, 10, 10, {3, 4})}});
  HidingPlan plan;
  plan.scheme = Scheme::kOcclusion;
  plan.handoff = 2;
  plan.occluded_a = {1};
  InputVariation input;
  input.frames = s;
  input.hide = Hide::kNone;
  input.recurrent = true;

  const Eigen::MatrixXd m = track_variation(p, input, plan).data();
  REQUIRE(m.rows() == 1);
  REQUIRE(m.cols() == 3);
  CHECK(m(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(m(0, 1) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(m(0, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // Row-stochastic legs stay row-stochastic through the merge.
  ModelParams trained = init_params(tiny_config(), 9);
  const Eigen::MatrixXd r = track_variation(trained, input, plan, TransitionNorm::kRowOnly).data();
  CHECK(r.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::MatrixXd mm = track_variation(trained, input, plan).data();
  CHECK(mm.row(0).sum() <= 1.0 + 1e-9);

  // An empty hand-off frame forces the exact all-exit matrix.
  SequenceSample gap = s;
  gap.frames[2].detections.clear();
  InputVariation broken;
  broken.frames = gap;
  const Eigen::MatrixXd e = track_variation(p, broken, plan).data();
  REQUIRE(e.rows() == 1);
  REQUIRE(e.cols() == 3);
  CHECK(e(0, 0) == 0.0);
  CHECK(e(0, 1) == 0.0);
  CHECK(e(0, 2) == 1.0);
}

TEST_CASE("consistency loss on frozen examples") {
  const MaskMatrix ones12 = MaskMatrix::Ones(1, 2);
  Eigen::MatrixXd half(1, 2);
  half << 0.5, 0.5;
  CHECK(loss_value(half, half, ones12) == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  Eigen::MatrixXd half2(2, 2);
  half2 << 0.5, 0.5, 0.5, 0.5;
  CHECK(loss_value(half2, half2, MaskMatrix::Ones(2, 2)) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-6));

  Eigen::MatrixXd ident(2, 3);
  ident << 1, 0, 0, 0, 1, 0;
  CHECK(loss_value(ident, ident, MaskMatrix::Ones(2, 3)) == doctest::Approx(0.0).epsilon(1e-6));

  Eigen::MatrixXd left(1, 3), right(1, 3);
  left << 1, 0, 0;
  right << 0, 1, 0;
  CHECK(loss_value(left, right, MaskMatrix::Ones(1, 3)) ==
        doctest::Approx(-std::log(1e-8)).epsilon(1e-9));

  // The mask removes terms from the row dot product.
  Eigen::MatrixXd uneven(1, 2);
  uneven << 0.7, 0.3;
  MaskMatrix keep_exit(1, 2);
  keep_exit << 0.0, 1.0;
  CHECK(loss_value(uneven, uneven, keep_exit) == doctest::Approx(-std::log(0.09 + 1e-8)));
  CHECK(loss_value(uneven, uneven, MaskMatrix::Ones(1, 2)) ==
        doctest::Approx(-std::log(0.58 + 1e-8)));

  // Symmetric in the two variations.
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd a = oracles::random_matrix(3, 4, rng, 0.25).array().abs();
  const Eigen::MatrixXd b = oracles::random_matrix(3, 4, rng, 0.25).array().abs();
  const MaskMatrix m = MaskMatrix::Ones(3, 4);
  CHECK(loss_value(a, b, m) == loss_value(b, a, m));

  CHECK_THROWS_AS(loss_value(half, ident, ones12), std::invalid_argument);
}

TEST_CASE("gradients through the consistency loss match finite differences") {
  std::mt19937_64 rng(9);
  Value a(oracles::random_matrix(2, 3, rng, 0.3).array().abs().matrix() + Eigen::MatrixXd::Constant(2, 3, 0.05));
  Value b(oracles::random_matrix(2, 3, rng, 0.3).array().abs().matrix() + Eigen::MatrixXd::Constant(2, 3, 0.05));
  MaskMatrix m(2, 3);
  m << 1, 0, 1, 0, 1, 1;
  auto f = [&]() { return consistency_loss(a, b, m); };
  CHECK(oracles::max_gradient_error(f, {&a, &b}, 1e-6) < 1e-5);
}

TEST_CASE("gradients through the full visual-spatial pipeline match finite differences") {
  ModelParams p = init_params(tiny_config(), 10);
  // Move off the zero-bias relu kinks (hidden appearance makes encoder
  // preactivations exactly equal the biases).
  {
    std::mt19937_64 nudge_rng(99);
    std::uniform_real_distribution<double> nudge(-0.05, 0.05);
    Eigen::VectorXd flat = flatten(p);
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] += nudge(nudge_rng);
    unflatten(p, flat);
  }
  SequenceSample s = make_sample(
      {{make_det(10, 10, 12, 12, {0.4, -0.2}), make_det(40, 40, 12, 12, {-0.6, 0.8})},
       {make_det(14, 11, 12, 12, {0.45, -0.15}), make_det(44, 41, 12, 12, {-0.55, 0.85})},
       {make_det(18, 12, 12, 12, {0.5, -0.1}), make_det(48, 42, 12, 12, {-0.5, 0.9})}});
  HidingPlan plan;
  plan.scheme = Scheme::kVisualSpatial;
  const MaskMatrix mask = floodfill_mask(s);

  auto f = [&]() {
    auto [a, b] = apply_hiding(s, plan);
    return consistency_loss(track_variation(p, a, plan), track_variation(p, b, plan), mask);
  };
  CHECK(oracles::max_gradient_error(f, p.all()) < 5e-6);
}

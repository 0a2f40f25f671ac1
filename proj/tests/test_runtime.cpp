// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "hit/routing.hpp"
#include "hit/runtime.hpp"
#include "hit/synthetic.hpp"
#include "support.hpp"

using namespace hit;

namespace {

// Red channel encodes the column index, green the row index.
Image ramp(std::size_t h, std::size_t w) {
  Image img({h, w, 3});
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      img.at(r, c, 0) = static_cast<float>(c);
      img.at(r, c, 1) = static_cast<float>(r);
    }
  return img;
}

class ScriptedTracker final : public Tracker {
 public:
  std::size_t fail_at = 0;
  bool numeric = false;
  std::vector<Box> references;

  void init(const Image&, const Box&) override {}
  FrameOutput track(const Image&, const Box& reference, std::size_t index) override {
    references.push_back(reference);
    if (index == fail_at) {
      if (numeric) throw NumericError("score went NaN");
      throw std::runtime_error("boom");
    }
    FrameOutput out;
    out.box = Box::from_center(reference.center_x() + 1.0, reference.center_y(), reference.width(),
                               reference.height());
    return out;
  }
};

}  // namespace

TEST_CASE("crop samples land on the mapped frame positions") {
  const Image frame = ramp(120, 160);
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const double w = rng.uniform(6, 20), h = rng.uniform(6, 20);
    const Box box = Box::from_center(rng.uniform(50, 110), rng.uniform(45, 75), w, h);
    const Crop c = crop_resize(frame, box, 2.0, 32);
    CHECK(c.mapping.side == doctest::Approx(2.0 * std::sqrt(w * h)));
    for (std::size_t i = 0; i < 32; i += 5)
      for (std::size_t j = 0; j < 32; j += 5) {
        // Pixel k covers [k, k+1), so the ramp value is position - 0.5.
        const Box px = map_box_to_frame({(j + 0.5) / 32, (i + 0.5) / 32, 0, 0}, c.mapping);
        CHECK(std::abs(c.patch.at(i, j, 0) + 0.5 - px.x0) < 1e-3);
        CHECK(std::abs(c.patch.at(i, j, 1) + 0.5 - px.y0) < 1e-3);
      }
  }
}

TEST_CASE("crop and frame coordinate maps invert each other") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const CropMapping m{rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(4, 400), 128};
    const Box b = test::random_box(rng, 0.0, 600.0);
    const Box back = map_box_to_frame(map_box_to_crop(b, m), m);
    CHECK(std::abs(back.x0 - b.x0) < 1e-9);
    CHECK(std::abs(back.y1 - b.y1) < 1e-9);
  }
}

TEST_CASE("samples with every tap off-frame are exactly the channel mean") {
  Image frame({8, 8, 3});
  for (std::size_t p = 0; p < 64; ++p) {
    frame[p * 3 + 0] = static_cast<float>(p % 2);
    frame[p * 3 + 1] = 0.25f;
    frame[p * 3 + 2] = static_cast<float>(p) / 64.0f;
  }
  double mean_b = 0;
  for (std::size_t p = 0; p < 64; ++p) mean_b += frame[p * 3 + 2];
  mean_b /= 64;
  const Crop c = crop_resize(frame, Box::from_center(200, 200, 4, 4), 2.0, 16);
  for (std::size_t p = 0; p < 256; ++p) {
    CHECK(c.patch[p * 3 + 0] == 0.5f);
    CHECK(c.patch[p * 3 + 1] == 0.25f);
    CHECK(c.patch[p * 3 + 2] == static_cast<float>(mean_b));
  }
}

TEST_CASE("crops are deterministic and validate their inputs") {
  Rng rng(3);
  const Image frame = test::random_image(rng, 64);
  const Box b{10, 12, 30, 40};
  CHECK(test::bit_equal(crop_resize(frame, b, 4.0, 32).patch, crop_resize(frame, b, 4.0, 32).patch));
  CHECK_THROWS_AS(crop_resize(frame, {5, 5, 5, 9}, 4.0, 32), DataError);
  CHECK_THROWS_AS(crop_resize(frame, b, 0.0, 32), UsageError);
  CHECK_THROWS_AS(crop_resize(frame, b, 4.0, 0), UsageError);
  CHECK_THROWS_AS(crop_resize(Image({4, 4, 1}), b, 4.0, 8), ShapeError);
}

TEST_CASE("normalization uses the per-channel statistics") {
  const Image img({1, 1, 3}, std::vector<float>{0.485f, 0.456f + 0.224f, 0.406f - 0.45f});
  const Image n = normalize_image(img);
  CHECK(n[0] == 0.0f);
  CHECK(n[1] == doctest::Approx(1.0));
  CHECK(n[2] == doctest::Approx(-2.0));
}

TEST_CASE("track_sequence chains each crop on the previous output") {
  const std::vector<Image> frames(5, Image({40, 40, 3}));
  const Box init{10, 10, 14, 16};
  ScriptedTracker t;
  t.fail_at = 99;
  const TrackResult r = track_sequence(frames, init, t);
  REQUIRE(r.boxes.size() == 5);
  CHECK(r.boxes[0] == init);
  CHECK(r.forward_ms.size() == 4);
  for (std::size_t i = 1; i < 5; ++i) CHECK(t.references[i - 1].center_x() == doctest::Approx(r.boxes[i - 1].center_x()));
  CHECK(r.boxes[4].center_x() == doctest::Approx(init.center_x() + 4));

  // Fixed trace: every crop centers on the reference instead.
  ScriptedTracker fixed;
  fixed.fail_at = 99;
  const std::vector<Box> ref(5, init);
  const TrackOptions opt{&ref};
  const TrackResult rf = track_sequence(frames, init, fixed, opt);
  CHECK(rf.boxes[4].center_x() == doctest::Approx(init.center_x() + 1));

  const std::vector<Box> short_ref(3, init);
  const TrackOptions bad{&short_ref};
  CHECK_THROWS_AS(track_sequence(frames, init, fixed, bad), DataError);
  CHECK_THROWS_AS(track_sequence({}, init, fixed), DataError);
  CHECK_THROWS_AS(track_sequence(frames, {1, 1, 1, 4}, fixed), DataError);
}

TEST_CASE("crop references are sanitized while outputs stay raw") {
  const std::vector<Image> frames(3, Image({40, 50, 3}));
  ScriptedTracker t;
  t.fail_at = 99;
  const std::vector<Box> ref{{60, -30, 58, -30}, {0, 0, 500, 500}, {0, 0, 1, 1}};
  const TrackOptions opt{&ref};
  const TrackResult r = track_sequence(frames, {1, 1, 5, 5}, t, opt);
  CHECK(t.references[0].center_x() == 50.0);
  CHECK(t.references[0].center_y() == 0.0);
  CHECK(t.references[0].width() == 2.0);
  CHECK(t.references[0].height() == 1.0);
  CHECK(t.references[1].width() == 50.0);
  CHECK(t.references[1].height() == 40.0);
  CHECK(r.boxes[1].center_x() == 51.0);
}

TEST_CASE("failures carry the zero-based frame index") {
  const std::vector<Image> frames(6, Image({20, 20, 3}));
  ScriptedTracker t;
  t.fail_at = 3;
  try {
    track_sequence(frames, {2, 2, 8, 8}, t);
    FAIL("expected a TrackingError");
  } catch (const TrackingError& e) {
    CHECK(e.frame() == 3);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
  ScriptedTracker n;
  n.fail_at = 2;
  n.numeric = true;
  CHECK_THROWS_WITH_AS(track_sequence(frames, {2, 2, 8, 8}, n), doctest::Contains("frame 2"), NumericError);
}

TEST_CASE("closed-loop tracking differs from feeding the ground truth") {
  const ModelConfig c = test::toy();
  const HitNetwork net(c, init_weights(c, 21));
  const SyntheticSequence seq = gen_synthetic(8, Difficulty::level(2), 8, 160, 160);
  HitTracker a(net, TrackerMode::hit), b(net, TrackerMode::hit);
  const TrackResult closed = track_sequence(seq.frames, seq.gt[0], a);
  const TrackOptions opt{&seq.gt};
  const TrackResult fed = track_sequence(seq.frames, seq.gt[0], b, opt);
  CHECK(test::bit_equal(closed.boxes[1], fed.boxes[1]));
  bool differs = false;
  for (std::size_t i = 2; i < seq.frames.size(); ++i) differs = differs || !(closed.boxes[i] == fed.boxes[i]);
  CHECK(differs);
}

TEST_CASE("HiT trackers are deterministic and reuse decisions between classifications") {
  const ModelConfig c = test::toy();
  const HitNetwork net(c, init_weights(c, 22));
  const SyntheticSequence seq = gen_synthetic(9, Difficulty::level(1), 7, 128, 128);
  const TrackOptions opt{&seq.gt};
  HitTracker x(net, TrackerMode::dyhit, 0.5), y(net, TrackerMode::dyhit, 0.5);
  const TrackResult rx = track_sequence(seq.frames, seq.gt[0], x, opt);
  const TrackResult ry = track_sequence(seq.frames, seq.gt[0], y, opt);
  for (std::size_t i = 0; i < rx.boxes.size(); ++i) CHECK(test::bit_equal(rx.boxes[i], ry.boxes[i]));

  HitTracker every3(net, TrackerMode::dyhit, 0.5, 3);
  const TrackResult r3 = track_sequence(seq.frames, seq.gt[0], every3, opt);
  REQUIRE(r3.decisions.size() == 6);
  CHECK(r3.decisions[1].f == r3.decisions[0].f);
  CHECK(r3.decisions[2].f == r3.decisions[0].f);
  CHECK(r3.decisions[3].f == rx.decisions[3].f);
  CHECK(r3.decisions[4].route == r3.decisions[3].route);

  HitTracker plain(net, TrackerMode::hit);
  CHECK(track_sequence(seq.frames, seq.gt[0], plain, opt).decisions.empty());
  CHECK_THROWS_AS(HitTracker(net, TrackerMode::dyhit, 0.5, 0), UsageError);
  CHECK_THROWS_AS(HitTracker(net, TrackerMode::dyhit, -1.0), UsageError);
  HitTracker fresh(net, TrackerMode::hit);
  CHECK_THROWS_AS(fresh.track(seq.frames[1], seq.gt[0], 1), UsageError);
}

TEST_CASE("synthetic sequences are seeded and keep the target in frame") {
  for (std::size_t level : {0u, 1u, 3u, 5u}) {
    const SyntheticSequence a = gen_synthetic(40 + level, Difficulty::level(level), 30, 96, 128);
    const SyntheticSequence b = gen_synthetic(40 + level, Difficulty::level(level), 30, 96, 128);
    REQUIRE(a.frames.size() == 30);
    REQUIRE(a.gt.size() == 30);
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(test::bit_equal(a.frames[i], b.frames[i]));
      CHECK(a.gt[i] == b.gt[i]);
      CHECK(a.gt[i].x0 >= 0.0);
      CHECK(a.gt[i].y0 >= 0.0);
      CHECK(a.gt[i].x1 <= 128.0);
      CHECK(a.gt[i].y1 <= 96.0);
      CHECK(a.gt[i].area() > 0.0);
      CHECK(a.frames[i].shape() == Shape{96, 128, 3});
      for (float v : a.frames[i].data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }
  CHECK_FALSE(gen_synthetic(1, Difficulty{}, 3, 64, 64).frames[1] == gen_synthetic(2, Difficulty{}, 3, 64, 64).frames[1]);
  CHECK_THROWS_AS(gen_synthetic(1, Difficulty{}, 0, 64, 64), UsageError);
  CHECK_THROWS_AS(gen_synthetic(1, Difficulty{}, 3, 8, 64), UsageError);
}

TEST_CASE("difficulty levels and mixed suites") {
  const Difficulty d = Difficulty::level(3);
  CHECK(d.distractors == 3);
  CHECK(d.clutter == doctest::Approx(0.3));
  CHECK(d.motion == doctest::Approx(0.04));
  CHECK(d.blur);
  CHECK_FALSE(Difficulty::level(2).blur);
  const auto suite = make_mixed_suite(7, 4, 5, 64, 2);
  REQUIRE(suite.size() == 4);
  CHECK(suite[0].difficulty.distractors == 0);
  CHECK(suite[1].difficulty.distractors == 2);
  CHECK(suite[2].difficulty.distractors == 0);
  CHECK(suite[3].frames.size() == 5);
}

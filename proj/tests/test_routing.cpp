// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "hit/routing.hpp"
#include "hit/runtime.hpp"
#include "hit/synthetic.hpp"
#include "hit/trackers.hpp"
#include "support.hpp"

using namespace hit;

namespace {

struct Fixture {
  ModelConfig config = test::toy();
  HitNetwork net{config, init_weights(config, 12)};
  Rng rng{77};

  std::pair<TensorF, TensorF> pair() {
    return {test::random_image(rng, config.template_size), test::random_image(rng, config.search_size)};
  }
};

std::uint64_t deep_macs(const mac::Tally& t) {
  std::uint64_t s = 0;
  for (const char* m : {"shrink1", "stage2", "shrink2", "stage3", "bridge", "head2"}) s += t.module(m);
  return s;
}

}  // namespace

TEST_CASE("scene score averages the foreground tokens") {
  bool fallback = true;
  const std::vector<float> s{0.2f, 0.7f, 0.9f};
  CHECK(aggregate_scores(s, 0.6, fallback) == doctest::Approx((0.7 + 0.9) / 2));
  CHECK_FALSE(fallback);
  const std::vector<float> low{0.2f, 0.4f, 0.5f};
  CHECK(aggregate_scores(low, 0.6, fallback) == doctest::Approx(1.1 / 3));
  CHECK(fallback);
  CHECK_THROWS_AS(aggregate_scores(std::span<const float>{}, 0.6, fallback), ShapeError);
}

TEST_CASE("route choice is strict and ties go to the full model") {
  CHECK(choose_route(0.5, 0.5) == Route::route2);
  CHECK(choose_route(0.51, 0.5) == Route::route1);
  CHECK(choose_route(0.3, 0.0) == Route::route1);
  CHECK(choose_route(0.99, 1.0) == Route::route2);
  CHECK(route_name(Route::route1) == "route1");
  static_assert(choose_route(0.0, 0.0) == Route::route2);
}

TEST_CASE("router emits one score in (0, 1) per search token") {
  Fixture f;
  const ModelConfig base = model_preset("base");
  const RouterWeights w = init_router(base.channels[0], base.router_hidden, 3);
  Rng rng(4);
  const TensorF s_max = test::random_tensor<float>(rng, {16, 16, base.channels[0]}, 3.0);
  const RouterScores rs = router_score(s_max, w, base.fg_threshold);
  CHECK(rs.scores.shape() == Shape{16, 16});
  for (float v : rs.scores.data()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  CHECK(rs.f > 0.0);
  CHECK(rs.f < 1.0);
  CHECK_THROWS_AS(router_forward(TensorF({4, 4, 8}), w), ShapeError);
  CHECK_THROWS_AS(f.net.set_router(w), ShapeError);
}

TEST_CASE("router parameter count stays near 0.04M at C1 = 384") {
  const ModelConfig base = model_preset("base");
  const RouterWeights w = make_router(base.channels[0], base.router_hidden);
  const std::size_t n = w.l1.weight.size() + w.l1.bias.size() + w.l2.weight.size() +
                        w.l2.bias.size() + w.l3.weight.size() + w.l3.bias.size();
  CHECK(n == 384 * 96 + 96 + 96 * 32 + 32 + 32 + 1);
}

TEST_CASE("T = 0 reproduces Route1 and T = 1 reproduces HiT bit for bit") {
  Fixture f;
  for (int trial = 0; trial < 5; ++trial) {
    const auto [z, x] = f.pair();
    const TensorF zg = f.net.embed(z);
    const DyHitResult lo = dyhit_forward(f.net, z, x, 0.0);
    const DyHitResult hi = dyhit_forward(f.net, z, x, 1.0);
    CHECK(lo.decision.route == Route::route1);
    CHECK(hi.decision.route == Route::route2);
    CHECK(test::bit_equal(lo.prediction.box, f.net.forward_route1(zg, x).box));
    CHECK(test::bit_equal(hi.prediction.box, hit_forward(f.net, z, x).box));
    CHECK(test::bit_equal(hi.prediction.tl_map, hit_forward(f.net, z, x).tl_map));
  }
  const auto [z, x] = f.pair();
  CHECK_THROWS_AS(dyhit_forward(f.net, z, x, 1.5), UsageError);
  CHECK_THROWS_AS(dyhit_forward(f.net, z, x, -0.1), UsageError);
}

TEST_CASE("the early exit executes no deep-stage, bridge or Head2 work") {
  Fixture f;
  const auto [z, x] = f.pair();
  mac::Recorder rec;
  dyhit_forward(f.net, z, x, 0.0);
  CHECK(deep_macs(rec.tally()) == 0);
  CHECK(rec.tally().module("stage1") > 0);
  CHECK(rec.tally().module("head1") > 0);
  CHECK(rec.tally().module("router") > 0);
}

TEST_CASE("worst case costs exactly the router on top of HiT") {
  Fixture f;
  const auto [z, x] = f.pair();
  std::uint64_t plain = 0, worst = 0, router = 0;
  {
    mac::Recorder rec;
    hit_forward(f.net, z, x);
    plain = rec.tally().total;
  }
  {
    mac::Recorder rec;
    dyhit_forward(f.net, z, x, 1.0);
    worst = rec.tally().total;
    router = rec.tally().module("router");
  }
  CHECK(router > 0);
  CHECK(worst == plain + router);
}

TEST_CASE("oracle jitter is deterministic per frame and zero noise is exact") {
  const Box gt{10, 20, 50, 60};
  CHECK(test::bit_equal(OracleBaseTracker::jitter(gt, 0.0, 1, 3), gt));
  CHECK(test::bit_equal(OracleBaseTracker::jitter(gt, 0.1, 1, 3), OracleBaseTracker::jitter(gt, 0.1, 1, 3)));
  CHECK_FALSE(OracleBaseTracker::jitter(gt, 0.1, 1, 3) == OracleBaseTracker::jitter(gt, 0.1, 1, 4));
  CHECK_FALSE(OracleBaseTracker::jitter(gt, 0.1, 1, 3) == OracleBaseTracker::jitter(gt, 0.1, 2, 3));
}

TEST_CASE("oracle jitter at 0.05 lands in the Monte-Carlo IoU band") {
  // Band from an independent 10k-sample simulation of the same jitter model:
  // mean IoU 0.8426, per-sample std 0.061, so 2000 samples sit within ±0.009.
  const Box gt = Box::from_xywh(100, 100, 40, 30);
  double sum = 0;
  const std::size_t n = 2000;
  for (std::size_t i = 0; i < n; ++i) sum += iou(OracleBaseTracker::jitter(gt, 0.05, 5, i), gt);
  const double mean = sum / static_cast<double>(n);
  CHECK(mean >= 0.834);
  CHECK(mean <= 0.851);
}

TEST_CASE("base trackers enforce init and frame coverage") {
  const std::vector<Box> gt{{0, 0, 4, 4}, {1, 1, 5, 5}};
  OracleBaseTracker oracle(gt, 0.1, 1);
  const Image frame({16, 16, 3});
  CHECK_THROWS_AS(oracle.predict(frame, gt[0], 1), UsageError);
  oracle.init(frame, gt[0]);
  CHECK_NOTHROW(oracle.predict(frame, gt[0], 1));
  CHECK_THROWS_WITH_AS(oracle.predict(frame, gt[0], 2), doctest::Contains("frame 2"), DataError);
  CHECK_THROWS_AS(OracleBaseTracker(gt, -1.0, 1), UsageError);

  FileBaseTracker file(gt);
  CHECK(file.size() == 2);
  CHECK_THROWS_AS(file.predict(frame, gt[0], 0), UsageError);
  file.init(frame, gt[0]);
  CHECK(file.predict(frame, gt[0], 1) == gt[1]);
  CHECK_THROWS_WITH_AS(file.predict(frame, gt[0], 5), doctest::Contains("frame 5"), DataError);
  CHECK(file.latency_class() == LatencyClass::slow);
  CHECK(oracle.latency_class() == LatencyClass::fast);
}

TEST_CASE("DyTracker emits exactly the chosen branch's box") {
  Fixture f;
  const SyntheticSequence seq = gen_synthetic(3, Difficulty::level(1), 8, 160, 160);
  std::vector<Box> base_boxes, r1_boxes;
  for (std::size_t i = 0; i < seq.gt.size(); ++i) {
    base_boxes.push_back(OracleBaseTracker::jitter(seq.gt[i], 0.02, 1, i));
    r1_boxes.push_back(OracleBaseTracker::jitter(seq.gt[i], 0.15, 2, i));
  }
  // Thresholds straddling the observed scores give both branches.
  std::vector<double> fs;
  {
    FileBaseTracker base(base_boxes);
    DyTracker probe(f.net, base, 1.0);
    const TrackOptions opt{&seq.gt};
    for (const RouteDecision& d : track_sequence(seq.frames, seq.gt[0], probe, opt).decisions) fs.push_back(d.f);
  }
  std::sort(fs.begin(), fs.end());
  for (double t : {0.0, fs[fs.size() / 2], 1.0}) {
    FileBaseTracker base(base_boxes), r1(r1_boxes);
    DyTracker dy(f.net, base, t);
    dy.set_route1_override(&r1);
    const TrackOptions opt{&seq.gt};
    const TrackResult res = track_sequence(seq.frames, seq.gt[0], dy, opt);
    REQUIRE(res.decisions.size() == seq.frames.size() - 1);
    for (std::size_t i = 1; i < seq.frames.size(); ++i) {
      const RouteDecision& d = res.decisions[i - 1];
      CHECK(d.route == choose_route(d.f, t));
      CHECK(test::bit_equal(res.boxes[i], d.route == Route::route1 ? r1_boxes[i] : base_boxes[i]));
    }
  }
  CHECK_THROWS_AS(DyTracker(f.net, *std::make_unique<FileBaseTracker>(base_boxes), 2.0), UsageError);
}

TEST_CASE("DyTracker without an override maps the Head1 box to the frame") {
  Fixture f;
  const SyntheticSequence seq = gen_synthetic(4, Difficulty::level(0), 3, 160, 160);
  FileBaseTracker base(seq.gt);
  DyTracker dy(f.net, base, 0.0);
  dy.init(seq.frames[0], seq.gt[0]);
  const FrameOutput out = dy.track(seq.frames[1], seq.gt[0], 1);
  REQUIRE(out.decision.has_value());
  CHECK(out.decision->route == Route::route1);
  const Crop c = crop_resize(seq.frames[1], seq.gt[0], kSearchFactor, f.config.search_size);
  const TensorF zg = f.net.embed(normalize_image(crop_resize(seq.frames[0], seq.gt[0], kTemplateFactor,
                                                             f.config.template_size).patch));
  const Box expected = map_box_to_frame(f.net.forward_route1(zg, normalize_image(c.patch)).box, c.mapping);
  CHECK(test::bit_equal(out.box, expected));
}

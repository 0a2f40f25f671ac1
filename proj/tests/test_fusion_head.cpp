// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numeric>

#include "hit/fusion_head.hpp"
#include "support.hpp"

using namespace hit;
using test::random_tensor;

namespace {

BridgeWeights random_bridge(Rng& rng, std::size_t c1, std::size_t c2, std::size_t c3) {
  BridgeWeights w;
  w.up_min = {random_tensor<float>(rng, {2, 2, c3, c2}, 0.3), random_tensor<float>(rng, {c2}, 0.1)};
  w.up_mid = {random_tensor<float>(rng, {2, 2, c2, c1}, 0.3), random_tensor<float>(rng, {c1}, 0.1)};
  return w;
}

}  // namespace

TEST_CASE("zero upsamplers make the bridge the identity on S_max") {
  Rng rng(1);
  for (const char* v : {"toy", "small", "base"}) {
    const ModelConfig c = model_preset(v);
    const std::size_t h = c.search_size / 16;
    const TensorF s_max = random_tensor<float>(rng, {h, h, c.channels[0]});
    const TensorF s_mid = random_tensor<float>(rng, {h / 2, h / 2, c.channels[1]});
    const TensorF s_min = random_tensor<float>(rng, {h / 4, h / 4, c.channels[2]});
    const ModelParams zero = make_params(c);
    CHECK(test::bit_equal(bridge(s_max, s_mid, s_min, zero.bridge), s_max));
  }
}

TEST_CASE("bridge equals the stepwise sum") {
  Rng rng(2);
  const BridgeWeights w = random_bridge(rng, 4, 6, 8);
  const TensorF s_max = random_tensor<float>(rng, {8, 8, 4});
  const TensorF s_mid = random_tensor<float>(rng, {4, 4, 6});
  const TensorF s_min = random_tensor<float>(rng, {2, 2, 8});
  TensorF up1 = conv_transpose_2x(s_min, w.up_min.kernel, w.up_min.bias);
  for (std::size_t i = 0; i < up1.size(); ++i) up1[i] = up1[i] + s_mid[i];
  TensorF expected = conv_transpose_2x(up1, w.up_mid.kernel, w.up_mid.bias);
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] = expected[i] + s_max[i];
  CHECK(test::bit_equal(bridge(s_max, s_mid, s_min, w), expected));
  CHECK_THROWS_AS(bridge(s_max, TensorF({4, 4, 5}), s_min, w), ShapeError);
}

TEST_CASE("soft-argmax returns normalized pixel centers") {
  TensorF one_hot({4, 8});
  one_hot.at(1, 5) = 1.0f;
  Point2 p = soft_argmax(one_hot);
  CHECK(p.x == doctest::Approx(5.5 / 8));
  CHECK(p.y == doctest::Approx(1.5 / 4));

  const TensorF uniform({4, 4}, 1.0f / 16);
  p = soft_argmax(uniform);
  CHECK(p.x == doctest::Approx(0.5));
  CHECK(p.y == doctest::Approx(0.5));

  TensorF split({2, 2});
  split.at(0, 0) = 0.5f;
  split.at(1, 1) = 0.5f;
  p = soft_argmax(split);
  CHECK(p.x == doctest::Approx(0.5));

  CHECK_THROWS_AS(soft_argmax(TensorF({3, 3})), NumericError);
  CHECK_THROWS_AS(soft_argmax(TensorF({9})), ShapeError);
}

TEST_CASE("corner head outputs probability maps and boxes inside the unit square") {
  const ModelConfig c = test::toy();
  const ModelParams p = init_weights(c, 8);
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const TensorF o = random_tensor<float>(rng, {8, 8, c.channels[0]}, 2.0);
    const TensorF g = random_tensor<float>(rng, {c.channels[2]});
    const BoxPrediction pred = corner_head(o, g, p.head2);
    for (const TensorF* m : {&pred.tl_map, &pred.br_map}) {
      CHECK(m->shape() == Shape{8, 8});
      const auto d = m->data();
      CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    }
    for (double v : {pred.box.x0, pred.box.y0, pred.box.x1, pred.box.y1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    const TensorF attn = global_attention(o, g, p.head2);
    const auto d = attn.data();
    CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("Head1 uses the identity projection and rejects a channel mismatch") {
  const ModelConfig c = test::toy();
  const ModelParams p = init_weights(c, 8);
  CHECK(p.head1.projection.weight.empty());
  CHECK(p.head2.projection.weight.shape() == Shape{c.channels[2], c.channels[0]});
  const TensorF o({8, 8, c.channels[0]}, 0.1f);
  CHECK_NOTHROW(corner_head(o, TensorF({c.channels[0]}), p.head1));
  CHECK_THROWS_AS(corner_head(o, TensorF({c.channels[1]}), p.head1), ShapeError);
}

TEST_CASE("corner branches follow the halving channel schedule") {
  const ModelConfig c = test::toy();
  const ModelParams p = init_weights(c, 8);
  const auto ch = c.head_channels();
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(p.head1.top_left[i].kernel.shape() == Shape{3, 3, ch[i], ch[i + 1]});
    CHECK(p.head2.bottom_right[i].kernel.shape() == Shape{3, 3, ch[i], ch[i + 1]});
  }
}

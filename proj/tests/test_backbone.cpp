// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "hit/backbone.hpp"
#include "hit/routing.hpp"
#include "support.hpp"

using namespace hit;

namespace {

void check_shapes(const ModelConfig& c, const StageOutputs& out) {
  const std::size_t hs = c.search_size / 16;
  CHECK(out.s_max.shape() == Shape{hs, hs, c.channels[0]});
  CHECK(out.s_mid.shape() == Shape{hs / 2, hs / 2, c.channels[1]});
  CHECK(out.s_min.shape() == Shape{hs / 4, hs / 4, c.channels[2]});
  CHECK(out.g.shape() == Shape{c.channels[2]});
  CHECK(out.g1.shape() == Shape{c.channels[0]});
  CHECK(out.s1.shape() == Shape{c.stage_layout(0).tokens(), c.channels[0]});
  CHECK(out.s_max.all_finite());
  CHECK(out.s_min.all_finite());
}

}  // namespace

TEST_CASE("stage shapes follow the config for every preset") {
  for (const char* v : {"toy", "tiny", "small", "base"}) {
    INFO(v);
    const ModelConfig c = model_preset(v);
    const ModelParams p = init_weights(c, 3);
    const BackbonePlan plan = BackbonePlan::build(c, p.backbone);
    Rng rng(1);
    check_shapes(c, backbone_forward(test::random_image(rng, c.template_size),
                                     test::random_image(rng, c.search_size), p.backbone, plan));
  }
}

TEST_CASE("token counts drop 4x per shrink on the default sizes") {
  const ModelConfig c = model_preset("base");
  CHECK(c.stage_layout(0).tokens() == 320);
  CHECK(c.stage_layout(1).tokens() == 80);
  CHECK(c.stage_layout(2).tokens() == 20);
  CHECK(c.stage_layout(0).halved() == c.stage_layout(1));
}

TEST_CASE("two forwards on identical inputs are bit-identical") {
  const ModelConfig c = test::toy();
  const ModelParams p = init_weights(c, 9);
  const BackbonePlan plan = BackbonePlan::build(c, p.backbone);
  Rng rng(2);
  const TensorF z = test::random_image(rng, c.template_size), x = test::random_image(rng, c.search_size);
  const StageOutputs a = backbone_forward(z, x, p.backbone, plan);
  const StageOutputs b = backbone_forward(z, x, p.backbone, plan);
  CHECK(test::bit_equal(a.s_max, b.s_max));
  CHECK(test::bit_equal(a.s_mid, b.s_mid));
  CHECK(test::bit_equal(a.s_min, b.s_min));
  CHECK(test::bit_equal(a.g, b.g));
}

TEST_CASE("S_max is the search slice of the stage-1 tokens") {
  const ModelConfig c = test::toy();
  const ModelParams p = init_weights(c, 4);
  const BackbonePlan plan = BackbonePlan::build(c, p.backbone);
  Rng rng(3);
  const StageOutputs out = backbone_forward(test::random_image(rng, c.template_size),
                                            test::random_image(rng, c.search_size), p.backbone, plan);
  const TokenLayout l = plan.layouts[0];
  const std::size_t ch = c.channels[0];
  for (std::size_t t = 0; t < l.search.count(); ++t)
    for (std::size_t k = 0; k < ch; ++k) CHECK(out.s_max[t * ch + k] == out.s1.at(l.search_offset() + t, k));
  // The global vector is the plain mean of those rows.
  for (std::size_t k = 0; k < ch; ++k) {
    float s = 0;
    for (std::size_t t = 0; t < l.search.count(); ++t) s += out.s_max[t * ch + k];
    CHECK(out.g1[k] == s / static_cast<float>(l.search.count()));
  }
}

TEST_CASE("patch embedding reduces each side by 16") {
  const ModelConfig c = test::toy();
  const ModelParams p = init_weights(c, 1);
  const TensorF y = patch_embed(TensorF({64, 32, 3}, 0.5f), p.backbone.embed);
  CHECK(y.shape() == Shape{4, 2, c.channels[0]});
  CHECK_THROWS_AS(patch_embed(TensorF({40, 32, 3}), p.backbone.embed), ShapeError);
  CHECK_THROWS_AS(patch_embed(TensorF({32, 32, 1}), p.backbone.embed), ShapeError);
}

TEST_CASE("mismatched grids and tokens are rejected") {
  const ModelConfig c = test::toy();
  const ModelParams p = init_weights(c, 1);
  const BackbonePlan plan = BackbonePlan::build(c, p.backbone);
  CHECK_THROWS_AS(run_stage1(TensorF({4, 4, 32}), TensorF({4, 4, 32}), p.backbone, plan), ShapeError);
  CHECK_THROWS_AS(concat_tokens(TensorF({2, 2, 3}), TensorF({2, 2, 4})), ShapeError);
  CHECK_THROWS_AS(extract_search(TensorF({7, 3}), plan.layouts[0]), ShapeError);
}

TEST_CASE("config validation names the broken constraint") {
  ModelConfig c = test::toy();
  c.channels = {64, 48, 80};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("increase"), UsageError);
  c = test::toy();
  c.search_size = 96;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("multiples of 64"), UsageError);
  CHECK_THROWS_AS(model_preset("huge"), UsageError);
  CHECK_THROWS_AS(HitNetwork(c, make_params(test::toy())), UsageError);
}

TEST_CASE("settings override presets and report bad lines") {
  const Settings s = Settings::parse("variant = toy\n# comment\nchannels = 32, 64, 96 # trailing\nkey_dim=4\n");
  const ModelConfig c = config_from_settings(s);
  CHECK(c.variant == "toy");
  CHECK(c.channels == std::array<std::size_t, 3>{32, 64, 96});
  CHECK(c.key_dim == 4);
  CHECK(c.search_size == 128);
  CHECK_THROWS_WITH_AS(Settings::parse("a = 1\nbroken\n", "cfg"), doctest::Contains("cfg:2"), UsageError);
  CHECK_THROWS_AS(config_from_settings(Settings::parse("variant = toy\nblocks = 1,2\n")), UsageError);
}

TEST_CASE("initialization is seeded and fan-in bounded") {
  const ModelConfig c = test::toy();
  const ModelParams a = init_weights(c, 5), b = init_weights(c, 5), d = init_weights(c, 6);
  CHECK(a.backbone.embed.convs[1].kernel == b.backbone.embed.convs[1].kernel);
  CHECK_FALSE(a.backbone.embed.convs[1].kernel == d.backbone.embed.convs[1].kernel);
  const TensorF& k = a.backbone.embed.convs[1].kernel;
  const double bound = 1.0 / std::sqrt(static_cast<double>(9 * k.dim(2)));
  for (float v : k.data()) CHECK(std::abs(v) <= bound);
  CHECK(parameter_count(a) == parameter_count(make_params(c)));
}

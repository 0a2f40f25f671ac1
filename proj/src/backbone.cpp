// SPDX-License-Identifier: Apache-2.0
#include "hit/backbone.hpp"

#include <string>

namespace hit {

BackbonePlan BackbonePlan::build(const ModelConfig& config, const BackboneParams& params) {
  BackbonePlan plan;
  for (std::size_t s = 0; s < 3; ++s) {
    plan.layouts[s] = config.stage_layout(s);
    const CoordMap coords =
        assign_dual_coords(plan.layouts[s].templ, plan.layouts[s].search, config.arrangement);
    const BiasIndex full = build_bias_index(coords);
    for (const auto& blk : params.stages[s]) {
      plan.block_bias[s].push_back(gather_bias(blk.bias_table, full));
    }
    if (s < 2) {
      const std::vector<Coord> q = subsample_coords(coords);
      const BiasIndex shrink = build_bias_index(q, coords.coords);
      plan.shrink_bias[s] = gather_bias(params.shrinks[s].bias_table, shrink);
    }
  }
  return plan;
}

TensorF patch_embed(const TensorF& image, const PatchEmbedParams& params) {
  detail::require_rank(image.shape(), 3, "patch_embed");
  if (image.dim(0) % 16 != 0 || image.dim(1) % 16 != 0 || image.dim(0) == 0 ||
      image.dim(1) == 0) {
    throw ShapeError("patch_embed: image " + shape_string(image.shape()) +
                     " is not divisible by 16");
  }
  if (image.dim(2) != 3) throw ShapeError("patch_embed: expected 3 channels");
  TensorF x = conv3x3(image, params.convs[0].kernel, params.convs[0].bias, 2);
  for (std::size_t i = 1; i < 4; ++i) {
    x = conv3x3(hardswish(std::move(x)), params.convs[i].kernel, params.convs[i].bias, 2);
  }
  return x;
}

TensorF concat_tokens(const TensorF& templ_grid, const TensorF& search_grid) {
  detail::require_rank(templ_grid.shape(), 3, "concat_tokens template");
  detail::require_rank(search_grid.shape(), 3, "concat_tokens search");
  const std::size_t c = templ_grid.dim(2);
  if (search_grid.dim(2) != c) throw ShapeError("concat_tokens: channel mismatch");
  const std::size_t nt = templ_grid.dim(0) * templ_grid.dim(1);
  const std::size_t ns = search_grid.dim(0) * search_grid.dim(1);
  std::vector<float> data;
  data.reserve((nt + ns) * c);
  data.insert(data.end(), templ_grid.data().begin(), templ_grid.data().end());
  data.insert(data.end(), search_grid.data().begin(), search_grid.data().end());
  return TensorF({nt + ns, c}, std::move(data));
}

TensorF extract_search(const TensorF& tokens, const TokenLayout& layout) {
  detail::require_rank(tokens.shape(), 2, "extract_search");
  if (tokens.dim(0) != layout.tokens()) {
    throw ShapeError("extract_search: " + std::to_string(tokens.dim(0)) +
                     " tokens for a layout of " + std::to_string(layout.tokens()));
  }
  const std::size_t c = tokens.dim(1);
  const auto first = tokens.data().begin() +
                     static_cast<std::ptrdiff_t>(layout.search_offset() * c);
  std::vector<float> data(first, tokens.data().end());
  return TensorF({layout.search.rows, layout.search.cols, c}, std::move(data));
}

TensorF global_vector(const TensorF& tokens, const TokenLayout& layout) {
  const TensorF grid = extract_search(tokens, layout);
  return mean_rows(grid.reshaped({layout.search.count(), grid.dim(2)}));
}

namespace {

TensorF run_blocks(TensorF x, const std::vector<BlockParams>& blocks,
                   const std::vector<TensorF>& bias) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    x = transformer_block(x, blocks[b].weights, bias[b]);
  }
  return x;
}

}  // namespace

StageOneOutputs run_stage1(const TensorF& templ_grid, const TensorF& search_grid,
                           const BackboneParams& params, const BackbonePlan& plan) {
  const TokenLayout& layout = plan.layouts[0];
  if (templ_grid.dim(0) != layout.templ.rows || templ_grid.dim(1) != layout.templ.cols ||
      search_grid.dim(0) != layout.search.rows || search_grid.dim(1) != layout.search.cols) {
    throw ShapeError("run_stage1: token grids do not match the configured input sizes");
  }
  mac::ModuleScope scope("stage1");
  StageOneOutputs out;
  out.s1 = run_blocks(concat_tokens(templ_grid, search_grid), params.stages[0],
                      plan.block_bias[0]);
  out.s_max = extract_search(out.s1, layout);
  out.g1 = global_vector(out.s1, layout);
  return out;
}

StageOutputs run_deep_stages(StageOneOutputs first, const BackboneParams& params,
                             const BackbonePlan& plan) {
  StageOutputs out;
  TensorF x;
  {
    mac::ModuleScope scope("shrink1");
    x = shrink_attention(first.s1, plan.layouts[0], params.shrinks[0].weights,
                         plan.shrink_bias[0]);
  }
  {
    mac::ModuleScope scope("stage2");
    x = run_blocks(std::move(x), params.stages[1], plan.block_bias[1]);
    out.s_mid = extract_search(x, plan.layouts[1]);
  }
  {
    mac::ModuleScope scope("shrink2");
    x = shrink_attention(x, plan.layouts[1], params.shrinks[1].weights, plan.shrink_bias[1]);
  }
  {
    mac::ModuleScope scope("stage3");
    x = run_blocks(std::move(x), params.stages[2], plan.block_bias[2]);
    out.s_min = extract_search(x, plan.layouts[2]);
    out.g = global_vector(x, plan.layouts[2]);
  }
  out.s1 = std::move(first.s1);
  out.s_max = std::move(first.s_max);
  out.g1 = std::move(first.g1);
  return out;
}

StageOutputs backbone_forward(const TensorF& templ_image, const TensorF& search_image,
                              const BackboneParams& params, const BackbonePlan& plan) {
  TensorF zt, xs;
  {
    mac::ModuleScope scope("embed");
    zt = patch_embed(templ_image, params.embed);
    xs = patch_embed(search_image, params.embed);
  }
  return run_deep_stages(run_stage1(zt, xs, params, plan), params, plan);
}

}  // namespace hit

// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical one-stream backbone: a 16× patch embedding of both images,
// then three stages of transformer blocks over the concatenated template and
// search tokens, joined by shrink attention.
#pragma once

#include <array>
#include <vector>

#include "hit/config.hpp"
#include "hit/params.hpp"

namespace hit {

/// Everything the backbone derives once from config and weights: per-stage
/// layouts and the gathered attention bias of every layer.
struct BackbonePlan {
  std::array<TokenLayout, 3> layouts;
  std::array<std::vector<TensorF>, 3> block_bias;  // [heads×N×N] per block
  std::array<TensorF, 2> shrink_bias;              // [heads×N/4×N]

  static BackbonePlan build(const ModelConfig& config, const BackboneParams& params);
};

struct StageOneOutputs {
  TensorF s1;     // all stage-1 tokens [N1×C1]
  TensorF s_max;  // search slice of s1 as a grid [Hs×Ws×C1]
  TensorF g1;     // mean of the stage-1 search tokens [C1]
};

struct StageOutputs {
  TensorF s1;
  TensorF s_max;  // [H/16 × W/16 × C1]
  TensorF s_mid;  // [H/32 × W/32 × C2]
  TensorF s_min;  // [H/64 × W/64 × C3]
  TensorF g;      // mean of final-stage search tokens [C3]
  TensorF g1;
};

/// Four stride-2 3×3 convolutions with hardswish between them.
/// image [H×W×3] → [H/16 × W/16 × C1].
TensorF patch_embed(const TensorF& image, const PatchEmbedParams& params);

/// Template grid then search grid, each flattened row-major, as [N×C].
TensorF concat_tokens(const TensorF& templ_grid, const TensorF& search_grid);

/// Search-region tokens reshaped to their [Hs×Ws×C] grid.
TensorF extract_search(const TensorF& tokens, const TokenLayout& layout);

/// Arithmetic mean over the search-region tokens, [C].
TensorF global_vector(const TensorF& tokens, const TokenLayout& layout);

StageOneOutputs run_stage1(const TensorF& templ_grid, const TensorF& search_grid,
                           const BackboneParams& params, const BackbonePlan& plan);

/// Shrink → stage 2 → shrink → stage 3 on top of a stage-1 result.
StageOutputs run_deep_stages(StageOneOutputs first, const BackboneParams& params,
                             const BackbonePlan& plan);

StageOutputs backbone_forward(const TensorF& templ_image, const TensorF& search_image,
                              const BackboneParams& params, const BackbonePlan& plan);

}  // namespace hit

// SPDX-License-Identifier: Apache-2.0
//
// Bridge module and corner prediction head.
#pragma once

#include "hit/box.hpp"
#include "hit/params.hpp"

namespace hit {

/// O = S_max + up(S_mid + up(S_min)), each `up` a stride-2 transposed conv.
TensorF bridge(const TensorF& s_max, const TensorF& s_mid, const TensorF& s_min,
               const BridgeWeights& w);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Expected pixel-center position under a probability map [H×W], normalized
/// to [0,1]. Maps that do not sum to one are renormalized with a warning on
/// stderr.
Point2 soft_argmax(const TensorF& heatmap);

struct BoxPrediction {
  Box box;          // normalized crop coordinates
  TensorF tl_map;   // [H×W] top-left corner probabilities
  TensorF br_map;   // [H×W] bottom-right corner probabilities
};

/// Softmax over pixels of ⟨proj(g), O[p]⟩/√C, as [H×W].
TensorF global_attention(const TensorF& features, const TensorF& global,
                         const HeadParams& head);

/// Four 3×3 convolutions (hardswish between) ending in a single logit map [H×W].
TensorF corner_branch(const TensorF& features, const std::array<ConvParams, 4>& convs);

/// Re-weights `features` [H×W×C] by the global attention map, runs both corner
/// branches, and reads each corner off its spatial softmax with soft-argmax.
BoxPrediction corner_head(const TensorF& features, const TensorF& global,
                          const HeadParams& head);

}  // namespace hit

// SPDX-License-Identifier: Apache-2.0
#include "hit/fusion_head.hpp"

#include <cmath>
#include <iostream>

namespace hit {

TensorF bridge(const TensorF& s_max, const TensorF& s_mid, const TensorF& s_min,
               const BridgeWeights& w) {
  TensorF mid = conv_transpose_2x(s_min, w.up_min.kernel, w.up_min.bias);
  add_inplace(mid, s_mid);
  TensorF out = conv_transpose_2x(mid, w.up_mid.kernel, w.up_mid.bias);
  add_inplace(out, s_max);
  return out;
}

Point2 soft_argmax(const TensorF& heatmap) {
  detail::require_rank(heatmap.shape(), 2, "soft_argmax");
  const std::size_t h = heatmap.dim(0), w = heatmap.dim(1);
  double total = 0.0;
  for (float p : heatmap.data()) total += p;
  if (!(total > 0.0)) throw NumericError("soft_argmax: heatmap has no mass");
  if (std::abs(total - 1.0) > 1e-4) {
    std::cerr << "warning: soft_argmax input sums to " << total << "; renormalizing\n";
  }
  double sx = 0.0, sy = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double p = heatmap.at(r, c) / total;
      sx += p * (static_cast<double>(c) + 0.5) / static_cast<double>(w);
      sy += p * (static_cast<double>(r) + 0.5) / static_cast<double>(h);
    }
  }
  return {sx, sy};
}

TensorF global_attention(const TensorF& features, const TensorF& global,
                         const HeadParams& head) {
  detail::require_rank(features.shape(), 3, "global_attention");
  const std::size_t h = features.dim(0), w = features.dim(1), c = features.dim(2);
  TensorF g = global.reshaped({1, global.size()});
  if (!head.projection.weight.empty()) {
    g = linear(g, head.projection.weight, head.projection.bias);
  }
  if (g.dim(1) != c) {
    throw ShapeError("corner_head: global vector has " + std::to_string(g.dim(1)) +
                     " channels, features have " + std::to_string(c));
  }
  TensorF sim = matmul(features.reshaped({h * w, c}), g.reshaped({c, 1}));
  const float scale = 1.0f / std::sqrt(static_cast<float>(c));
  for (auto& v : sim.data()) v *= scale;
  softmax_inplace(sim.data());
  return std::move(sim).reshaped({h, w});
}

TensorF corner_branch(const TensorF& features, const std::array<ConvParams, 4>& convs) {
  TensorF x = conv3x3(features, convs[0].kernel, convs[0].bias, 1);
  for (std::size_t i = 1; i < 4; ++i) {
    x = conv3x3(hardswish(std::move(x)), convs[i].kernel, convs[i].bias, 1);
  }
  return std::move(x).reshaped({x.dim(0), x.dim(1)});
}

BoxPrediction corner_head(const TensorF& features, const TensorF& global,
                          const HeadParams& head) {
  const TensorF attn = global_attention(features, global, head);
  const std::size_t h = features.dim(0), w = features.dim(1);
  TensorF weighted = features;
  for (std::size_t p = 0; p < h * w; ++p) {
    const float a = attn[p];
    for (auto& v : weighted.row(p)) v *= a;
  }

  BoxPrediction out;
  out.tl_map = softmax_rows(corner_branch(weighted, head.top_left).reshaped({1, h * w}))
                   .reshaped({h, w});
  out.br_map = softmax_rows(corner_branch(weighted, head.bottom_right).reshaped({1, h * w}))
                   .reshaped({h, w});
  const Point2 tl = soft_argmax(out.tl_map);
  const Point2 br = soft_argmax(out.br_map);
  out.box = {tl.x, tl.y, br.x, br.y};
  return out;
}

}  // namespace hit

// SPDX-License-Identifier: Apache-2.0
//
// The assembled network and its early-exit dispatch.
//
// Route1 stops after stage 1 and predicts from the stage-1 search features
// with Head1. Route2 runs the remaining stages, the bridge and Head2. A
// three-layer router scores every stage-1 search token; the scene score F is
// the mean of the scores above the foreground threshold, and Route1 is taken
// iff F > T.
#pragma once

#include <span>

#include "hit/backbone.hpp"
#include "hit/fusion_head.hpp"

namespace hit {

enum class Route { route1, route2 };

std::string_view route_name(Route r);

/// Route1 iff f > threshold; a tie goes to the full model.
constexpr Route choose_route(double f, double threshold) noexcept {
  return f > threshold ? Route::route1 : Route::route2;
}

struct RouterScores {
  TensorF scores;  // [H×W] per-token sigmoid scores
  double f = 0.0;
  bool fallback = false;  // no token above the foreground threshold
};

/// Mean of the scores strictly above `fg_threshold`; the mean of all scores
/// (and `fallback` set) when none qualify.
double aggregate_scores(std::span<const float> scores, double fg_threshold, bool& fallback);

/// Per-token router scores over s_max [H×W×C1].
TensorF router_forward(const TensorF& s_max, const RouterWeights& w);

RouterScores router_score(const TensorF& s_max, const RouterWeights& w, double fg_threshold);

struct RouteDecision {
  TensorF score_map;
  double f = 0.0;
  double threshold = 0.0;
  Route route = Route::route2;
  bool fallback = false;
};

struct DyHitResult {
  BoxPrediction prediction;
  RouteDecision decision;
};

/// Config, weights and the derived backbone plan. Immutable after
/// construction except for swapping in a fitted router.
class HitNetwork {
 public:
  HitNetwork(ModelConfig config, ModelParams params);

  const ModelConfig& config() const noexcept { return config_; }
  const ModelParams& params() const noexcept { return params_; }
  const BackbonePlan& plan() const noexcept { return plan_; }
  void set_router(RouterWeights router);

  /// Patch embedding of one (already normalized) image.
  TensorF embed(const TensorF& image) const;
  StageOneOutputs stage1(const TensorF& templ_grid, const TensorF& search_grid) const;
  RouterScores score(const StageOneOutputs& first) const;
  BoxPrediction head1(const StageOneOutputs& first) const;
  /// Stages 2–3, bridge and Head2.
  BoxPrediction route2(StageOneOutputs first) const;

  /// Plain HiT: every stage, bridge, Head2. No router.
  BoxPrediction forward_hit(const TensorF& templ_grid, const TensorF& search_image) const;
  /// Stage 1 and Head1 only. No router.
  BoxPrediction forward_route1(const TensorF& templ_grid, const TensorF& search_image) const;
  DyHitResult forward_dyhit(const TensorF& templ_grid, const TensorF& search_image,
                            double threshold) const;

 private:
  ModelConfig config_;
  ModelParams params_;
  BackbonePlan plan_;
};

/// Full image-pair DyHiT forward (embeds the template too). 0 ≤ T ≤ 1.
DyHitResult dyhit_forward(const HitNetwork& net, const TensorF& templ_image,
                          const TensorF& search_image, double threshold);

/// Full image-pair HiT forward.
BoxPrediction hit_forward(const HitNetwork& net, const TensorF& templ_image,
                          const TensorF& search_image);

}  // namespace hit

// SPDX-License-Identifier: Apache-2.0
#include "hit/routing.hpp"

namespace hit {

std::string_view route_name(Route r) { return r == Route::route1 ? "route1" : "route2"; }

double aggregate_scores(std::span<const float> scores, double fg_threshold, bool& fallback) {
  if (scores.empty()) throw ShapeError("aggregate_scores: no scores");
  double fg_sum = 0.0, all_sum = 0.0;
  std::size_t fg_count = 0;
  for (float s : scores) {
    all_sum += s;
    if (s > fg_threshold) {
      fg_sum += s;
      ++fg_count;
    }
  }
  fallback = fg_count == 0;
  return fallback ? all_sum / static_cast<double>(scores.size())
                  : fg_sum / static_cast<double>(fg_count);
}

TensorF router_forward(const TensorF& s_max, const RouterWeights& w) {
  detail::require_rank(s_max.shape(), 3, "router");
  const std::size_t h = s_max.dim(0), wd = s_max.dim(1), c = s_max.dim(2);
  if (w.l1.weight.dim(0) != c) {
    throw ShapeError("router expects " + std::to_string(w.l1.weight.dim(0)) +
                     " channels, features have " + std::to_string(c));
  }
  TensorF x = s_max.reshaped({h * wd, c});
  x = hardswish(linear(x, w.l1.weight, w.l1.bias));
  x = hardswish(linear(x, w.l2.weight, w.l2.bias));
  x = linear(x, w.l3.weight, w.l3.bias);
  for (auto& v : x.data()) v = sigmoid(v);
  return std::move(x).reshaped({h, wd});
}

RouterScores router_score(const TensorF& s_max, const RouterWeights& w, double fg_threshold) {
  RouterScores out;
  out.scores = router_forward(s_max, w);
  out.f = aggregate_scores(out.scores.data(), fg_threshold, out.fallback);
  return out;
}

HitNetwork::HitNetwork(ModelConfig config, ModelParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  plan_ = BackbonePlan::build(config_, params_.backbone);
}

void HitNetwork::set_router(RouterWeights router) {
  if (router.l1.weight.rank() != 2 || router.l1.weight.dim(0) != config_.channels[0]) {
    throw ShapeError("set_router: router input width does not match C1");
  }
  params_.router = std::move(router);
}

TensorF HitNetwork::embed(const TensorF& image) const {
  mac::ModuleScope scope("embed");
  return patch_embed(image, params_.backbone.embed);
}

StageOneOutputs HitNetwork::stage1(const TensorF& templ_grid, const TensorF& search_grid) const {
  return run_stage1(templ_grid, search_grid, params_.backbone, plan_);
}

RouterScores HitNetwork::score(const StageOneOutputs& first) const {
  mac::ModuleScope scope("router");
  return router_score(first.s_max, params_.router, config_.fg_threshold);
}

BoxPrediction HitNetwork::head1(const StageOneOutputs& first) const {
  mac::ModuleScope scope("head1");
  return corner_head(first.s_max, first.g1, params_.head1);
}

BoxPrediction HitNetwork::route2(StageOneOutputs first) const {
  const StageOutputs st = run_deep_stages(std::move(first), params_.backbone, plan_);
  TensorF fused;
  {
    mac::ModuleScope scope("bridge");
    fused = bridge(st.s_max, st.s_mid, st.s_min, params_.bridge);
  }
  mac::ModuleScope scope("head2");
  return corner_head(fused, st.g, params_.head2);
}

BoxPrediction HitNetwork::forward_hit(const TensorF& templ_grid,
                                      const TensorF& search_image) const {
  return route2(stage1(templ_grid, embed(search_image)));
}

BoxPrediction HitNetwork::forward_route1(const TensorF& templ_grid,
                                         const TensorF& search_image) const {
  return head1(stage1(templ_grid, embed(search_image)));
}

DyHitResult HitNetwork::forward_dyhit(const TensorF& templ_grid, const TensorF& search_image,
                                      double threshold) const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw UsageError("dyhit: threshold must lie in [0, 1]");
  }
  StageOneOutputs first = stage1(templ_grid, embed(search_image));
  RouterScores rs = score(first);
  DyHitResult out;
  out.decision.f = rs.f;
  out.decision.threshold = threshold;
  out.decision.fallback = rs.fallback;
  out.decision.route = choose_route(rs.f, threshold);
  out.decision.score_map = std::move(rs.scores);
  out.prediction = out.decision.route == Route::route1 ? head1(first) : route2(std::move(first));
  return out;
}

DyHitResult dyhit_forward(const HitNetwork& net, const TensorF& templ_image,
                          const TensorF& search_image, double threshold) {
  return net.forward_dyhit(net.embed(templ_image), search_image, threshold);
}

BoxPrediction hit_forward(const HitNetwork& net, const TensorF& templ_image,
                          const TensorF& search_image) {
  return net.forward_hit(net.embed(templ_image), search_image);
}

}  // namespace hit

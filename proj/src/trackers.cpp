// SPDX-License-Identifier: Apache-2.0
#include "hit/trackers.hpp"

#include <chrono>
#include <cmath>

#include "hit/io.hpp"

namespace hit {

OracleBaseTracker::OracleBaseTracker(std::vector<Box> gt, double noise_scale, std::uint64_t seed)
    : gt_(std::move(gt)), noise_(noise_scale), seed_(seed) {
  if (!(noise_scale >= 0.0)) throw UsageError("oracle noise scale must be non-negative");
}

Box OracleBaseTracker::jitter(const Box& gt, double noise_scale, std::uint64_t seed,
                              std::size_t index) {
  if (noise_scale == 0.0) return gt;
  Rng rng(seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1)));
  const double w = gt.width(), h = gt.height();
  const double cx = gt.center_x() + noise_scale * w * rng.normal();
  const double cy = gt.center_y() + noise_scale * h * rng.normal();
  const double nw = w * std::exp(noise_scale * rng.normal());
  const double nh = h * std::exp(noise_scale * rng.normal());
  return Box::from_center(cx, cy, nw, nh);
}

void OracleBaseTracker::init(const Image&, const Box&) { ready_ = true; }

Box OracleBaseTracker::predict(const Image&, const Box&, std::size_t index) {
  if (!ready_) throw UsageError("base tracker used before init");
  if (index >= gt_.size()) {
    throw DataError("oracle has no ground truth for frame " + std::to_string(index));
  }
  return jitter(gt_[index], noise_, seed_, index);
}

FileBaseTracker::FileBaseTracker(const std::filesystem::path& path)
    : boxes_(read_boxes(path)) {}

FileBaseTracker::FileBaseTracker(std::vector<Box> boxes) : boxes_(std::move(boxes)) {}

void FileBaseTracker::init(const Image&, const Box&) { ready_ = true; }

Box FileBaseTracker::predict(const Image&, const Box&, std::size_t index) {
  if (!ready_) throw UsageError("base tracker used before init");
  if (index >= boxes_.size()) {
    throw DataError("results file has " + std::to_string(boxes_.size()) +
                    " boxes, no entry for frame " + std::to_string(index));
  }
  return boxes_[index];
}

DyTracker::DyTracker(const HitNetwork& net, BaseTracker& base, double threshold)
    : net_(net), base_(base), threshold_(threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw UsageError("threshold must lie in [0, 1]");
}

void DyTracker::init(const Image& frame, const Box& box) {
  const Crop c = crop_resize(frame, box, kTemplateFactor, net_.config().template_size);
  templ_grid_ = net_.embed(normalize_image(c.patch));
  base_.init(frame, box);
  if (route1_override_) route1_override_->init(frame, box);
}

FrameOutput DyTracker::track(const Image& frame, const Box& reference, std::size_t index) {
  if (templ_grid_.empty()) throw UsageError("tracker used before init");
  const Crop c = crop_resize(frame, reference, kSearchFactor, net_.config().search_size);
  const Image search = normalize_image(c.patch);

  const auto start = std::chrono::steady_clock::now();
  const StageOneOutputs first = net_.stage1(templ_grid_, net_.embed(search));
  RouterScores rs = net_.score(first);

  FrameOutput out;
  RouteDecision d;
  d.f = rs.f;
  d.threshold = threshold_;
  d.fallback = rs.fallback;
  d.route = choose_route(rs.f, threshold_);
  d.score_map = std::move(rs.scores);
  if (d.route == Route::route1) {
    out.box = route1_override_ ? route1_override_->predict(frame, reference, index)
                               : map_box_to_frame(net_.head1(first).box, c.mapping);
  } else {
    out.box = base_.predict(frame, reference, index);
  }
  out.forward_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start).count();
  out.decision = std::move(d);
  return out;
}

}  // namespace hit

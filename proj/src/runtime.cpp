// SPDX-License-Identifier: Apache-2.0
#include "hit/runtime.hpp"

#include <array>
#include <chrono>
#include <cmath>

namespace hit {

namespace {

std::array<double, 3> channel_means(const Image& frame) {
  std::array<double, 3> sum{};
  const std::size_t n = frame.dim(0) * frame.dim(1);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c = 0; c < 3; ++c) sum[c] += frame[p * 3 + c];
  }
  for (auto& s : sum) s /= static_cast<double>(n);
  return sum;
}

void require_frame(const Image& frame) {
  detail::require_rank(frame.shape(), 3, "frame");
  if (frame.dim(2) != 3 || frame.dim(0) == 0 || frame.dim(1) == 0) {
    throw ShapeError("frame must be a non-empty H×W×3 image, got " + shape_string(frame.shape()));
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

Crop crop_resize(const Image& frame, const Box& box, double factor, std::size_t out_size) {
  require_frame(frame);
  if (!(box.width() > 0.0 && box.height() > 0.0)) {
    throw DataError("crop_resize: box has zero area");
  }
  if (out_size == 0 || !(factor > 0.0)) throw UsageError("crop_resize: bad factor or size");
  const std::size_t fh = frame.dim(0), fw = frame.dim(1);
  const std::array<double, 3> mean = channel_means(frame);

  Crop out;
  out.mapping = {box.center_x(), box.center_y(), factor * std::sqrt(box.width() * box.height()),
                 out_size};
  const CropMapping& m = out.mapping;
  out.patch = Image({out_size, out_size, 3});
  const double step = m.side / static_cast<double>(out_size);

  auto inside = [&](long r, long c) {
    return r >= 0 && c >= 0 && r < static_cast<long>(fh) && c < static_cast<long>(fw);
  };
  for (std::size_t i = 0; i < out_size; ++i) {
    // Sample position in frame pixel-index space (pixel k covers [k, k+1)).
    const double sy = m.y0() + (static_cast<double>(i) + 0.5) * step - 0.5;
    const long r0 = static_cast<long>(std::floor(sy));
    const double fy = sy - static_cast<double>(r0);
    for (std::size_t j = 0; j < out_size; ++j) {
      const double sx = m.x0() + (static_cast<double>(j) + 0.5) * step - 0.5;
      const long c0 = static_cast<long>(std::floor(sx));
      const double fx = sx - static_cast<double>(c0);
      const bool any = inside(r0, c0) || inside(r0, c0 + 1) || inside(r0 + 1, c0) ||
                       inside(r0 + 1, c0 + 1);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double v;
        if (!any) {
          v = mean[ch];
        } else {
          auto tap = [&](long r, long c) {
            return inside(r, c) ? static_cast<double>(
                                      frame[(static_cast<std::size_t>(r) * fw +
                                             static_cast<std::size_t>(c)) * 3 + ch])
                                : mean[ch];
          };
          const double top = tap(r0, c0) * (1.0 - fx) + tap(r0, c0 + 1) * fx;
          const double bot = tap(r0 + 1, c0) * (1.0 - fx) + tap(r0 + 1, c0 + 1) * fx;
          v = top * (1.0 - fy) + bot * fy;
        }
        out.patch[(i * out_size + j) * 3 + ch] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Box map_box_to_frame(const Box& b, const CropMapping& m) {
  return {m.x0() + b.x0 * m.side, m.y0() + b.y0 * m.side, m.x0() + b.x1 * m.side,
          m.y0() + b.y1 * m.side};
}

Box map_box_to_crop(const Box& b, const CropMapping& m) {
  return {(b.x0 - m.x0()) / m.side, (b.y0 - m.y0()) / m.side, (b.x1 - m.x0()) / m.side,
          (b.y1 - m.y0()) / m.side};
}

Image normalize_image(const Image& img) {
  static constexpr std::array<float, 3> kMean{0.485f, 0.456f, 0.406f};
  static constexpr std::array<float, 3> kStd{0.229f, 0.224f, 0.225f};
  require_frame(img);
  Image out = img;
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (d[i] - kMean[i % 3]) / kStd[i % 3];
  return out;
}

namespace {

// Crops need a positive-area reference inside the frame; raw outputs may be
// inverted or drift off-frame.
Box crop_reference(const Box& b, const Image& frame) {
  const double fw = static_cast<double>(frame.dim(1)), fh = static_cast<double>(frame.dim(0));
  const double w = std::max(std::abs(b.width()), 1.0);
  const double h = std::max(std::abs(b.height()), 1.0);
  double cx = b.center_x(), cy = b.center_y();
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h)) {
    throw NumericError("non-finite box");
  }
  cx = std::clamp(cx, 0.0, fw);
  cy = std::clamp(cy, 0.0, fh);
  return Box::from_center(cx, cy, std::min(w, fw), std::min(h, fh));
}

}  // namespace

TrackResult track_sequence(const std::vector<Image>& frames, const Box& init_box,
                           Tracker& tracker, const TrackOptions& options) {
  if (frames.empty()) throw DataError("track_sequence: no frames");
  if (!(init_box.width() > 0.0 && init_box.height() > 0.0)) {
    throw DataError("track_sequence: initial box has zero area");
  }
  if (options.reference && options.reference->size() < frames.size()) {
    throw DataError("track_sequence: reference trace shorter than the sequence");
  }
  TrackResult out;
  out.boxes.reserve(frames.size());
  out.boxes.push_back(init_box);
  std::size_t i = 0;
  try {
    tracker.init(frames[0], init_box);
    for (i = 1; i < frames.size(); ++i) {
      const Box& prev = options.reference ? (*options.reference)[i - 1] : out.boxes[i - 1];
      FrameOutput fo = tracker.track(frames[i], crop_reference(prev, frames[i]), i);
      out.boxes.push_back(fo.box);
      out.forward_ms.push_back(fo.forward_ms);
      if (fo.decision) out.decisions.push_back(std::move(*fo.decision));
    }
  } catch (const TrackingError&) {
    throw;
  } catch (const NumericError& e) {
    throw NumericError("frame " + std::to_string(i) + ": " + e.what());
  } catch (const std::exception& e) {
    throw TrackingError(i, e.what());
  }
  return out;
}

HitTracker::HitTracker(const HitNetwork& net, TrackerMode mode, double threshold,
                       std::size_t classify_every_n)
    : net_(net), mode_(mode), threshold_(threshold), every_n_(classify_every_n) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw UsageError("threshold must lie in [0, 1]");
  if (classify_every_n == 0) throw UsageError("classify_every_n must be at least 1");
}

void HitTracker::init(const Image& frame, const Box& box) {
  const Crop c = crop_resize(frame, box, kTemplateFactor, net_.config().template_size);
  templ_grid_ = net_.embed(normalize_image(c.patch));
  routed_ = 0;
  last_decision_ = {};
}

FrameOutput HitTracker::track(const Image& frame, const Box& reference, std::size_t) {
  if (templ_grid_.empty()) throw UsageError("tracker used before init");
  const Crop c = crop_resize(frame, reference, kSearchFactor, net_.config().search_size);
  const Image search = normalize_image(c.patch);

  FrameOutput out;
  BoxPrediction pred;
  const auto start = std::chrono::steady_clock::now();
  switch (mode_) {
    case TrackerMode::hit:
      pred = net_.forward_hit(templ_grid_, search);
      break;
    case TrackerMode::route1:
      pred = net_.forward_route1(templ_grid_, search);
      break;
    case TrackerMode::dyhit:
      if (routed_ % every_n_ == 0) {
        DyHitResult r = net_.forward_dyhit(templ_grid_, search, threshold_);
        pred = std::move(r.prediction);
        last_decision_ = r.decision;
        out.decision = std::move(r.decision);
      } else {
        StageOneOutputs first = net_.stage1(templ_grid_, net_.embed(search));
        pred = last_decision_.route == Route::route1 ? net_.head1(first)
                                                     : net_.route2(std::move(first));
        out.decision = last_decision_;
      }
      ++routed_;
      break;
  }
  out.forward_ms = elapsed_ms(start);
  out.box = map_box_to_frame(pred.box, c.mapping);
  return out;
}

}  // namespace hit

// SPDX-License-Identifier: Apache-2.0
//
// Inference protocol: context crops, crop-to-frame mapping, the per-frame
// tracking loop and the HiT/DyHiT trackers built on it.
#pragma once

#include <optional>
#include <vector>

#include "hit/box.hpp"
#include "hit/routing.hpp"

namespace hit {

/// Frames are [H×W×3] float tensors with values in [0, 1].
using Image = TensorF;

inline constexpr double kSearchFactor = 4.0;
inline constexpr double kTemplateFactor = 2.0;

/// Square crop window in frame pixels, resampled to `out_size`².
struct CropMapping {
  double center_x = 0.0;
  double center_y = 0.0;
  double side = 0.0;
  std::size_t out_size = 0;

  double x0() const noexcept { return center_x - 0.5 * side; }
  double y0() const noexcept { return center_y - 0.5 * side; }
};

struct Crop {
  Image patch;
  CropMapping mapping;
};

/// Square crop of side factor·√(w·h) around the box center, padded with the
/// per-channel frame mean, bilinearly resized (half-pixel centers).
Crop crop_resize(const Image& frame, const Box& box, double factor, std::size_t out_size);

/// Crop-normalized [0,1] box to frame pixels.
Box map_box_to_frame(const Box& box_in_crop, const CropMapping& m);
/// Frame-pixel box to crop-normalized coordinates.
Box map_box_to_crop(const Box& frame_box, const CropMapping& m);

/// Per-channel mean/std normalization applied before patch embedding.
Image normalize_image(const Image& img);

struct FrameOutput {
  Box box;
  std::optional<RouteDecision> decision;
  double forward_ms = 0.0;  // network or base-tracker time, crop excluded
};

class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual void init(const Image& frame, const Box& box) = 0;
  /// `reference` is the box the search crop is centered on.
  virtual FrameOutput track(const Image& frame, const Box& reference, std::size_t index) = 0;
};

struct TrackResult {
  std::vector<Box> boxes;                 // one per frame, boxes[0] == init box
  std::vector<RouteDecision> decisions;   // one per routed frame
  std::vector<double> forward_ms;         // frames 1..N-1
};

struct TrackOptions {
  /// When set, frame i is cropped around reference[i-1] instead of the
  /// previous output (fixed-trace evaluation).
  const std::vector<Box>* reference = nullptr;
};

/// Initializes on frame 0, then crops each later frame around the previous
/// output. Any failure is rethrown as TrackingError carrying the frame index;
/// numeric failures keep their type with the index prefixed.
TrackResult track_sequence(const std::vector<Image>& frames, const Box& init_box,
                           Tracker& tracker, const TrackOptions& options = {});

enum class TrackerMode { hit, route1, dyhit };

/// HiT or DyHiT on a shared network. The template embedding is computed once
/// per sequence.
class HitTracker final : public Tracker {
 public:
  HitTracker(const HitNetwork& net, TrackerMode mode, double threshold = 0.5,
             std::size_t classify_every_n = 1);

  void init(const Image& frame, const Box& box) override;
  FrameOutput track(const Image& frame, const Box& reference, std::size_t index) override;

 private:
  const HitNetwork& net_;
  TrackerMode mode_;
  double threshold_;
  std::size_t every_n_;
  std::size_t routed_ = 0;
  RouteDecision last_decision_;  // reused between classifications
  TensorF templ_grid_;
};

}  // namespace hit

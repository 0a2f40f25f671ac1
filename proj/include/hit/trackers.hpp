// SPDX-License-Identifier: Apache-2.0
//
// Training-free DyTracker: Route1 and the router decide per frame whether
// the cheap prediction stands or a separate base tracker is consulted.
#pragma once

#include <filesystem>
#include <memory>
#include <string_view>

#include "hit/runtime.hpp"

namespace hit {

enum class LatencyClass { fast, slow };

/// A pluggable tracker consulted on hard frames. `init` must precede
/// `predict`. Instances are per-sequence and not thread-safe.
class BaseTracker {
 public:
  virtual ~BaseTracker() = default;
  virtual void init(const Image& frame, const Box& box) = 0;
  /// Frame-pixel prediction for frame `index`, given the crop reference.
  virtual Box predict(const Image& frame, const Box& reference, std::size_t index) = 0;
  virtual LatencyClass latency_class() const noexcept { return LatencyClass::slow; }
};

/// Ground truth jittered by a Gaussian seeded per (seed, frame):
/// cx += σ·w·n, cy += σ·h·n, w·exp(σ·n), h·exp(σ·n).
class OracleBaseTracker final : public BaseTracker {
 public:
  OracleBaseTracker(std::vector<Box> gt, double noise_scale, std::uint64_t seed);

  void init(const Image& frame, const Box& box) override;
  Box predict(const Image& frame, const Box& reference, std::size_t index) override;
  LatencyClass latency_class() const noexcept override { return LatencyClass::fast; }

  /// The deterministic jitter applied to frame `index`.
  static Box jitter(const Box& gt, double noise_scale, std::uint64_t seed, std::size_t index);

 private:
  std::vector<Box> gt_;
  double noise_;
  std::uint64_t seed_;
  bool ready_ = false;
};

/// Replays precomputed per-frame boxes ("x,y,w,h" lines, line 1 = frame 0).
class FileBaseTracker final : public BaseTracker {
 public:
  explicit FileBaseTracker(const std::filesystem::path& path);
  explicit FileBaseTracker(std::vector<Box> boxes);

  void init(const Image& frame, const Box& box) override;
  Box predict(const Image& frame, const Box& reference, std::size_t index) override;
  std::size_t size() const noexcept { return boxes_.size(); }

 private:
  std::vector<Box> boxes_;
  bool ready_ = false;
};

/// Route1 plus router gate a base tracker. Easy frames (F > T) emit the
/// Route1 box; hard frames emit the base tracker's box on the same frame.
/// Route1 features never reach the base tracker.
class DyTracker final : public Tracker {
 public:
  DyTracker(const HitNetwork& net, BaseTracker& base, double threshold);

  /// Replaces the Route1 box source while gating still runs on the real
  /// stage-1 features. Used to pair a known-quality Route1 with the router.
  void set_route1_override(BaseTracker* route1) noexcept { route1_override_ = route1; }

  void init(const Image& frame, const Box& box) override;
  FrameOutput track(const Image& frame, const Box& reference, std::size_t index) override;

 private:
  const HitNetwork& net_;
  BaseTracker& base_;
  BaseTracker* route1_override_ = nullptr;
  double threshold_;
  TensorF templ_grid_;
};

}  // namespace hit

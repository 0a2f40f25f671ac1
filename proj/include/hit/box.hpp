// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>

namespace hit {

/// Axis-aligned box by corners. Non-positive extents are allowed and count
/// as zero area.
struct Box {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  static Box from_xywh(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }
  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  double width() const noexcept { return x1 - x0; }
  double height() const noexcept { return y1 - y0; }
  double center_x() const noexcept { return 0.5 * (x0 + x1); }
  double center_y() const noexcept { return 0.5 * (y0 + y1); }
  double area() const noexcept {
    return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
  }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Intersection over union with extents clamped at zero. Returns 0 when the
/// union is empty.
inline double iou(const Box& a, const Box& b) noexcept {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace hit

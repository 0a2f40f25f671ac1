// SPDX-License-Identifier: Apache-2.0
#include "hit/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "hit/error.hpp"
#include "hit/params.hpp"

namespace hit {

Difficulty Difficulty::level(std::size_t k) {
  Difficulty d;
  d.distractors = k;
  d.clutter = std::min(1.0, 0.1 * static_cast<double>(k));
  d.motion = 0.01 * static_cast<double>(1 + k);
  d.blur = k >= 3;
  return d;
}

namespace {

using Rgb = std::array<float, 3>;

struct Mover {
  double cx, cy, w, h, vx = 0.0, vy = 0.0;
  Rgb color_a, color_b;

  Box box() const { return Box::from_center(cx, cy, w, h); }

  void step(Rng& rng, double motion, double fw, double fh) {
    vx = 0.8 * vx + motion * fw * rng.normal();
    vy = 0.8 * vy + motion * fh * rng.normal();
    cx += vx;
    cy += vy;
    // Reflect off the borders so the box stays inside the frame.
    const double lo_x = 0.5 * w, hi_x = fw - 0.5 * w, lo_y = 0.5 * h, hi_y = fh - 0.5 * h;
    if (cx < lo_x) { cx = lo_x + (lo_x - cx); vx = -vx; }
    if (cx > hi_x) { cx = hi_x - (cx - hi_x); vx = -vx; }
    if (cy < lo_y) { cy = lo_y + (lo_y - cy); vy = -vy; }
    if (cy > hi_y) { cy = hi_y - (cy - hi_y); vy = -vy; }
    cx = std::clamp(cx, lo_x, hi_x);
    cy = std::clamp(cy, lo_y, hi_y);
  }
};

Rgb random_color(Rng& rng) {
  return {static_cast<float>(rng.uniform(0.1, 0.9)), static_cast<float>(rng.uniform(0.1, 0.9)),
          static_cast<float>(rng.uniform(0.1, 0.9))};
}

Rgb perturb(const Rgb& c, Rng& rng, double amount) {
  Rgb out;
  for (std::size_t k = 0; k < 3; ++k) {
    out[k] = static_cast<float>(std::clamp(c[k] + amount * rng.normal(), 0.0, 1.0));
  }
  return out;
}

// Checkerboard-textured rectangle; cells are 1/4 of the box side.
void draw(TensorF& img, const Mover& m) {
  const long fh = static_cast<long>(img.dim(0)), fw = static_cast<long>(img.dim(1));
  const Box b = m.box();
  const long r0 = std::max(0L, static_cast<long>(std::lround(b.y0)));
  const long r1 = std::min(fh, static_cast<long>(std::lround(b.y1)));
  const long c0 = std::max(0L, static_cast<long>(std::lround(b.x0)));
  const long c1 = std::min(fw, static_cast<long>(std::lround(b.x1)));
  const double cell_w = std::max(1.0, m.w / 4.0), cell_h = std::max(1.0, m.h / 4.0);
  for (long r = r0; r < r1; ++r) {
    for (long c = c0; c < c1; ++c) {
      const long u = static_cast<long>((static_cast<double>(c) - b.x0) / cell_w);
      const long v = static_cast<long>((static_cast<double>(r) - b.y0) / cell_h);
      const Rgb& col = ((u + v) % 2 == 0) ? m.color_a : m.color_b;
      for (std::size_t k = 0; k < 3; ++k) {
        img[(static_cast<std::size_t>(r) * img.dim(1) + static_cast<std::size_t>(c)) * 3 + k] =
            col[k];
      }
    }
  }
}

TensorF box_blur(const TensorF& img) {
  const std::size_t h = img.dim(0), w = img.dim(1);
  TensorF out(img.shape());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t k = 0; k < 3; ++k) {
        float sum = 0.0f;
        int n = 0;
        for (long dr = -1; dr <= 1; ++dr) {
          for (long dc = -1; dc <= 1; ++dc) {
            const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
            if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
            sum += img[(static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)) * 3 + k];
            ++n;
          }
        }
        out[(r * w + c) * 3 + k] = sum / static_cast<float>(n);
      }
    }
  }
  return out;
}

}  // namespace

SyntheticSequence gen_synthetic(std::uint64_t seed, const Difficulty& difficulty,
                                std::size_t length, std::size_t height, std::size_t width) {
  if (length == 0) throw UsageError("gen_synthetic: length must be at least 1");
  if (height < 16 || width < 16) throw UsageError("gen_synthetic: frame must be at least 16×16");
  Rng rng(seed);
  const double fh = static_cast<double>(height), fw = static_cast<double>(width);

  // Static background: a few random gratings per channel.
  TensorF background({height, width, 3});
  for (std::size_t k = 0; k < 3; ++k) {
    const double base = rng.uniform(0.35, 0.65);
    std::array<std::array<double, 4>, 3> gratings;
    for (auto& g : gratings) {
      g = {rng.uniform(0.5, 4.0) * 2.0 * std::numbers::pi / fw,
           rng.uniform(0.5, 4.0) * 2.0 * std::numbers::pi / fh, rng.uniform(0.0, 6.3),
           rng.uniform(0.03, 0.08)};
    }
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        double v = base;
        for (const auto& g : gratings) {
          v += g[3] * std::sin(g[0] * static_cast<double>(c) + g[1] * static_cast<double>(r) + g[2]);
        }
        v += difficulty.clutter * 0.25 * rng.normal();
        background[(r * width + c) * 3 + k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }

  auto spawn = [&](const Rgb& a, const Rgb& b, double scale) {
    Mover m;
    m.w = std::max(4.0, scale * rng.uniform(0.14, 0.24) * fw);
    m.h = std::max(4.0, scale * rng.uniform(0.14, 0.24) * fh);
    m.cx = rng.uniform(0.5 * m.w, fw - 0.5 * m.w);
    m.cy = rng.uniform(0.5 * m.h, fh - 0.5 * m.h);
    m.color_a = a;
    m.color_b = b;
    return m;
  };
  const Rgb ta = random_color(rng), tb = random_color(rng);
  Mover target = spawn(ta, tb, 1.0);
  std::vector<Mover> distractors;
  for (std::size_t i = 0; i < difficulty.distractors; ++i) {
    distractors.push_back(spawn(perturb(ta, rng, 0.05), perturb(tb, rng, 0.05), rng.uniform(0.8, 1.2)));
  }

  SyntheticSequence seq;
  seq.difficulty = difficulty;
  seq.seed = seed;
  seq.frames.reserve(length);
  seq.gt.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      target.step(rng, difficulty.motion, fw, fh);
      for (auto& d : distractors) d.step(rng, difficulty.motion, fw, fh);
    }
    TensorF frame = background;
    for (const auto& d : distractors) draw(frame, d);
    draw(frame, target);
    if (difficulty.clutter > 0.0) {
      for (auto& v : frame.data()) {
        v = static_cast<float>(std::clamp(v + 0.05 * difficulty.clutter * rng.normal(), 0.0, 1.0));
      }
    }
    if (difficulty.blur) frame = box_blur(frame);
    seq.frames.push_back(std::move(frame));
    seq.gt.push_back(target.box());
  }
  return seq;
}

std::vector<SyntheticSequence> make_mixed_suite(std::uint64_t seed, std::size_t count,
                                                std::size_t length, std::size_t side,
                                                std::size_t hard_level) {
  std::vector<SyntheticSequence> suite;
  suite.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Difficulty d = Difficulty::level(i % 2 == 0 ? 0 : hard_level);
    suite.push_back(gen_synthetic(seed + 1000003ull * i, d, length, side, side));
  }
  return suite;
}

}  // namespace hit

// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic tracking sequences: one textured target rectangle on a
// textured background, optionally with look-alike distractors and blur.
#pragma once

#include <cstdint>
#include <vector>

#include "hit/box.hpp"
#include "hit/tensor.hpp"

namespace hit {

struct Difficulty {
  std::size_t distractors = 0;
  double clutter = 0.0;  // background noise amplitude in [0, 1]
  double motion = 0.01;  // velocity noise, fraction of the frame side per frame
  bool blur = false;

  /// Level 0 is a clean scene; each level adds a distractor and more clutter
  /// and motion, with blur from level 3.
  static Difficulty level(std::size_t k);
};

struct SyntheticSequence {
  std::vector<TensorF> frames;  // [H×W×3] in [0, 1]
  std::vector<Box> gt;          // frame pixels, always inside the frame
  Difficulty difficulty;
  std::uint64_t seed = 0;
};

SyntheticSequence gen_synthetic(std::uint64_t seed, const Difficulty& difficulty,
                                std::size_t length, std::size_t height, std::size_t width);

/// `count` sequences alternating easy (level 0) and hard (`hard_level`).
std::vector<SyntheticSequence> make_mixed_suite(std::uint64_t seed, std::size_t count,
                                                std::size_t length, std::size_t side,
                                                std::size_t hard_level = 3);

}  // namespace hit

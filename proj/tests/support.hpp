// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>
#include <filesystem>
#include <string>

#include "hit/box.hpp"
#include "hit/config.hpp"
#include "hit/params.hpp"

namespace hit::test {

template <typename T>
Tensor<T> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(scale * rng.normal());
  return t;
}

inline TensorF random_image(Rng& rng, std::size_t side) {
  TensorF t({side, side, 3});
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

inline bool bit_equal(const Box& a, const Box& b) { return std::memcmp(&a, &b, sizeof(Box)) == 0; }

/// Box with extents in [min_side, min_side + span) anchored in [0, 1)².
inline Box random_box(Rng& rng, double min_side = 0.05, double span = 0.5) {
  const double x = rng.uniform(), y = rng.uniform();
  return {x, y, x + min_side + span * rng.uniform(), y + min_side + span * rng.uniform()};
}

/// Distinct scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("hit_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline ModelConfig toy() { return model_preset("toy"); }

}  // namespace hit::test

// SPDX-License-Identifier: Apache-2.0
//
// File formats: binary PPM frames, "x,y,w,h" box lists, router datasets.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hit/box.hpp"
#include "hit/tensor.hpp"

namespace hit {

/// Binary PPM (P6, maxval ≤ 255) to an [H×W×3] image in [0, 1].
TensorF read_ppm(const std::filesystem::path& path);
/// Values are clamped to [0, 1] and rounded to 8 bits.
void write_ppm(const std::filesystem::path& path, const TensorF& image);

/// Every *.ppm file in `dir`, in lexicographic order.
std::vector<TensorF> read_frame_dir(const std::filesystem::path& dir);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

/// One "x,y,w,h" line per frame. Blank lines are errors; `#` lines are skipped.
std::vector<Box> parse_boxes(const std::string& text, const std::string& origin);
std::vector<Box> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::filesystem::path& path, const std::vector<Box>& boxes);

/// Router training records: feature vector plus scalar target.
struct RouterDataset {
  std::size_t dim = 0;
  std::vector<float> features;  // count × dim, row-major
  std::vector<float> targets;   // count

  std::size_t size() const noexcept { return targets.size(); }
};

/// "HITR", u32 count, u32 dim, then count records of dim+1 little-endian f32.
void write_router_dataset(const std::filesystem::path& path, const RouterDataset& ds);
RouterDataset read_router_dataset(const std::filesystem::path& path);

namespace le {
void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
std::uint32_t get_u32(const unsigned char* p);
float get_f32(const unsigned char* p);
}  // namespace le

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace hit

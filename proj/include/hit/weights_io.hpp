// SPDX-License-Identifier: Apache-2.0
//
// Weight archive: "HITW", u32 version, u32 tensor count; per tensor a
// manifest entry (u32 name length, name, u8 dtype, u32 rank, u32 dims); then
// every payload as little-endian f32 in manifest order; then the CRC32 of the
// payload bytes.
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hit/params.hpp"

namespace hit {

inline constexpr std::uint32_t kArchiveVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, TensorF>>;

std::string encode_archive(const NamedTensors& tensors);
/// Throws DataError on a bad header, truncation or checksum mismatch.
NamedTensors decode_archive(const std::string& bytes);

std::string encode_weights(const ModelParams& params);
/// Fills a parameter set shaped by `config`. Missing, extra or misshapen
/// tensors are errors naming the tensor.
ModelParams decode_weights(const std::string& bytes, const ModelConfig& config);

void save_weights(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_weights(const std::filesystem::path& path, const ModelConfig& config);

}  // namespace hit

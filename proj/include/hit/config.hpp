// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "hit/posenc.hpp"

namespace hit {

struct ModelConfig {
  std::string variant = "base";
  std::array<std::size_t, 3> channels{384, 512, 768};
  std::array<std::size_t, 3> heads{6, 9, 12};
  std::array<std::size_t, 2> shrink_heads{12, 16};
  std::array<std::size_t, 3> blocks{4, 4, 4};
  std::size_t key_dim = 32;
  std::size_t mlp_ratio = 2;
  std::size_t template_size = 128;
  std::size_t search_size = 256;
  std::array<std::size_t, 2> router_hidden{96, 32};
  double fg_threshold = 0.6;
  Arrangement arrangement = Arrangement::diagonal;

  std::size_t patch_stride() const noexcept { return 16; }
  TokenLayout stage_layout(std::size_t stage) const;
  /// Channel schedule of each corner-head branch: C1, C1/2, C1/4, C1/8, 1.
  std::array<std::size_t, 5> head_channels() const;
  /// Patch embedding ramp: 3, C1/8, C1/4, C1/2, C1.
  std::array<std::size_t, 5> embed_channels() const;

  /// Throws UsageError naming the violated constraint.
  void validate() const;
};

/// Named presets: "base", "small", "tiny", "toy".
ModelConfig model_preset(std::string_view variant);

/// Flat `key = value` settings; `#` starts a comment.
class Settings {
 public:
  static Settings parse(std::string_view text, std::string_view origin = "<string>");
  static Settings load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  std::string get(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Preset selected by `variant`, with any of: channels, heads, shrink_heads,
/// blocks (comma lists), key_dim, mlp_ratio, template_size, search_size,
/// router_hidden, fg_threshold, arrangement overriding it.
ModelConfig config_from_settings(const Settings& s);

}  // namespace hit

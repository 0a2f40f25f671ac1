// SPDX-License-Identifier: Apache-2.0
#include "hit/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace hit {

TokenLayout ModelConfig::stage_layout(std::size_t stage) const {
  const std::size_t t = (template_size / patch_stride()) >> stage;
  const std::size_t s = (search_size / patch_stride()) >> stage;
  return {{t, t}, {s, s}};
}

std::array<std::size_t, 5> ModelConfig::head_channels() const {
  const std::size_t c = channels[0];
  return {c, c / 2, c / 4, c / 8, 1};
}

std::array<std::size_t, 5> ModelConfig::embed_channels() const {
  const std::size_t c = channels[0];
  return {3, c / 8, c / 4, c / 2, c};
}

void ModelConfig::validate() const {
  if (!(channels[0] < channels[1] && channels[1] < channels[2])) {
    throw UsageError("config: stage channels must increase strictly");
  }
  if (channels[0] % 8 != 0) throw UsageError("config: C1 must be divisible by 8");
  if (template_size == 0 || search_size == 0 || template_size % 64 != 0 ||
      search_size % 64 != 0) {
    throw UsageError("config: template and search sizes must be positive multiples of 64");
  }
  for (std::size_t h : heads) {
    if (h == 0) throw UsageError("config: head counts must be positive");
  }
  for (std::size_t h : shrink_heads) {
    if (h == 0) throw UsageError("config: shrink head counts must be positive");
  }
  for (std::size_t b : blocks) {
    if (b == 0) throw UsageError("config: every stage needs at least one block");
  }
  if (key_dim == 0 || mlp_ratio == 0) throw UsageError("config: key_dim and mlp_ratio must be positive");
  if (router_hidden[0] == 0 || router_hidden[1] == 0) {
    throw UsageError("config: router hidden widths must be positive");
  }
  if (!(fg_threshold >= 0.0 && fg_threshold < 1.0)) {
    throw UsageError("config: fg_threshold must lie in [0, 1)");
  }
}

ModelConfig model_preset(std::string_view variant) {
  ModelConfig c;
  if (variant == "base") return c;
  if (variant == "small") {
    c.variant = "small";
    c.channels = {128, 256, 384};
    c.heads = {4, 8, 12};
    c.shrink_heads = {8, 16};
    c.key_dim = 16;
    c.router_hidden = {32, 16};
    return c;
  }
  if (variant == "tiny") {
    c.variant = "tiny";
    c.channels = {128, 256, 384};
    c.heads = {4, 6, 8};
    c.shrink_heads = {8, 16};
    c.key_dim = 16;
    c.router_hidden = {32, 16};
    return c;
  }
  if (variant == "toy") {
    c.variant = "toy";
    c.channels = {32, 48, 64};
    c.heads = {2, 3, 4};
    c.shrink_heads = {4, 6};
    c.key_dim = 8;
    c.template_size = 64;
    c.search_size = 128;
    c.router_hidden = {16, 8};
    return c;
  }
  throw UsageError("unknown model variant '" + std::string(variant) + "'");
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

template <std::size_t N>
std::array<std::size_t, N> parse_list(std::string_view key, const std::string& text) {
  std::array<std::size_t, N> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= N) break;
    const std::string t = trim(item);
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size()) {
      throw UsageError("config: bad integer '" + t + "' in " + std::string(key));
    }
    out[i++] = v;
  }
  if (i != N) {
    throw UsageError("config: " + std::string(key) + " needs " + std::to_string(N) + " values");
  }
  return out;
}

}  // namespace

Settings Settings::parse(std::string_view text, std::string_view origin) {
  Settings s;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError(std::string(origin) + ":" + std::to_string(line_no) +
                       ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) {
      throw UsageError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
    }
    s.values_[std::move(key)] = std::move(value);
  }
  return s;
}

Settings Settings::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

bool Settings::has(std::string_view key) const { return values_.find(key) != values_.end(); }

std::string Settings::get(std::string_view key, std::string_view fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? std::string(fallback) : it->second;
}

double Settings::get_double(std::string_view key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw UsageError("config: '" + std::string(key) + "' is not a number: " + it->second);
  }
}

std::int64_t Settings::get_int(std::string_view key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::int64_t v = 0;
  const auto& t = it->second;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || p != t.data() + t.size()) {
    throw UsageError("config: '" + std::string(key) + "' is not an integer: " + t);
  }
  return v;
}

ModelConfig config_from_settings(const Settings& s) {
  ModelConfig c = model_preset(s.get("variant", "base"));
  if (s.has("channels")) c.channels = parse_list<3>("channels", s.get("channels", ""));
  if (s.has("heads")) c.heads = parse_list<3>("heads", s.get("heads", ""));
  if (s.has("shrink_heads")) c.shrink_heads = parse_list<2>("shrink_heads", s.get("shrink_heads", ""));
  if (s.has("blocks")) c.blocks = parse_list<3>("blocks", s.get("blocks", ""));
  if (s.has("router_hidden")) {
    c.router_hidden = parse_list<2>("router_hidden", s.get("router_hidden", ""));
  }
  c.key_dim = static_cast<std::size_t>(s.get_int("key_dim", static_cast<std::int64_t>(c.key_dim)));
  c.mlp_ratio = static_cast<std::size_t>(s.get_int("mlp_ratio", static_cast<std::int64_t>(c.mlp_ratio)));
  c.template_size = static_cast<std::size_t>(
      s.get_int("template_size", static_cast<std::int64_t>(c.template_size)));
  c.search_size = static_cast<std::size_t>(
      s.get_int("search_size", static_cast<std::int64_t>(c.search_size)));
  c.fg_threshold = s.get_double("fg_threshold", c.fg_threshold);
  if (s.has("arrangement")) c.arrangement = parse_arrangement(s.get("arrangement", ""));
  c.validate();
  return c;
}

}  // namespace hit

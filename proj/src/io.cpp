// SPDX-License-Identifier: Apache-2.0
#include "hit/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hit/error.hpp"

namespace hit {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

namespace le {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace le

namespace {

// Reads the next whitespace-delimited header token, skipping # comments.
std::string ppm_token(const std::string& s, std::size_t& pos, const std::string& origin) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  if (start == pos) throw DataError(origin + ": truncated PPM header");
  return s.substr(start, pos - start);
}

std::size_t ppm_number(const std::string& tok, const std::string& origin) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw DataError(origin + ": bad PPM header field '" + tok + "'");
  }
  return v;
}

}  // namespace

TensorF read_ppm(const std::filesystem::path& path) {
  const std::string origin = path.string();
  const std::string s = read_file(path);
  std::size_t pos = 0;
  if (ppm_token(s, pos, origin) != "P6") throw DataError(origin + ": not a binary PPM (P6)");
  const std::size_t w = ppm_number(ppm_token(s, pos, origin), origin);
  const std::size_t h = ppm_number(ppm_token(s, pos, origin), origin);
  const std::size_t maxval = ppm_number(ppm_token(s, pos, origin), origin);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) {
    throw DataError(origin + ": unsupported PPM extents or maxval");
  }
  ++pos;  // single whitespace byte before the raster
  if (s.size() < pos + w * h * 3) throw DataError(origin + ": truncated PPM raster");
  TensorF img({h, w, 3});
  const float denom = static_cast<float>(maxval);
  for (std::size_t i = 0; i < w * h * 3; ++i) {
    img[i] = static_cast<float>(static_cast<unsigned char>(s[pos + i])) / denom;
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const TensorF& image) {
  detail::require_rank(image.shape(), 3, "write_ppm");
  if (image.dim(2) != 3) throw ShapeError("write_ppm: expected 3 channels");
  std::string out = "P6\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) +
                    "\n255\n";
  for (float v : image.data()) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f))));
  }
  write_file(path, out);
}

std::vector<TensorF> read_frame_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(dir.string() + ": no .ppm frames");
  std::vector<TensorF> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(read_ppm(f));
  return frames;
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

std::vector<Box> parse_boxes(const std::string& text, const std::string& origin) {
  std::vector<Box> boxes;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '#') continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.empty()) throw DataError(where + ": empty line (frame " + std::to_string(boxes.size()) + ")");
    double v[4];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int k = 0; k < 4; ++k) {
      while (p < end && *p == ' ') ++p;
      const auto [q, ec] = std::from_chars(p, end, v[k]);
      if (ec != std::errc{}) throw DataError(where + ": expected 4 comma-separated numbers");
      p = q;
      while (p < end && *p == ' ') ++p;
      if (k < 3) {
        if (p == end || (*p != ',' && *p != '\t')) {
          throw DataError(where + ": expected 4 comma-separated numbers");
        }
        ++p;
      }
    }
    if (p != end) throw DataError(where + ": trailing characters");
    if (!(std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]) && std::isfinite(v[3]))) {
      throw DataError(where + ": non-finite value");
    }
    boxes.push_back(Box::from_xywh(v[0], v[1], v[2], v[3]));
  }
  return boxes;
}

std::vector<Box> read_boxes(const std::filesystem::path& path) {
  return parse_boxes(read_file(path), path.string());
}

void write_boxes(const std::filesystem::path& path, const std::vector<Box>& boxes) {
  std::string out;
  for (const Box& b : boxes) {
    out += format_double(b.x0) + "," + format_double(b.y0) + "," + format_double(b.width()) +
           "," + format_double(b.height()) + "\n";
  }
  write_file(path, out);
}

void write_router_dataset(const std::filesystem::path& path, const RouterDataset& ds) {
  if (ds.features.size() != ds.size() * ds.dim) {
    throw ShapeError("router dataset: feature block does not match count × dim");
  }
  std::string out = "HITR";
  le::put_u32(out, static_cast<std::uint32_t>(ds.size()));
  le::put_u32(out, static_cast<std::uint32_t>(ds.dim));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = 0; k < ds.dim; ++k) le::put_f32(out, ds.features[i * ds.dim + k]);
    le::put_f32(out, ds.targets[i]);
  }
  write_file(path, out);
}

RouterDataset read_router_dataset(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(s.data());
  if (s.size() < 12 || s.compare(0, 4, "HITR") != 0) {
    throw DataError(path.string() + ": not a router dataset");
  }
  const std::size_t count = le::get_u32(p + 4), dim = le::get_u32(p + 8);
  if (dim == 0 || s.size() != 12 + count * (dim + 1) * 4) {
    throw DataError(path.string() + ": size does not match header");
  }
  RouterDataset ds;
  ds.dim = dim;
  ds.features.reserve(count * dim);
  ds.targets.reserve(count);
  const unsigned char* q = p + 12;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < dim; ++k, q += 4) ds.features.push_back(le::get_f32(q));
    ds.targets.push_back(le::get_f32(q));
    q += 4;
  }
  return ds;
}

}  // namespace hit

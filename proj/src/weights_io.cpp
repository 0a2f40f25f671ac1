// SPDX-License-Identifier: Apache-2.0
#include "hit/weights_io.hpp"

#include <map>

#include <zlib.h>

#include "hit/io.hpp"

namespace hit {

namespace {

constexpr char kMagic[4] = {'H', 'I', 'T', 'W'};
constexpr std::uint8_t kDtypeF32 = 0;

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  const unsigned char* take(std::size_t n) {
    if (s_.size() - pos_ < n) throw DataError("weight archive truncated at byte " + std::to_string(pos_));
    const auto* p = reinterpret_cast<const unsigned char*>(s_.data()) + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() { return le::get_u32(take(4)); }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return s_.size() - pos_; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_archive(const NamedTensors& tensors) {
  std::string out(kMagic, 4);
  le::put_u32(out, kArchiveVersion);
  le::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    le::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(kDtypeF32));
    le::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) le::put_u32(out, static_cast<std::uint32_t>(d));
  }
  const std::size_t payload_start = out.size();
  for (const auto& entry : tensors) {
    for (float v : entry.second.data()) le::put_f32(out, v);
  }
  le::put_u32(out, crc32_of(out.data() + payload_start, out.size() - payload_start));
  return out;
}

NamedTensors decode_archive(const std::string& bytes) {
  Reader r(bytes);
  if (std::string(reinterpret_cast<const char*>(r.take(4)), 4) != std::string(kMagic, 4)) {
    throw DataError("not a weight archive (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kArchiveVersion) {
    throw DataError("unsupported weight archive version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<std::pair<std::string, Shape>> manifest;
  std::size_t payload_bytes = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    std::string name(reinterpret_cast<const char*>(r.take(len)), len);
    if (*r.take(1) != kDtypeF32) throw DataError("tensor " + name + ": unsupported dtype");
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw DataError("tensor " + name + ": implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    payload_bytes += Tensor<float>::element_count(shape) * 4;
    manifest.emplace_back(std::move(name), std::move(shape));
  }
  if (r.remaining() != payload_bytes + 4) {
    throw DataError("weight archive payload size does not match its manifest");
  }
  const std::size_t payload_start = r.pos();
  const std::uint32_t expected = crc32_of(bytes.data() + payload_start, payload_bytes);
  NamedTensors out;
  out.reserve(manifest.size());
  for (auto& [name, shape] : manifest) {
    const std::size_t n = Tensor<float>::element_count(shape);
    const unsigned char* p = r.take(n * 4);
    std::vector<float> data(n);
    for (std::size_t k = 0; k < n; ++k) data[k] = le::get_f32(p + 4 * k);
    out.emplace_back(std::move(name), TensorF(std::move(shape), std::move(data)));
  }
  if (r.u32() != expected) throw DataError("weight archive checksum mismatch");
  return out;
}

std::string encode_weights(const ModelParams& params) {
  NamedTensors named;
  visit_tensors(params, [&](const std::string& name, const TensorF& t) {
    named.emplace_back(name, t);
  });
  return encode_archive(named);
}

ModelParams decode_weights(const std::string& bytes, const ModelConfig& config) {
  std::map<std::string, TensorF> by_name;
  for (auto& [name, t] : decode_archive(bytes)) {
    if (!by_name.emplace(name, std::move(t)).second) {
      throw DataError("weight archive repeats tensor " + name);
    }
  }
  ModelParams params = make_params(config);
  visit_tensors(params, [&](const std::string& name, TensorF& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("weight archive lacks tensor " + name);
    if (it->second.shape() != t.shape()) {
      throw ShapeError("tensor " + name + ": archive has " + shape_string(it->second.shape()) +
                       ", config " + config.variant + " expects " + shape_string(t.shape()));
    }
    t = std::move(it->second);
    by_name.erase(it);
  });
  if (!by_name.empty()) {
    throw DataError("weight archive has unexpected tensor " + by_name.begin()->first);
  }
  return params;
}

void save_weights(const std::filesystem::path& path, const ModelParams& params) {
  write_file(path, encode_weights(params));
}

ModelParams load_weights(const std::filesystem::path& path, const ModelConfig& config) {
  return decode_weights(read_file(path), config);
}

}  // namespace hit

// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major arrays and the handful of kernels the tracker needs.
// Every reduction accumulates left to right so results are reproducible
// bit for bit; the oracle tests depend on that.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hit/error.hpp"

namespace hit {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m == 0 ? 0 : rows.begin()->size();
    std::vector<T> data;
    data.reserve(m * n);
    for (const auto& r : rows) {
      if (r.size() != n) throw ShapeError("ragged rows");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({m, n}, std::move(data));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const noexcept {
    return data_[i * shape_[1] + j];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Contiguous view of the last axis at a given leading (flattened) index.
  std::span<T> row(std::size_t i) noexcept {
    const std::size_t n = shape_.back();
    return {data_.data() + i * n, n};
  }
  std::span<const T> row(std::size_t i) const noexcept {
    const std::size_t n = shape_.back();
    return {data_.data() + i * n, n};
  }

  /// Same data, new extents. Element count must be preserved.
  Tensor reshaped(Shape shape) const& {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }
  Tensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }
  void reshape(Shape shape) {
    if (element_count(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                       shape_string(shape));
    }
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  static std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// ---------------------------------------------------------------------------
// Multiply-accumulate instrumentation.
//
// Kernels report their MAC count to the recorder active on the calling
// thread, attributed to the innermost ModuleScope. With no recorder active
// the calls are no-ops.

namespace mac {

struct Tally {
  std::uint64_t total = 0;
  std::vector<std::pair<std::string, std::uint64_t>> by_module;

  std::uint64_t module(std::string_view name) const;
};

void record(std::uint64_t macs);

class Recorder {
 public:
  Recorder();
  ~Recorder();
  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;

  const Tally& tally() const noexcept { return tally_; }

 private:
  friend void record(std::uint64_t);
  Tally tally_;
  Recorder* previous_;
};

class ModuleScope {
 public:
  explicit ModuleScope(const char* name);
  ~ModuleScope();
  ModuleScope(const ModuleScope&) = delete;
  ModuleScope& operator=(const ModuleScope&) = delete;

 private:
  const char* previous_;
};

}  // namespace mac

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

inline void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_string(s));
  }
}

}  // namespace detail

/// [M×K] · [K×N] → [M×N].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank(a.shape(), 2, "matmul lhs");
  detail::require_rank(b.shape(), 2, "matmul rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor<T> c({m, n});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = pa[i * k + p];
      const T* bp = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
  mac::record(static_cast<std::uint64_t>(m) * k * n);
  return c;
}

/// [M×K] · [N×K]ᵀ → [M×N].
template <typename T>
Tensor<T> matmul_transposed(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank(a.shape(), 2, "matmul_transposed lhs");
  detail::require_rank(b.shape(), 2, "matmul_transposed rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw ShapeError("matmul_transposed: " + shape_string(a.shape()) +
                     " x " + shape_string(b.shape()) + "^T");
  }
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto br = b.row(j);
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      c.at(i, j) = acc;
    }
  }
  mac::record(static_cast<std::uint64_t>(m) * k * n);
  return c;
}

/// x·w + bias with x [M×in], w [in×out], bias [out] (or empty for none).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  Tensor<T> y = matmul(x, w);
  if (!bias.empty()) {
    if (bias.size() != y.dim(1)) {
      throw ShapeError("linear: bias " + shape_string(bias.shape()) +
                       " vs output " + shape_string(y.shape()));
    }
    for (std::size_t i = 0; i < y.dim(0); ++i) {
      auto r = y.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
    }
  }
  return y;
}

template <typename T>
void softmax_inplace(std::span<T> v) {
  if (v.empty()) return;
  const T mx = *std::max_element(v.begin(), v.end());
  T sum{0};
  for (auto& e : v) {
    e = std::exp(e - mx);
    sum += e;
  }
  for (auto& e : v) e = e / sum;
}

/// Row-wise softmax over the last axis, shifted by the row maximum.
template <typename T>
Tensor<T> softmax_rows(Tensor<T> x) {
  if (x.rank() == 0 || x.empty()) return x;
  const std::size_t rows = x.size() / x.shape().back();
  for (std::size_t i = 0; i < rows; ++i) softmax_inplace(x.row(i));
  return x;
}

template <typename T>
constexpr T hardswish(T x) noexcept {
  return x * std::clamp(x + T{3}, T{0}, T{6}) / T{6};
}

template <typename T>
Tensor<T> hardswish(Tensor<T> x) {
  for (auto& v : x.data()) v = hardswish(v);
  return x;
}

template <typename T>
T sigmoid(T x) noexcept {
  return T{1} / (T{1} + std::exp(-x));
}

/// 3×3 convolution, zero padding 1, on an [H×W×Cin] map with a
/// [3×3×Cin×Cout] kernel. Output extents are ceil(H/stride) × ceil(W/stride).
template <typename T>
Tensor<T> conv3x3(const Tensor<T>& x, const Tensor<T>& kernel,
                  const Tensor<T>& bias, std::size_t stride) {
  detail::require_rank(x.shape(), 3, "conv3x3 input");
  detail::require_rank(kernel.shape(), 4, "conv3x3 kernel");
  const std::size_t h = x.dim(0), w = x.dim(1), cin = x.dim(2);
  if (kernel.dim(0) != 3 || kernel.dim(1) != 3 || kernel.dim(2) != cin) {
    throw ShapeError("conv3x3: kernel " + shape_string(kernel.shape()) +
                     " vs input " + shape_string(x.shape()));
  }
  const std::size_t cout = kernel.dim(3);
  if (!bias.empty() && bias.size() != cout) {
    throw ShapeError("conv3x3: bias length " + std::to_string(bias.size()));
  }
  const std::size_t oh = (h + stride - 1) / stride;
  const std::size_t ow = (w + stride - 1) / stride;
  Tensor<T> out({oh, ow, cout});
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      T* o = &out.at(oy, ox, 0);
      if (!bias.empty()) std::copy(bias.data().begin(), bias.data().end(), o);
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - 1;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const T* xi = &x.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), 0);
          const T* kk = kernel.data().data() + (ky * 3 + kx) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const T xv = xi[ci];
            const T* kr = kk + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) o[co] += xv * kr[co];
          }
        }
      }
    }
  }
  // Conventional count: every output element pays the full kernel volume.
  mac::record(static_cast<std::uint64_t>(oh) * ow * cout * 9 * cin);
  return out;
}

/// Stride-2 transposed convolution with a 2×2 kernel: [H×W×Cin] with a
/// [2×2×Cin×Cout] kernel → [2H×2W×Cout].
template <typename T>
Tensor<T> conv_transpose_2x(const Tensor<T>& x, const Tensor<T>& kernel,
                            const Tensor<T>& bias) {
  detail::require_rank(x.shape(), 3, "conv_transpose_2x input");
  detail::require_rank(kernel.shape(), 4, "conv_transpose_2x kernel");
  const std::size_t h = x.dim(0), w = x.dim(1), cin = x.dim(2);
  if (kernel.dim(0) != 2 || kernel.dim(1) != 2 || kernel.dim(2) != cin) {
    throw ShapeError("conv_transpose_2x: kernel " + shape_string(kernel.shape()) +
                     " vs input " + shape_string(x.shape()));
  }
  const std::size_t cout = kernel.dim(3);
  if (!bias.empty() && bias.size() != cout) {
    throw ShapeError("conv_transpose_2x: bias length " + std::to_string(bias.size()));
  }
  Tensor<T> out({2 * h, 2 * w, cout});
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const T* xi = &x.at(i, j, 0);
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
          T* o = &out.at(2 * i + a, 2 * j + b, 0);
          if (!bias.empty()) std::copy(bias.data().begin(), bias.data().end(), o);
          const T* kk = kernel.data().data() + (a * 2 + b) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const T xv = xi[ci];
            const T* kr = kk + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) o[co] += xv * kr[co];
          }
        }
      }
    }
  }
  // Profiler convention (output elements × kernel volume), which is 4× the
  // multiplies actually issued for a stride-equals-kernel transpose.
  mac::record(static_cast<std::uint64_t>(4) * h * w * cout * 4 * cin);
  return out;
}

/// Column means of an [M×N] array (rows are tokens), returned as [N].
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  detail::require_rank(x.shape(), 2, "mean_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (m == 0) throw ShapeError("mean_rows: no rows");
  Tensor<T> out({n});
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < n; ++j) out[j] += r[j];
  }
  for (auto& v : out.data()) v = v / static_cast<T>(m);
  return out;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) da[i] += db[i];
}

/// Per-channel scale·x + shift over the last axis.
template <typename T>
Tensor<T> channel_affine(Tensor<T> x, const Tensor<T>& scale, const Tensor<T>& shift) {
  const std::size_t c = x.shape().back();
  if (scale.size() != c || shift.size() != c) {
    throw ShapeError("channel_affine: " + std::to_string(c) + " channels vs " +
                     std::to_string(scale.size()) + "/" + std::to_string(shift.size()));
  }
  const std::size_t rows = x.size() / c;
  for (std::size_t i = 0; i < rows; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < c; ++j) r[j] = scale[j] * r[j] + shift[j];
  }
  return x;
}

}  // namespace hit

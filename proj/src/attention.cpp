// SPDX-License-Identifier: Apache-2.0
#include "hit/attention.hpp"

#include <string>

namespace hit {

template <typename T>
Tensor<T> column_block(const Tensor<T>& x, std::size_t first, std::size_t width) {
  const std::size_t n = x.dim(0);
  if (first + width > x.dim(1)) throw ShapeError("column_block out of range");
  Tensor<T> out({n, width});
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = x.row(i).subspan(first, width);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  const std::size_t c = x.dim(1);
  Tensor<T> out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0)) throw ShapeError("gather_rows: index out of range");
    const auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
Tensor<T> scaled_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                           std::span<const T> bias) {
  Tensor<T> scores = matmul_transposed(q, k);
  if (bias.size() != scores.size()) {
    throw ShapeError("attention bias has " + std::to_string(bias.size()) +
                     " entries for scores " + shape_string(scores.shape()));
  }
  const T scale = T{1} / std::sqrt(static_cast<T>(q.dim(1)));
  auto s = scores.data();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = s[i] * scale + bias[i];
  return matmul(softmax_rows(std::move(scores)), v);
}

namespace {

// Shared body of MHA and SA once queries, keys and values are projected.
template <typename T>
Tensor<T> attend_heads(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                       std::size_t heads, std::size_t key_dim, std::size_t value_dim,
                       const Tensor<T>& bias) {
  const std::size_t nq = q.dim(0), nk = k.dim(0);
  if (bias.rank() != 3 || bias.dim(0) != heads || bias.dim(1) != nq ||
      bias.dim(2) != nk) {
    throw ShapeError("attention bias " + shape_string(bias.shape()) + " expected [" +
                     std::to_string(heads) + "x" + std::to_string(nq) + "x" +
                     std::to_string(nk) + "]");
  }
  Tensor<T> concat({nq, heads * value_dim});
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor<T> qh = column_block(q, h * key_dim, key_dim);
    const Tensor<T> kh = column_block(k, h * key_dim, key_dim);
    const Tensor<T> vh = column_block(v, h * value_dim, value_dim);
    const std::span<const T> bh = bias.data().subspan(h * nq * nk, nq * nk);
    const Tensor<T> out = scaled_attention(qh, kh, vh, bh);
    for (std::size_t i = 0; i < nq; ++i) {
      const auto src = out.row(i);
      auto dst = concat.row(i).subspan(h * value_dim, value_dim);
      for (std::size_t j = 0; j < value_dim; ++j) dst[j] = hardswish(src[j]);
    }
  }
  return concat;
}

}  // namespace

template <typename T>
Tensor<T> mha_forward(const Tensor<T>& x, const MhaWeights<T>& w, const Tensor<T>& bias) {
  detail::require_rank(x.shape(), 2, "mha_forward input");
  const Tensor<T> q = linear(x, w.wq, w.bq);
  const Tensor<T> k = linear(x, w.wk, w.bk);
  const Tensor<T> v = linear(x, w.wv, w.bv);
  if (q.dim(1) != w.heads * w.key_dim || v.dim(1) != w.heads * w.value_dim()) {
    throw ShapeError("mha_forward: projection widths do not match head layout");
  }
  const Tensor<T> concat = attend_heads(q, k, v, w.heads, w.key_dim, w.value_dim(), bias);
  return linear(concat, w.wo, w.bo);
}

template <typename T>
Tensor<T> shrink_attention(const Tensor<T>& x, const TokenLayout& layout,
                           const SaWeights<T>& w, const Tensor<T>& bias) {
  detail::require_rank(x.shape(), 2, "shrink_attention input");
  if (x.dim(0) != layout.tokens()) {
    throw ShapeError("shrink_attention: " + std::to_string(x.dim(0)) +
                     " tokens for a layout of " + std::to_string(layout.tokens()));
  }
  const auto keep = subsample_indices(layout);
  const Tensor<T> q = linear(gather_rows(x, keep), w.wq, w.bq);
  const Tensor<T> k = linear(x, w.wk, w.bk);
  const Tensor<T> v = linear(x, w.wv, w.bv);
  if (q.dim(1) != w.heads * w.key_dim || v.dim(1) != w.heads * w.value_dim()) {
    throw ShapeError("shrink_attention: projection widths do not match head layout");
  }
  const Tensor<T> concat = attend_heads(q, k, v, w.heads, w.key_dim, w.value_dim(), bias);
  return linear(concat, w.wo, w.bo);
}

template <typename T>
Tensor<T> mlp_forward(const Tensor<T>& x, const BlockWeights<T>& w) {
  return linear(hardswish(linear(x, w.w1, w.b1)), w.w2, w.b2);
}

template <typename T>
Tensor<T> transformer_block(const Tensor<T>& x, const BlockWeights<T>& w,
                            const Tensor<T>& bias) {
  Tensor<T> y = x;
  add_inplace(y, mha_forward(channel_affine(x, w.attn_norm.scale, w.attn_norm.shift),
                             w.attn, bias));
  Tensor<T> z = y;
  add_inplace(z, mlp_forward(channel_affine(y, w.mlp_norm.scale, w.mlp_norm.shift), w));
  return z;
}

#define HIT_INSTANTIATE(T)                                                              \
  template Tensor<T> column_block(const Tensor<T>&, std::size_t, std::size_t);          \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);       \
  template Tensor<T> scaled_attention(const Tensor<T>&, const Tensor<T>&,               \
                                      const Tensor<T>&, std::span<const T>);            \
  template Tensor<T> mha_forward(const Tensor<T>&, const MhaWeights<T>&,                \
                                 const Tensor<T>&);                                     \
  template Tensor<T> shrink_attention(const Tensor<T>&, const TokenLayout&,             \
                                      const SaWeights<T>&, const Tensor<T>&);           \
  template Tensor<T> mlp_forward(const Tensor<T>&, const BlockWeights<T>&);             \
  template Tensor<T> transformer_block(const Tensor<T>&, const BlockWeights<T>&,        \
                                       const Tensor<T>&);

HIT_INSTANTIATE(float)
HIT_INSTANTIATE(double)

#undef HIT_INSTANTIATE

}  // namespace hit

// SPDX-License-Identifier: Apache-2.0
//
// Attention layers of the hierarchical backbone.
//
// Multi-head attention uses query/key width D per head and value width 2D;
// each head's attention output passes through hardswish before the heads
// are concatenated and projected. Shrink attention draws its queries from a
// 2×2-subsampled copy of each region so the token count drops 4×, with value
// width 4D per head and a wider output projection.
#pragma once

#include <cstddef>

#include "hit/posenc.hpp"
#include "hit/tensor.hpp"

namespace hit {

/// Column blocks of width D (or 2D/4D for values) belong to consecutive heads.
template <typename T>
struct MhaWeights {
  std::size_t heads = 0;
  std::size_t key_dim = 0;  // D
  Tensor<T> wq, bq;         // [C × heads·D], [heads·D]
  Tensor<T> wk, bk;         // [C × heads·D], [heads·D]
  Tensor<T> wv, bv;         // [C × heads·2D], [heads·2D]
  Tensor<T> wo, bo;         // [heads·2D × C], [C]

  std::size_t value_dim() const noexcept { return 2 * key_dim; }
};

template <typename T>
struct SaWeights {
  std::size_t heads = 0;
  std::size_t key_dim = 0;  // D
  Tensor<T> wq, bq;         // [Cin × heads·D]
  Tensor<T> wk, bk;         // [Cin × heads·D]
  Tensor<T> wv, bv;         // [Cin × heads·4D]
  Tensor<T> wo, bo;         // [heads·4D × Cout]

  std::size_t value_dim() const noexcept { return 4 * key_dim; }
};

template <typename T>
struct ChannelAffine {
  Tensor<T> scale;
  Tensor<T> shift;
};

template <typename T>
struct BlockWeights {
  ChannelAffine<T> attn_norm;
  MhaWeights<T> attn;
  ChannelAffine<T> mlp_norm;
  Tensor<T> w1, b1;  // [C × rC]
  Tensor<T> w2, b2;  // [rC × C]
};

/// softmax(QKᵀ/√D + bias)V for one head, Q [Nq×D], K [Nk×D], V [Nk×Dv],
/// bias [Nq×Nk] (a view into a per-head bias stack).
template <typename T>
Tensor<T> scaled_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                           std::span<const T> bias);

/// Multi-head attention over x [N×C] with a gathered bias [heads×N×N].
template <typename T>
Tensor<T> mha_forward(const Tensor<T>& x, const MhaWeights<T>& w, const Tensor<T>& bias);

/// Shrink attention: x [N×Cin] laid out per `layout` → [N/4 × Cout].
/// `bias` is [heads × N/4 × N] (subsampled queries against all keys).
template <typename T>
Tensor<T> shrink_attention(const Tensor<T>& x, const TokenLayout& layout,
                           const SaWeights<T>& w, const Tensor<T>& bias);

/// Two linear layers with hardswish in between.
template <typename T>
Tensor<T> mlp_forward(const Tensor<T>& x, const BlockWeights<T>& w);

/// x + MHA(norm(x)), then y + MLP(norm(y)).
template <typename T>
Tensor<T> transformer_block(const Tensor<T>& x, const BlockWeights<T>& w,
                            const Tensor<T>& bias);

/// Copies `width` columns starting at `first` out of an [N×M] array.
template <typename T>
Tensor<T> column_block(const Tensor<T>& x, std::size_t first, std::size_t width);

/// Rows of x picked by index, in the given order.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows);

}  // namespace hit

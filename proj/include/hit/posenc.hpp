// SPDX-License-Identifier: Apache-2.0
//
// Dual-image position encoding. Template and search tokens share one joint
// coordinate frame; attention bias is looked up per head by the absolute
// row/column offset between two tokens.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hit/tensor.hpp"

namespace hit {

struct GridExtent {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t count() const noexcept { return rows * cols; }
  friend bool operator==(const GridExtent&, const GridExtent&) = default;
};

/// Token order used throughout the backbone: template grid row-major,
/// followed by the search grid row-major.
struct TokenLayout {
  GridExtent templ;
  GridExtent search;

  std::size_t tokens() const noexcept { return templ.count() + search.count(); }
  std::size_t search_offset() const noexcept { return templ.count(); }
  /// Layout after a 2× subsample in each direction of both grids.
  TokenLayout halved() const;

  friend bool operator==(const TokenLayout&, const TokenLayout&) = default;
};

/// How the two grids are placed in the joint frame. `diagonal` is the
/// dual-image encoding; the others exist for the ablation comparisons.
enum class Arrangement { diagonal, vertical, horizontal, separate };

Arrangement parse_arrangement(std::string_view name);
std::string_view arrangement_name(Arrangement a);

struct Coord {
  std::int32_t row = 0;
  std::int32_t col = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

struct CoordMap {
  std::vector<Coord> coords;  // one per token, in TokenLayout order
  TokenLayout layout;
  Arrangement arrangement = Arrangement::diagonal;
};

CoordMap assign_dual_coords(GridExtent templ, GridExtent search,
                            Arrangement arrangement);

/// Token indices (into the full sequence) kept by the 2× subsample of each
/// region, in output order: even rows/cols of the template, then of the search.
std::vector<std::size_t> subsample_indices(const TokenLayout& layout);

/// Coordinates of the subsampled tokens. Kept tokens retain their
/// pre-subsampling coordinates.
std::vector<Coord> subsample_coords(const CoordMap& map);

struct Offset {
  std::uint16_t drow = 0;
  std::uint16_t dcol = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Query × key matrix of absolute coordinate offsets.
struct BiasIndex {
  std::size_t queries = 0;
  std::size_t keys = 0;
  std::vector<Offset> entries;  // queries × keys, row-major

  const Offset& operator()(std::size_t q, std::size_t k) const {
    return entries[q * keys + k];
  }
};

BiasIndex build_bias_index(std::span<const Coord> queries, std::span<const Coord> keys);
BiasIndex build_bias_index(const CoordMap& map);

/// Smallest table extents covering every offset that can occur in `map`.
GridExtent bias_table_extent(const CoordMap& map);

/// Learned per-head bias parameters, shape [heads × max_drow+1 × max_dcol+1].
template <typename T>
struct BiasTable {
  Tensor<T> values;

  BiasTable() = default;
  BiasTable(std::size_t heads, GridExtent extent)
      : values({heads, extent.rows, extent.cols}) {}
  explicit BiasTable(Tensor<T> v) : values(std::move(v)) {}

  std::size_t heads() const { return values.dim(0); }
  GridExtent extent() const { return {values.dim(1), values.dim(2)}; }
};

/// Bias[h][q][k] = table[h][drow(q,k)][dcol(q,k)]. Throws std::logic_error
/// when an offset falls outside the table (the table was sized wrongly).
template <typename T>
Tensor<T> gather_bias(const BiasTable<T>& table, const BiasIndex& index);

}  // namespace hit

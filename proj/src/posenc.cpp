// SPDX-License-Identifier: Apache-2.0
#include "hit/posenc.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace hit {

TokenLayout TokenLayout::halved() const {
  return {{templ.rows / 2, templ.cols / 2}, {search.rows / 2, search.cols / 2}};
}

Arrangement parse_arrangement(std::string_view name) {
  if (name == "diagonal") return Arrangement::diagonal;
  if (name == "vertical") return Arrangement::vertical;
  if (name == "horizontal") return Arrangement::horizontal;
  if (name == "separate") return Arrangement::separate;
  throw UsageError("unknown position arrangement '" + std::string(name) + "'");
}

std::string_view arrangement_name(Arrangement a) {
  switch (a) {
    case Arrangement::diagonal: return "diagonal";
    case Arrangement::vertical: return "vertical";
    case Arrangement::horizontal: return "horizontal";
    case Arrangement::separate: return "separate";
  }
  return "unknown";
}

CoordMap assign_dual_coords(GridExtent templ, GridExtent search,
                            Arrangement arrangement) {
  if (templ.count() == 0 || search.count() == 0) {
    throw ShapeError("assign_dual_coords: grids must have positive extents");
  }
  std::int32_t row_shift = 0;
  std::int32_t col_shift = 0;
  switch (arrangement) {
    case Arrangement::diagonal:
      row_shift = static_cast<std::int32_t>(templ.rows);
      col_shift = static_cast<std::int32_t>(templ.cols);
      break;
    case Arrangement::vertical:
      row_shift = static_cast<std::int32_t>(templ.rows);
      break;
    case Arrangement::horizontal:
      col_shift = static_cast<std::int32_t>(templ.cols);
      break;
    case Arrangement::separate:
      break;
  }

  CoordMap map;
  map.layout = {templ, search};
  map.arrangement = arrangement;
  map.coords.reserve(templ.count() + search.count());
  for (std::size_t r = 0; r < templ.rows; ++r) {
    for (std::size_t c = 0; c < templ.cols; ++c) {
      map.coords.push_back({static_cast<std::int32_t>(r), static_cast<std::int32_t>(c)});
    }
  }
  for (std::size_t r = 0; r < search.rows; ++r) {
    for (std::size_t c = 0; c < search.cols; ++c) {
      map.coords.push_back({static_cast<std::int32_t>(r) + row_shift,
                            static_cast<std::int32_t>(c) + col_shift});
    }
  }
  return map;
}

std::vector<std::size_t> subsample_indices(const TokenLayout& layout) {
  const auto check = [](GridExtent g, const char* which) {
    if (g.rows % 2 != 0 || g.cols % 2 != 0) {
      throw ShapeError(std::string("shrink: ") + which + " grid " +
                       std::to_string(g.rows) + "x" + std::to_string(g.cols) +
                       " has odd extents");
    }
  };
  check(layout.templ, "template");
  check(layout.search, "search");

  std::vector<std::size_t> out;
  out.reserve(layout.tokens() / 4);
  for (std::size_t r = 0; r < layout.templ.rows; r += 2) {
    for (std::size_t c = 0; c < layout.templ.cols; c += 2) {
      out.push_back(r * layout.templ.cols + c);
    }
  }
  const std::size_t base = layout.search_offset();
  for (std::size_t r = 0; r < layout.search.rows; r += 2) {
    for (std::size_t c = 0; c < layout.search.cols; c += 2) {
      out.push_back(base + r * layout.search.cols + c);
    }
  }
  return out;
}

std::vector<Coord> subsample_coords(const CoordMap& map) {
  std::vector<Coord> out;
  for (std::size_t i : subsample_indices(map.layout)) out.push_back(map.coords[i]);
  return out;
}

BiasIndex build_bias_index(std::span<const Coord> queries, std::span<const Coord> keys) {
  BiasIndex index;
  index.queries = queries.size();
  index.keys = keys.size();
  index.entries.resize(queries.size() * keys.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t k = 0; k < keys.size(); ++k) {
      index.entries[q * keys.size() + k] = {
          static_cast<std::uint16_t>(std::abs(queries[q].row - keys[k].row)),
          static_cast<std::uint16_t>(std::abs(queries[q].col - keys[k].col))};
    }
  }
  return index;
}

BiasIndex build_bias_index(const CoordMap& map) {
  return build_bias_index(map.coords, map.coords);
}

GridExtent bias_table_extent(const CoordMap& map) {
  std::int32_t rmin = map.coords.front().row, rmax = rmin;
  std::int32_t cmin = map.coords.front().col, cmax = cmin;
  for (const auto& c : map.coords) {
    rmin = std::min(rmin, c.row);
    rmax = std::max(rmax, c.row);
    cmin = std::min(cmin, c.col);
    cmax = std::max(cmax, c.col);
  }
  return {static_cast<std::size_t>(rmax - rmin + 1),
          static_cast<std::size_t>(cmax - cmin + 1)};
}

template <typename T>
Tensor<T> gather_bias(const BiasTable<T>& table, const BiasIndex& index) {
  const std::size_t heads = table.heads();
  const GridExtent ext = table.extent();
  Tensor<T> out({heads, index.queries, index.keys});
  const std::size_t plane = index.queries * index.keys;
  for (std::size_t e = 0; e < plane; ++e) {
    const Offset off = index.entries[e];
    if (off.drow >= ext.rows || off.dcol >= ext.cols) {
      throw std::logic_error("gather_bias: offset (" + std::to_string(off.drow) +
                             "," + std::to_string(off.dcol) +
                             ") outside bias table " + std::to_string(ext.rows) +
                             "x" + std::to_string(ext.cols));
    }
  }
  for (std::size_t h = 0; h < heads; ++h) {
    const T* tab = table.values.data().data() + h * ext.rows * ext.cols;
    T* dst = out.data().data() + h * plane;
    for (std::size_t e = 0; e < plane; ++e) {
      const Offset off = index.entries[e];
      dst[e] = tab[off.drow * ext.cols + off.dcol];
    }
  }
  return out;
}

template Tensor<float> gather_bias(const BiasTable<float>&, const BiasIndex&);
template Tensor<double> gather_bias(const BiasTable<double>&, const BiasIndex&);

}  // namespace hit

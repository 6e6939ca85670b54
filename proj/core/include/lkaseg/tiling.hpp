#pragma once

#include <cstdint>
#include <vector>

#include "lkaseg/labels.hpp"
#include "lkaseg/tensor.hpp"

namespace lkaseg {

/// Tile origins over an image. Origins step by `stride` until a tile
/// reaches the far edge; the last tile along an axis may extend past the
/// image, in which case the image is padded by reflection up to
/// padded_h x padded_w. Tiles are listed row-major.
struct TileLayout {
  std::int64_t image_h = 0;
  std::int64_t image_w = 0;
  std::int64_t tile = 0;
  std::int64_t stride = 0;
  std::int64_t padded_h = 0;
  std::int64_t padded_w = 0;
  std::vector<std::int64_t> ys;
  std::vector<std::int64_t> xs;

  /// Throws if tile is not a positive multiple of 32, stride is not in
  /// [1, tile], or the padding needed exceeds what reflection can supply.
  static TileLayout make(std::int64_t image_h, std::int64_t image_w, std::int64_t tile,
                         std::int64_t stride);

  [[nodiscard]] std::size_t count() const { return ys.size() * xs.size(); }
  [[nodiscard]] std::int64_t origin_y(std::size_t i) const { return ys[i / xs.size()]; }
  [[nodiscard]] std::int64_t origin_x(std::size_t i) const { return xs[i % xs.size()]; }
};

/// Mirror index into [0, n) without repeating the edge sample.
std::int64_t reflect_index(std::int64_t i, std::int64_t n);

template <typename T>
std::vector<Tensor<T>> tile_image(const Tensor<T>& image, const TileLayout& layout);
std::vector<LabelMap> tile_labels(const LabelMap& labels, const TileLayout& layout);
template <typename T>
std::vector<LabeledSample<T>> tile(const Tensor<T>& image, const LabelMap& labels,
                                   const TileLayout& layout);

/// Per-tile logits [1, K, tile, tile] (indexed as in the layout, whatever
/// order they were computed in) averaged over overlaps and cropped to the
/// image. Accumulation runs in layout order, so the result does not depend
/// on processing order.
template <typename T>
Tensor<T> stitch(const std::vector<Tensor<T>>& tiles, const TileLayout& layout);

/// Number of tiles covering each image pixel, row-major [H * W].
std::vector<int> coverage(const TileLayout& layout);

}  // namespace lkaseg

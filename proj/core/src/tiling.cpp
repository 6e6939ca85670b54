#include "lkaseg/tiling.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace lkaseg {
namespace {

std::vector<std::int64_t> origins(std::int64_t extent, std::int64_t tile, std::int64_t stride) {
  std::vector<std::int64_t> out{0};
  while (out.back() + tile < extent) out.push_back(out.back() + stride);
  return out;
}

}  // namespace

TileLayout TileLayout::make(std::int64_t image_h, std::int64_t image_w, std::int64_t tile,
                            std::int64_t stride) {
  if (tile <= 0 || tile % 32 != 0) {
    throw std::invalid_argument(fmt::format("tiling: tile size {} must be a positive multiple of 32", tile));
  }
  if (stride < 1 || stride > tile) {
    throw std::invalid_argument(fmt::format("tiling: stride {} must lie in [1, {}]", stride, tile));
  }
  if (image_h <= 0 || image_w <= 0) throw std::invalid_argument("tiling: empty image");
  TileLayout l;
  l.image_h = image_h;
  l.image_w = image_w;
  l.tile = tile;
  l.stride = stride;
  l.ys = origins(image_h, tile, stride);
  l.xs = origins(image_w, tile, stride);
  l.padded_h = l.ys.back() + tile;
  l.padded_w = l.xs.back() + tile;
  if (l.padded_h - image_h > image_h - 1 || l.padded_w - image_w > image_w - 1) {
    throw std::invalid_argument(fmt::format(
        "tiling: tile {} too large for {}x{} image (reflection padding would need {}x{})", tile,
        image_h, image_w, l.padded_h - image_h, l.padded_w - image_w));
  }
  return l;
}

std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return i;
}

template <typename T>
std::vector<Tensor<T>> tile_image(const Tensor<T>& image, const TileLayout& layout) {
  const Shape s = image.shape();
  if (s.n != 1 || s.h != layout.image_h || s.w != layout.image_w) {
    throw ShapeError(fmt::format("tile_image: image {} does not match layout {}x{}", s.str(),
                                 layout.image_h, layout.image_w));
  }
  std::vector<Tensor<T>> out;
  out.reserve(layout.count());
  for (std::size_t i = 0; i < layout.count(); ++i) {
    const std::int64_t oy = layout.origin_y(i);
    const std::int64_t ox = layout.origin_x(i);
    Tensor<T> t(Shape{1, s.c, layout.tile, layout.tile});
    for (std::int64_t c = 0; c < s.c; ++c) {
      for (std::int64_t y = 0; y < layout.tile; ++y) {
        const std::int64_t sy = reflect_index(oy + y, s.h);
        for (std::int64_t x = 0; x < layout.tile; ++x) {
          t.at(0, c, y, x) = image.at(0, c, sy, reflect_index(ox + x, s.w));
        }
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<LabelMap> tile_labels(const LabelMap& labels, const TileLayout& layout) {
  if (labels.n != 1 || labels.h != layout.image_h || labels.w != layout.image_w) {
    throw ShapeError("tile_labels: label map does not match layout");
  }
  std::vector<LabelMap> out;
  out.reserve(layout.count());
  for (std::size_t i = 0; i < layout.count(); ++i) {
    const std::int64_t oy = layout.origin_y(i);
    const std::int64_t ox = layout.origin_x(i);
    LabelMap t(1, layout.tile, layout.tile);
    for (std::int64_t y = 0; y < layout.tile; ++y) {
      const std::int64_t sy = reflect_index(oy + y, labels.h);
      for (std::int64_t x = 0; x < layout.tile; ++x) {
        t.at(0, y, x) = labels.at(0, sy, reflect_index(ox + x, labels.w));
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
std::vector<LabeledSample<T>> tile(const Tensor<T>& image, const LabelMap& labels,
                                   const TileLayout& layout) {
  auto images = tile_image(image, layout);
  auto maps = tile_labels(labels, layout);
  std::vector<LabeledSample<T>> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    out.push_back({std::move(images[i]), std::move(maps[i])});
  }
  return out;
}

template <typename T>
Tensor<T> stitch(const std::vector<Tensor<T>>& tiles, const TileLayout& layout) {
  if (tiles.size() != layout.count()) {
    throw std::invalid_argument(
        fmt::format("stitch: {} tiles for a layout of {}", tiles.size(), layout.count()));
  }
  const std::int64_t k = tiles.front().c();
  const std::int64_t h = layout.image_h;
  const std::int64_t w = layout.image_w;
  std::vector<double> sum(static_cast<std::size_t>(k * h * w), 0.0);
  const std::vector<int> cover = coverage(layout);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const Tensor<T>& t = tiles[i];
    if (t.shape() != Shape{1, k, layout.tile, layout.tile}) {
      throw ShapeError(fmt::format("stitch: tile {} has shape {}", i, t.shape().str()));
    }
    const std::int64_t oy = layout.origin_y(i);
    const std::int64_t ox = layout.origin_x(i);
    for (std::int64_t c = 0; c < k; ++c) {
      for (std::int64_t y = 0; y < layout.tile && oy + y < h; ++y) {
        for (std::int64_t x = 0; x < layout.tile && ox + x < w; ++x) {
          sum[static_cast<std::size_t>((c * h + oy + y) * w + ox + x)] += t.at(0, c, y, x);
        }
      }
    }
  }
  Tensor<T> out(Shape{1, k, h, w});
  for (std::int64_t c = 0; c < k; ++c) {
    for (std::int64_t p = 0; p < h * w; ++p) {
      out[c * h * w + p] = static_cast<T>(sum[static_cast<std::size_t>(c * h * w + p)] /
                                          cover[static_cast<std::size_t>(p)]);
    }
  }
  return out;
}

std::vector<int> coverage(const TileLayout& layout) {
  std::vector<int> cover(static_cast<std::size_t>(layout.image_h * layout.image_w), 0);
  for (std::size_t i = 0; i < layout.count(); ++i) {
    const std::int64_t oy = layout.origin_y(i);
    const std::int64_t ox = layout.origin_x(i);
    for (std::int64_t y = oy; y < std::min(oy + layout.tile, layout.image_h); ++y) {
      for (std::int64_t x = ox; x < std::min(ox + layout.tile, layout.image_w); ++x) {
        ++cover[static_cast<std::size_t>(y * layout.image_w + x)];
      }
    }
  }
  return cover;
}

template std::vector<Tensor<float>> tile_image(const Tensor<float>&, const TileLayout&);
template std::vector<Tensor<double>> tile_image(const Tensor<double>&, const TileLayout&);
template std::vector<LabeledSample<float>> tile(const Tensor<float>&, const LabelMap&,
                                                const TileLayout&);
template std::vector<LabeledSample<double>> tile(const Tensor<double>&, const LabelMap&,
                                                 const TileLayout&);
template Tensor<float> stitch(const std::vector<Tensor<float>>&, const TileLayout&);
template Tensor<double> stitch(const std::vector<Tensor<double>>&, const TileLayout&);

}  // namespace lkaseg

#pragma once

#include <cstdint>
#include <vector>

#include "lkaseg/tensor.hpp"

namespace lkaseg {

/// Label value excluded from losses and metrics.
inline constexpr std::int32_t kIgnoreLabel = 255;

/// Integer class map of shape (N, H, W), row-major.
struct LabelMap {
  std::int64_t n = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::vector<std::int32_t> data;

  LabelMap() = default;
  LabelMap(std::int64_t batch, std::int64_t height, std::int64_t width,
           std::int32_t fill = 0)
      : n(batch), h(height), w(width),
        data(static_cast<std::size_t>(batch * height * width), fill) {
    if (batch <= 0 || height <= 0 || width <= 0) {
      throw ShapeError("label map extents must be positive");
    }
  }

  [[nodiscard]] std::int64_t size() const { return n * h * w; }
  std::int32_t& at(std::int64_t b, std::int64_t y, std::int64_t x) {
    return data[static_cast<std::size_t>((b * h + y) * w + x)];
  }
  [[nodiscard]] std::int32_t at(std::int64_t b, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>((b * h + y) * w + x)];
  }

  bool operator==(const LabelMap&) const = default;
};

/// Image [1, C, H, W] in [0, 1] with its [1, H, W] labels.
template <typename T>
struct LabeledSample {
  Tensor<T> image;
  LabelMap labels;
};

}  // namespace lkaseg

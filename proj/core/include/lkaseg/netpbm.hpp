#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "lkaseg/tensor.hpp"

namespace lkaseg {

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset);
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// 8-bit interleaved raster; channels is 3 (P6) or 1 (P5).
struct Raster {
  std::int64_t width = 0;
  std::int64_t height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(std::int64_t w, std::int64_t h, int ch, std::uint8_t fill = 0);

  std::uint8_t* px(std::int64_t y, std::int64_t x) {
    return pixels.data() + (y * width + x) * channels;
  }
  [[nodiscard]] const std::uint8_t* px(std::int64_t y, std::int64_t x) const {
    return pixels.data() + (y * width + x) * channels;
  }

  bool operator==(const Raster&) const = default;
};

/// Binary P6 / P5 with maxval 255. Comments are skipped on read and never
/// written.
std::vector<std::uint8_t> encode_netpbm(const Raster& r);
Raster decode_netpbm(const std::vector<std::uint8_t>& bytes);

void write_ppm(const Raster& r, const std::filesystem::path& path);
Raster read_ppm(const std::filesystem::path& path);

/// Image tensor [1, 3, H, W] scaled to [0, 1].
template <typename T>
Tensor<T> raster_to_tensor(const Raster& r);

/// Inverse of raster_to_tensor for batch index `n`; values are clamped and
/// rounded.
template <typename T>
Raster tensor_to_raster(const Tensor<T>& t, std::int64_t n = 0);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace lkaseg

#include "lkaseg/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace lkaseg {

FormatError::FormatError(const std::string& what, std::size_t offset)
    : std::runtime_error(fmt::format("{} (byte offset {})", what, offset)), offset_(offset) {}

Raster::Raster(std::int64_t w, std::int64_t h, int ch, std::uint8_t fill)
    : width(w), height(h), channels(ch) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("Raster: extents must be positive");
  if (ch != 1 && ch != 3) throw std::invalid_argument("Raster: channels must be 1 or 3");
  pixels.assign(static_cast<std::size_t>(w * h * ch), fill);
}

std::vector<std::uint8_t> encode_netpbm(const Raster& r) {
  if (r.channels != 1 && r.channels != 3) {
    throw std::invalid_argument("encode_netpbm: channels must be 1 or 3");
  }
  if (r.pixels.size() != static_cast<std::size_t>(r.width * r.height * r.channels)) {
    throw std::invalid_argument("encode_netpbm: pixel buffer size does not match extents");
  }
  const std::string header =
      fmt::format("{}\n{} {}\n255\n", r.channels == 3 ? "P6" : "P5", r.width, r.height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), r.pixels.begin(), r.pixels.end());
  return out;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_]) != 0) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::int64_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::int64_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_]) != 0) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > (1 << 30)) throw FormatError(fmt::format("netpbm: {} too large", what), start);
      ++pos_;
    }
    if (pos_ == start) {
      throw FormatError(fmt::format("netpbm: expected {}", what), start);
    }
    return v;
  }

  // exactly one whitespace byte separates maxval from the payload
  void single_space() {
    if (pos_ >= b_.size() || std::isspace(b_[pos_]) == 0) {
      throw FormatError("netpbm: expected whitespace after maxval", pos_);
    }
    ++pos_;
  }

  std::size_t pos_ = 0;

 private:
  const std::vector<std::uint8_t>& b_;
};

}  // namespace

Raster decode_netpbm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("netpbm: bad magic", 0);
  int channels = 0;
  switch (bytes[1]) {
    case '6': channels = 3; break;
    case '5': channels = 1; break;
    case '3':
    case '2':
    case '1':
      throw FormatError(fmt::format("netpbm: unsupported format P{} (ASCII); only binary P5/P6",
                                    static_cast<char>(bytes[1])),
                        0);
    default: throw FormatError("netpbm: bad magic", 0);
  }
  HeaderReader hr(bytes);
  hr.pos_ = 2;
  const std::int64_t w = hr.number("width");
  const std::int64_t h = hr.number("height");
  const std::size_t maxval_at = (hr.skip_space_and_comments(), hr.pos_);
  const std::int64_t maxval = hr.number("maxval");
  if (w <= 0 || h <= 0) throw FormatError("netpbm: zero extent", maxval_at);
  if (maxval != 255) {
    throw FormatError(fmt::format("netpbm: maxval {} unsupported, need 255", maxval), maxval_at);
  }
  hr.single_space();
  const std::size_t need = static_cast<std::size_t>(w * h * channels);
  if (bytes.size() - hr.pos_ < need) {
    throw FormatError(fmt::format("netpbm: truncated payload, {} of {} bytes",
                                  bytes.size() - hr.pos_, need),
                      bytes.size());
  }
  if (bytes.size() - hr.pos_ > need) {
    throw FormatError("netpbm: trailing bytes after payload", hr.pos_ + need);
  }
  Raster r(w, h, channels);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(hr.pos_), bytes.end(), r.pixels.begin());
  return r;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

void write_ppm(const Raster& r, const std::filesystem::path& path) {
  write_file(path, encode_netpbm(r));
}

Raster read_ppm(const std::filesystem::path& path) {
  try {
    return decode_netpbm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()), e.offset());
  }
}

template <typename T>
Tensor<T> raster_to_tensor(const Raster& r) {
  if (r.channels != 3) throw std::invalid_argument("raster_to_tensor: need an RGB raster");
  Tensor<T> t(Shape{1, 3, r.height, r.width});
  for (std::int64_t y = 0; y < r.height; ++y) {
    for (std::int64_t x = 0; x < r.width; ++x) {
      const std::uint8_t* p = r.px(y, x);
      for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = static_cast<T>(p[c]) / T(255);
    }
  }
  return t;
}

template <typename T>
Raster tensor_to_raster(const Tensor<T>& t, std::int64_t n) {
  if (t.c() != 3) throw ShapeError("tensor_to_raster: need 3 channels");
  Raster r(t.w(), t.h(), 3);
  for (std::int64_t y = 0; y < t.h(); ++y) {
    for (std::int64_t x = 0; x < t.w(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(t.at(n, c, y, x)), 0.0, 1.0);
        r.px(y, x)[c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return r;
}

template Tensor<float> raster_to_tensor<float>(const Raster&);
template Tensor<double> raster_to_tensor<double>(const Raster&);
template Raster tensor_to_raster<float>(const Tensor<float>&, std::int64_t);
template Raster tensor_to_raster<double>(const Tensor<double>&, std::int64_t);

}  // namespace lkaseg

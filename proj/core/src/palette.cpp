#include "lkaseg/palette.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace lkaseg {

Palette::Palette(std::vector<PaletteEntry> entries, Rgb ignore_color)
    : entries_(std::move(entries)), ignore_(ignore_color) {
  if (entries_.empty()) throw std::invalid_argument("Palette: no entries");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].id < 0 || entries_[i].id == kIgnoreLabel) {
      throw std::invalid_argument(fmt::format("Palette: invalid class id {}", entries_[i].id));
    }
    if (entries_[i].color == ignore_) {
      throw std::invalid_argument("Palette: class color equals the ignore color");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (entries_[i].id == entries_[j].id || entries_[i].color == entries_[j].color) {
        throw std::invalid_argument(
            fmt::format("Palette: entries {} and {} collide", entries_[j].name, entries_[i].name));
      }
    }
  }
}

Palette Palette::isprs() {
  return Palette({{0, {255, 255, 255}, "impervious_surfaces"},
                  {1, {0, 0, 255}, "building"},
                  {2, {0, 255, 255}, "low_vegetation"},
                  {3, {0, 255, 0}, "tree"},
                  {4, {255, 255, 0}, "car"},
                  {5, {255, 0, 0}, "clutter"}});
}

const PaletteEntry* Palette::find(const Rgb& color) const {
  for (const auto& e : entries_) {
    if (e.color == color) return &e;
  }
  return nullptr;
}

const PaletteEntry& Palette::by_id(std::int32_t id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return e;
  }
  throw std::out_of_range(fmt::format("Palette: no class {}", id));
}

std::vector<std::string> Palette::names() const {
  std::int32_t max_id = 0;
  for (const auto& e : entries_) max_id = std::max(max_id, e.id);
  std::vector<std::string> out(static_cast<std::size_t>(max_id + 1));
  for (const auto& e : entries_) out[static_cast<std::size_t>(e.id)] = e.name;
  return out;
}

LabelMap labels_from_palette(const Raster& raster, const Palette& palette,
                             const LabelDecodeOptions& options) {
  if (raster.channels != 3) throw std::invalid_argument("labels_from_palette: need RGB raster");
  LabelMap out(1, raster.height, raster.width);
  for (std::int64_t y = 0; y < raster.height; ++y) {
    for (std::int64_t x = 0; x < raster.width; ++x) {
      const std::uint8_t* p = raster.px(y, x);
      const Rgb c{p[0], p[1], p[2]};
      std::int32_t label = kIgnoreLabel;
      if (const PaletteEntry* e = palette.find(c)) {
        label = e->id;
        if (std::find(options.ignore_classes.begin(), options.ignore_classes.end(), label) !=
            options.ignore_classes.end()) {
          label = kIgnoreLabel;
        }
      } else if (c != palette.ignore_color() && options.strict) {
        throw std::invalid_argument(fmt::format(
            "labels_from_palette: unknown color ({}, {}, {}) at ({}, {})", c[0], c[1], c[2], y, x));
      }
      out.at(0, y, x) = label;
    }
  }
  return out;
}

Raster labels_to_palette(const LabelMap& labels, const Palette& palette, std::int64_t n) {
  Raster r(labels.w, labels.h, 3);
  for (std::int64_t y = 0; y < labels.h; ++y) {
    for (std::int64_t x = 0; x < labels.w; ++x) {
      const std::int32_t id = labels.at(n, y, x);
      const Rgb& c = id == kIgnoreLabel ? palette.ignore_color() : palette.by_id(id).color;
      std::copy(c.begin(), c.end(), r.px(y, x));
    }
  }
  return r;
}

Raster overlay(const Raster& image, const Raster& labels_rgb) {
  if (image.width != labels_rgb.width || image.height != labels_rgb.height ||
      image.channels != 3 || labels_rgb.channels != 3) {
    throw std::invalid_argument("overlay: rasters must be RGB of equal size");
  }
  Raster out(image.width, image.height, 3);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>((image.pixels[i] + labels_rgb.pixels[i] + 1) / 2);
  }
  return out;
}

}  // namespace lkaseg

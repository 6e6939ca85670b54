#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lkaseg/labels.hpp"
#include "lkaseg/netpbm.hpp"

namespace lkaseg {

using Rgb = std::array<std::uint8_t, 3>;

struct PaletteEntry {
  std::int32_t id = 0;
  Rgb color{};
  std::string name;
};

class Palette {
 public:
  /// Throws on duplicate ids or colors, or a color equal to the ignore color.
  explicit Palette(std::vector<PaletteEntry> entries, Rgb ignore_color = {0, 0, 0});

  /// ISPRS coding: impervious white, building blue, low vegetation cyan,
  /// tree green, car yellow, clutter red.
  static Palette isprs();
  static constexpr std::int32_t kClutter = 5;

  [[nodiscard]] const std::vector<PaletteEntry>& entries() const { return entries_; }
  [[nodiscard]] int size() const { return static_cast<int>(entries_.size()); }
  [[nodiscard]] const Rgb& ignore_color() const { return ignore_; }
  [[nodiscard]] const PaletteEntry* find(const Rgb& color) const;
  [[nodiscard]] const PaletteEntry& by_id(std::int32_t id) const;
  [[nodiscard]] std::vector<std::string> names() const;

 private:
  std::vector<PaletteEntry> entries_;
  Rgb ignore_;
};

struct LabelDecodeOptions {
  /// Unknown colors throw when set; otherwise they become the ignore label.
  bool strict = true;
  /// Classes mapped to the ignore label after decoding (foreground-only
  /// evaluation passes {Palette::kClutter}).
  std::vector<std::int32_t> ignore_classes;
};

/// Returns a [1, H, W] label map. The palette's ignore color always decodes
/// to kIgnoreLabel.
LabelMap labels_from_palette(const Raster& raster, const Palette& palette,
                             const LabelDecodeOptions& options = {});

/// Renders batch item `n`; kIgnoreLabel pixels get the ignore color.
Raster labels_to_palette(const LabelMap& labels, const Palette& palette, std::int64_t n = 0);

/// 50/50 blend of an RGB image and a palette rendering of the same size.
Raster overlay(const Raster& image, const Raster& labels_rgb);

}  // namespace lkaseg

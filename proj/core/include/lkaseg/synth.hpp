#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "lkaseg/netpbm.hpp"
#include "lkaseg/palette.hpp"

namespace lkaseg {

struct SynthConfig {
  std::uint64_t seed = 7;
  int count = 32;
  std::int64_t size = 64;
  int num_classes = 6;
  /// Std-dev of additive Gaussian noise in [0, 1] intensity units; 0 gives
  /// palette-pure images.
  double noise = 0.08;

  void validate() const;
};

/// Class 0 fills the background; every other class paints one rectangle,
/// ellipse or bar, in random order (later shapes occlude earlier ones). The image is the palette rendering of the labels plus noise.
/// Sample `index` depends only on (seed, index).
std::pair<Raster, Raster> synth_sample(const SynthConfig& cfg, int index);

/// Writes images/NNNN.ppm, labels/NNNN.ppm and manifest.json under `dir`.
void synth_generate(const SynthConfig& cfg, const std::filesystem::path& dir);

/// Palette restricted to the first `num_classes` ISPRS classes.
Palette synth_palette(int num_classes);

}  // namespace lkaseg

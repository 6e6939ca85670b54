#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "lkaseg/labels.hpp"
#include "lkaseg/palette.hpp"
#include "lkaseg/rng.hpp"

namespace lkaseg {

template <typename T>
struct Corpus {
  Palette palette = Palette::isprs();
  int num_classes = 0;
  nlohmann::json manifest;
  std::vector<std::filesystem::path> files;  // image paths, sorted
  std::vector<LabeledSample<T>> samples;
};

/// Reads <dir>/images/*.ppm and the same-named files under <dir>/labels.
/// The palette and class count come from manifest.json when present,
/// otherwise the ISPRS palette is used.
template <typename T>
Corpus<T> load_corpus(const std::filesystem::path& dir, const LabelDecodeOptions& options = {});

Palette palette_from_manifest(const nlohmann::json& manifest);

/// Stacks samples[indices] along the batch axis; all must share a size.
template <typename T>
LabeledSample<T> make_batch(const std::vector<LabeledSample<T>>& samples,
                            std::span<const std::size_t> indices);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng);

}  // namespace lkaseg

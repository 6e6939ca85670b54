#include "lkaseg/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "lkaseg/netpbm.hpp"

namespace lkaseg {

Palette palette_from_manifest(const nlohmann::json& manifest) {
  std::vector<PaletteEntry> entries;
  for (const auto& e : manifest.at("palette")) {
    const auto rgb = e.at("rgb").get<std::array<int, 3>>();
    Rgb c{};
    for (int i = 0; i < 3; ++i) {
      if (rgb[static_cast<std::size_t>(i)] < 0 || rgb[static_cast<std::size_t>(i)] > 255) {
        throw std::invalid_argument("manifest: palette component outside [0, 255]");
      }
      c[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rgb[static_cast<std::size_t>(i)]);
    }
    entries.push_back({e.at("id").get<std::int32_t>(), c, e.at("name").get<std::string>()});
  }
  return Palette(std::move(entries));
}

template <typename T>
Corpus<T> load_corpus(const std::filesystem::path& dir, const LabelDecodeOptions& options) {
  namespace fs = std::filesystem;
  Corpus<T> corpus;
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      corpus.manifest = nlohmann::json::parse(in);
      corpus.palette = palette_from_manifest(corpus.manifest);
      corpus.num_classes = corpus.manifest.value("num_classes", corpus.palette.size());
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(fmt::format("{}: {}", manifest_path.string(), e.what()));
    }
  } else {
    corpus.num_classes = corpus.palette.size();
  }
  if (!fs::is_directory(dir / "images")) {
    throw std::invalid_argument(fmt::format("{}: no images/ directory", dir.string()));
  }
  for (const auto& e : fs::directory_iterator(dir / "images")) {
    if (e.path().extension() == ".ppm") corpus.files.push_back(e.path());
  }
  std::sort(corpus.files.begin(), corpus.files.end());
  for (const auto& f : corpus.files) {
    const fs::path label_path = dir / "labels" / f.filename();
    if (!fs::exists(label_path)) {
      throw std::invalid_argument(fmt::format("{}: missing label file", label_path.string()));
    }
    const Raster image = read_ppm(f);
    const Raster label_rgb = read_ppm(label_path);
    if (image.width != label_rgb.width || image.height != label_rgb.height) {
      throw std::invalid_argument(
          fmt::format("{}: image and label sizes differ", f.filename().string()));
    }
    LabelMap labels = labels_from_palette(label_rgb, corpus.palette, options);
    for (std::int32_t v : labels.data) {
      if (v != kIgnoreLabel && v >= corpus.num_classes) {
        throw std::invalid_argument(fmt::format("{}: label {} outside the {} corpus classes",
                                                label_path.string(), v, corpus.num_classes));
      }
    }
    corpus.samples.push_back({raster_to_tensor<T>(image), std::move(labels)});
  }
  return corpus;
}

template <typename T>
LabeledSample<T> make_batch(const std::vector<LabeledSample<T>>& samples,
                            std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: no indices");
  const Shape first = samples.at(indices[0]).image.shape();
  const auto n = static_cast<std::int64_t>(indices.size());
  LabeledSample<T> batch{Tensor<T>(Shape{n, first.c, first.h, first.w}),
                         LabelMap(n, first.h, first.w)};
  const std::size_t image_stride = static_cast<std::size_t>(first.c * first.h * first.w);
  const std::size_t label_stride = static_cast<std::size_t>(first.h * first.w);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const LabeledSample<T>& s = samples.at(indices[b]);
    if (s.image.shape() != first || s.labels.h != first.h || s.labels.w != first.w) {
      throw ShapeError("make_batch: samples differ in size");
    }
    std::copy(s.image.data().begin(), s.image.data().end(),
              batch.image.data().begin() + static_cast<std::ptrdiff_t>(b * image_stride));
    std::copy(s.labels.data.begin(), s.labels.data.end(),
              batch.labels.data.begin() + static_cast<std::ptrdiff_t>(b * label_stride));
  }
  return batch;
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
  }
  return order;
}

template Corpus<float> load_corpus(const std::filesystem::path&, const LabelDecodeOptions&);
template Corpus<double> load_corpus(const std::filesystem::path&, const LabelDecodeOptions&);
template LabeledSample<float> make_batch(const std::vector<LabeledSample<float>>&,
                                         std::span<const std::size_t>);
template LabeledSample<double> make_batch(const std::vector<LabeledSample<double>>&,
                                          std::span<const std::size_t>);

}  // namespace lkaseg

#include "lkaseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lkaseg/rng.hpp"

namespace lkaseg {

void SynthConfig::validate() const {
  if (size <= 0 || size % 32 != 0) {
    throw std::invalid_argument(fmt::format("size must be divisible by 32 (got {})", size));
  }
  if (count < 0) throw std::invalid_argument("count must be non-negative");
  if (num_classes < 2 || num_classes > Palette::isprs().size()) {
    throw std::invalid_argument(
        fmt::format("classes must lie in [2, {}]", Palette::isprs().size()));
  }
  if (!(noise >= 0.0)) throw std::invalid_argument("noise must be non-negative");
}

Palette synth_palette(int num_classes) {
  auto entries = Palette::isprs().entries();
  entries.resize(static_cast<std::size_t>(num_classes));
  return Palette(std::move(entries));
}

namespace {

enum class ShapeKind { rectangle, ellipse, bar };

void paint(LabelMap& m, std::int32_t label, ShapeKind kind, Rng& rng) {
  const double s = static_cast<double>(m.h);
  const double cy = rng.uniform(0.0, s);
  const double cx = rng.uniform(0.0, s);
  double ry = 0.0;
  double rx = 0.0;
  double angle = 0.0;
  switch (kind) {
    case ShapeKind::rectangle:
      ry = rng.uniform(0.14, 0.3) * s;
      rx = rng.uniform(0.14, 0.3) * s;
      break;
    case ShapeKind::ellipse:
      ry = rng.uniform(0.12, 0.25) * s;
      rx = rng.uniform(0.12, 0.25) * s;
      break;
    case ShapeKind::bar:
      ry = rng.uniform(0.08, 0.11) * s;
      rx = rng.uniform(0.3, 0.6) * s;
      angle = rng.uniform(0.0, 3.14159265358979);
      break;
  }
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  for (std::int64_t y = 0; y < m.h; ++y) {
    for (std::int64_t x = 0; x < m.w; ++x) {
      const double dy = static_cast<double>(y) + 0.5 - cy;
      const double dx = static_cast<double>(x) + 0.5 - cx;
      const double u = (ca * dx + sa * dy) / rx;
      const double v = (-sa * dx + ca * dy) / ry;
      const bool inside = kind == ShapeKind::ellipse ? u * u + v * v <= 1.0
                                                     : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
      if (inside) m.at(0, y, x) = label;
    }
  }
}

}  // namespace

std::pair<Raster, Raster> synth_sample(const SynthConfig& cfg, int index) {
  cfg.validate();
  const Palette palette = synth_palette(cfg.num_classes);
  Rng rng = Rng::substream(cfg.seed, fmt::format("synth.shapes.{}", index));
  Rng noise = Rng::substream(cfg.seed, fmt::format("synth.noise.{}", index));

  LabelMap labels(1, cfg.size, cfg.size, 0);
  struct Job {
    std::int32_t label;
    ShapeKind kind;
  };
  std::vector<Job> jobs;
  for (std::int32_t c = 1; c < cfg.num_classes; ++c) {
    jobs.push_back({c, static_cast<ShapeKind>(rng.below(3))});
  }
  for (std::size_t i = jobs.size(); i > 1; --i) {
    std::swap(jobs[i - 1], jobs[static_cast<std::size_t>(rng.below(i))]);
  }
  for (const auto& j : jobs) paint(labels, j.label, j.kind, rng);

  Raster label_rgb = labels_to_palette(labels, palette);
  Raster image = label_rgb;
  if (cfg.noise > 0.0) {
    for (auto& p : image.pixels) {
      const double v = static_cast<double>(p) + 255.0 * cfg.noise * noise.normal();
      p = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return {std::move(image), std::move(label_rgb)};
}

void synth_generate(const SynthConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  for (int i = 0; i < cfg.count; ++i) {
    auto [image, labels] = synth_sample(cfg, i);
    const std::string file = fmt::format("{:04d}.ppm", i);
    write_ppm(image, dir / "images" / file);
    write_ppm(labels, dir / "labels" / file);
  }
  nlohmann::json palette = nlohmann::json::array();
  const Palette pal = synth_palette(cfg.num_classes);
  for (const auto& e : pal.entries()) {
    palette.push_back({{"id", e.id}, {"name", e.name}, {"rgb", e.color}});
  }
  const nlohmann::json manifest = {{"seed", cfg.seed},       {"count", cfg.count},
                                   {"size", cfg.size},       {"num_classes", cfg.num_classes},
                                   {"noise", cfg.noise},     {"palette", palette}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", (dir / "manifest.json").string()));
  out << manifest.dump(2) << '\n';
}

}  // namespace lkaseg

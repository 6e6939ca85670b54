#include <algorithm>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "lkaseg/dataset.hpp"
#include "lkaseg/netpbm.hpp"
#include "lkaseg/synth.hpp"

namespace lkaseg {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lkaseg_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Synth, Validation) {
  SynthConfig cfg;
  cfg.size = 60;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.size = 64;
  cfg.num_classes = 7;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.num_classes = 6;
  cfg.noise = -0.1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Synth, SampleDependsOnlyOnSeedAndIndex) {
  SynthConfig a;
  SynthConfig b = a;
  b.count = 3;
  EXPECT_EQ(synth_sample(a, 2), synth_sample(b, 2));
  EXPECT_FALSE(synth_sample(a, 2) == synth_sample(a, 3));
  SynthConfig c = a;
  c.seed = 8;
  EXPECT_FALSE(synth_sample(a, 2) == synth_sample(c, 2));
}

TEST(Synth, SameSeedGivesByteIdenticalCorpus) {
  SynthConfig cfg;
  cfg.count = 4;
  const fs::path d1 = scratch("synth_a"), d2 = scratch("synth_b");
  synth_generate(cfg, d1);
  synth_generate(cfg, d2);
  for (const auto& e : fs::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), d1);
    EXPECT_EQ(read_file(e.path()), read_file(d2 / rel)) << rel;
  }
  EXPECT_TRUE(fs::exists(d1 / "images" / "0003.ppm"));
  EXPECT_TRUE(fs::exists(d1 / "labels" / "0003.ppm"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Synth, EveryClassHasOnePercentShare) {
  SynthConfig cfg;
  const Palette pal = synth_palette(cfg.num_classes);
  std::vector<std::uint64_t> hist(static_cast<std::size_t>(cfg.num_classes), 0);
  std::uint64_t total = 0;
  for (int i = 0; i < 100; ++i) {
    const auto labels = labels_from_palette(synth_sample(cfg, i).second, pal);
    for (auto v : labels.data) {
      ASSERT_TRUE(v >= 0 && v < cfg.num_classes);
      ++hist[static_cast<std::size_t>(v)];
      ++total;
    }
  }
  for (int k = 0; k < cfg.num_classes; ++k) {
    EXPECT_GE(static_cast<double>(hist[static_cast<std::size_t>(k)]) / total, 0.01) << k;
  }
}

TEST(Synth, NoiseFreeImagesArePalettePure) {
  SynthConfig cfg;
  cfg.noise = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto [image, labels] = synth_sample(cfg, i);
    EXPECT_EQ(image, labels);
  }
  cfg.noise = 0.08;
  const auto [noisy, labels] = synth_sample(cfg, 0);
  EXPECT_FALSE(noisy == labels);
}

TEST(Corpus, LoadsGeneratedData) {
  SynthConfig cfg;
  cfg.count = 5;
  cfg.size = 32;
  cfg.num_classes = 4;
  const fs::path dir = scratch("corpus");
  synth_generate(cfg, dir);
  const auto corpus = load_corpus<float>(dir);
  EXPECT_EQ(corpus.num_classes, 4);
  ASSERT_EQ(corpus.samples.size(), 5u);
  EXPECT_EQ(corpus.samples[0].image.shape(), (Shape{1, 3, 32, 32}));
  EXPECT_EQ(corpus.palette.size(), 4);
  const std::array<std::size_t, 2> idx{3, 1};
  const auto batch = make_batch(corpus.samples, std::span<const std::size_t>(idx));
  EXPECT_EQ(batch.image.n(), 2);
  EXPECT_EQ(batch.labels.n, 2);
  EXPECT_EQ(batch.labels.at(0, 5, 7), corpus.samples[3].labels.at(0, 5, 7));
  EXPECT_EQ(batch.image.at(1, 2, 4, 4), corpus.samples[1].image.at(0, 2, 4, 4));
  fs::remove_all(dir);
}

TEST(Corpus, MissingLabelIsAnError) {
  SynthConfig cfg;
  cfg.count = 2;
  cfg.size = 32;
  const fs::path dir = scratch("corpus_missing");
  synth_generate(cfg, dir);
  fs::remove(dir / "labels" / "0001.ppm");
  EXPECT_ANY_THROW(load_corpus<float>(dir));
  fs::remove_all(dir);
}

TEST(Shuffle, IsAPermutation) {
  Rng rng(5);
  for (std::size_t n : {1u, 2u, 10u, 97u}) {
    auto order = shuffled_order(n, rng);
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> want(n);
    std::iota(want.begin(), want.end(), 0u);
    EXPECT_EQ(order, want);
  }
}

}  // namespace
}  // namespace lkaseg

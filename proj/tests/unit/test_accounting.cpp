#include <gtest/gtest.h>

#include "lkaseg/accounting.hpp"
#include "lkaseg/model.hpp"

namespace lkaseg {
namespace {

TEST(Accounting, DefaultModelInsideBracket) {
  const auto r = count_params(ModelConfig{});
  EXPECT_GE(r.total_params(), 11'000'000);
  EXPECT_LE(r.total_params(), 21'000'000);
  EXPECT_EQ(r.total_params(), 11'574'729);
}

TEST(Accounting, FlopsScaleWithArea) {
  for (const ModelConfig& cfg : {ModelConfig{}, ModelConfig::desk()}) {
    const auto small = count_flops(cfg, 64, 64);
    const auto big = count_flops(cfg, 128, 128);
    EXPECT_EQ(big.total_flops(), 4 * small.total_flops());
    EXPECT_EQ(big.total_params(), small.total_params());
  }
}

TEST(Accounting, RejectsIndivisibleSizes) {
  EXPECT_THROW(count_flops(ModelConfig{}, 60, 64), std::invalid_argument);
  EXPECT_THROW(count_flops(ModelConfig{}, 0, 0), std::invalid_argument);
}

TEST(Accounting, FscCostsMore) {
  ModelConfig with = ModelConfig{};
  ModelConfig without = with;
  without.use_fsc = false;
  const auto a = count_flops(with, 512, 512);
  const auto b = count_flops(without, 512, 512);
  EXPECT_GT(a.total_params(), b.total_params());
  EXPECT_GT(a.total_flops(), b.total_flops());
  EXPECT_EQ(a.params_with_prefix("encoder."), b.params_with_prefix("encoder."));
}

TEST(Accounting, LkaBlockClosedForms) {
  const LkaConfig cfg{64, 21, 3};
  const std::int64_t hw = 32 * 32;
  const auto r = count_lka(cfg, 32, 32);
  EXPECT_EQ(r.total_params(), 9024);
  // 2 * (25 + 49) * C * HW depthwise, 2 * C * C * HW pointwise, C * HW multiply
  EXPECT_EQ(r.total_flops(), 2 * (25 + 49) * 64 * hw + 2 * 64 * 64 * hw + 64 * hw);
  const auto dense = dense_kernel_row(cfg, 32, 32);
  EXPECT_EQ(dense.params, 21 * 21 * 64 * 64 + 64);
  EXPECT_GT(dense.flops, r.total_flops());
}

TEST(Accounting, JsonAndTableAgree) {
  const auto r = count_flops(ModelConfig::desk(), 64, 64);
  const auto j = to_json(r);
  EXPECT_EQ(j["total_params"], r.total_params());
  EXPECT_EQ(j["total_flops"], r.total_flops());
  EXPECT_EQ(j["rows"].size(), r.rows.size());
  const auto table = format_table(r);
  EXPECT_NE(table.find("1 MAC = 2 FLOPs"), std::string::npos);
  EXPECT_NE(table.find("decoder.scale4"), std::string::npos);
}

}  // namespace
}  // namespace lkaseg

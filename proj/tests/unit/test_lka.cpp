#include <gtest/gtest.h>

#include "lkaseg/accounting.hpp"
#include "lkaseg/lka.hpp"
#include "oracles.hpp"
#include "probes.hpp"

namespace lkaseg {
namespace {

TEST(LkaConfig, Geometry) {
  const LkaConfig cfg{64, 21, 3};
  EXPECT_EQ(cfg.local_kernel(), 5);
  EXPECT_EQ(cfg.dilated_kernel(), 7);
  EXPECT_EQ(cfg.receptive_field(), 23);
  EXPECT_EQ((LkaConfig{8, 9, 2}).dilated_kernel(), 5);
  EXPECT_EQ((LkaConfig{8, 7, 1}).local_kernel(), 1);
}

TEST(LkaConfig, Validation) {
  EXPECT_THROW((LkaConfig{0, 21, 3}).validate(), std::invalid_argument);
  EXPECT_THROW((LkaConfig{4, 20, 3}).validate(), std::invalid_argument);
  EXPECT_THROW((LkaConfig{4, 1, 1}).validate(), std::invalid_argument);
  EXPECT_THROW((LkaConfig{4, 5, 6}).validate(), std::invalid_argument);
  EXPECT_NO_THROW((LkaConfig{4, 5, 5}).validate());
}

TEST(LkaParams, ClosedFormCount) {
  // 5x5 dw + 7x7 dilated dw + 1x1, each with bias
  const LkaConfig cfg{64, 21, 3};
  const std::int64_t closed = (25 * 64 + 64) + (49 * 64 + 64) + (64 * 64 + 64);
  EXPECT_EQ(closed, 9024);
  EXPECT_EQ(lka_param_count(cfg), closed);
  ParamStore<double> store;
  Rng rng(1);
  init_lka(store, LkaBlock::make("lka", cfg), rng);
  EXPECT_EQ(store.count(), closed);
  EXPECT_EQ(count_lka(cfg, 32, 32).total_params(), closed);
  EXPECT_EQ(dense_kernel_param_count(cfg), 21 * 21 * 64 * 64);
}

TEST(LkaForward, IdentityParamsGiveAttentionEqualToInput) {
  const LkaConfig cfg{3, 9, 2};
  Rng rng(4);
  const auto x = testing_oracle::random_tensor(Shape{2, 3, 12, 12}, rng);
  // attention == F, so the block squares its input
  const auto y = lka_forward(x, LkaParams<double>::identity(cfg), cfg);
  Tensor<double> sq = x;
  for (double& v : sq.data()) v *= v;
  EXPECT_EQ(y, sq);
  const auto z = lka_forward(x, LkaParams<double>::zeros(cfg), cfg);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(LkaForward, MatchesComposedOracle) {
  const LkaConfig cfg{4, 11, 3};
  Rng rng(9);
  const auto p = LkaParams<double>::random(cfg, rng);
  const auto x = testing_oracle::random_tensor(Shape{1, 4, 15, 13}, rng);
  const int kl = cfg.local_kernel();
  const int kd = cfg.dilated_kernel();
  auto a = testing_oracle::conv2d_direct(x, p.dw_weight, &p.dw_bias, ConvSpec::same(kl, 1, 4));
  a = testing_oracle::conv2d_direct(a, p.dwd_weight, &p.dwd_bias, ConvSpec::same(kd, 3, 4));
  a = testing_oracle::conv2d_direct(a, p.pw_weight, &p.pw_bias, ConvSpec{});
  for (std::int64_t i = 0; i < a.numel(); ++i) a[i] *= x[i];
  EXPECT_LE(testing_oracle::max_rel_error(lka_forward(x, p, cfg), a), 1e-12);
}

TEST(LkaReceptiveField, GradientSupportIsRSquare) {
  for (const LkaConfig cfg : {LkaConfig{2, 21, 3}, LkaConfig{2, 7, 2}, LkaConfig{2, 5, 1}}) {
    const std::int64_t r = cfg.receptive_field();
    const std::int64_t size = r + 10;
    const auto box = testing_probe::lka_gradient_support(cfg, size, 11);
    EXPECT_EQ(box.height(), r) << cfg.kernel << "/" << cfg.dilation;
    EXPECT_EQ(box.width(), r);
    EXPECT_TRUE(box.solid());
    EXPECT_EQ(box.y0, size / 2 - r / 2);
  }
}

TEST(DecoderBlock, PreservesShapeAndRegistersParams) {
  const LkaConfig cfg{8, 7, 2};
  const auto block = DecoderBlock::make("dec", cfg);
  ParamStore<double> store;
  Rng rng(2);
  init_decoder_block(store, block, rng);
  EXPECT_TRUE(store.contains("dec.bn.gamma"));
  Tape<double> tape;
  const Var x = tape.variable(Tensor<double>(Shape{2, 8, 9, 9}, 0.25));
  const Var y = decoder_block_forward(tape, store, block, x, Mode::eval);
  EXPECT_EQ(tape.value(y).shape(), (Shape{2, 8, 9, 9}));
}

}  // namespace
}  // namespace lkaseg

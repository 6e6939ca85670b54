#include <vector>

#include <gtest/gtest.h>

#include "lkaseg/autodiff.hpp"
#include "lkaseg/grad_suites.hpp"
#include "lkaseg/gradcheck.hpp"

namespace lkaseg {
namespace {

TEST(Tape, ProductRuleAndFanOut) {
  Tape<double> tape;
  const Var a = tape.variable(Tensor<double>(Shape{1, 1, 1, 2}, std::vector<double>{2, 3}));
  const Var b = tape.variable(Tensor<double>(Shape{1, 1, 1, 2}, std::vector<double>{5, 7}));
  // loss = sum(a * b + a)
  const Var loss = ad::sum(tape, ad::add(tape, ad::mul(tape, a, b), a));
  EXPECT_EQ(tape.value(loss)[0], 2 * 5 + 3 * 7 + 2 + 3);
  tape.backward(loss);
  EXPECT_EQ(tape.grad(a).values(), (std::vector<double>{6, 8}));
  EXPECT_EQ(tape.grad(b).values(), (std::vector<double>{2, 3}));
}

TEST(Tape, CannotReplay) {
  Tape<double> tape;
  const Var a = tape.variable(Tensor<double>::scalar(1.0));
  const Var s = ad::sum(tape, a);
  tape.backward(s);
  EXPECT_ANY_THROW(tape.backward(s));
}

TEST(Tape, ConstantsGetNoGradient) {
  Tape<double> tape;
  const Var a = tape.constant(Tensor<double>::scalar(4.0));
  const Var s = ad::sum(tape, ad::mul(tape, a, a));
  EXPECT_FALSE(tape.requires_grad(s));
}

TEST(Tape, ParamLeavesAccumulateIntoStore) {
  ParamStore<double> store;
  store.add("w", Tensor<double>(Shape{1, 1, 1, 1}, 3.0));
  for (int pass = 0; pass < 2; ++pass) {
    Tape<double> tape;
    const Var w = tape.param(store, "w");
    tape.backward(ad::sum(tape, ad::mul(tape, w, w)));
  }
  EXPECT_EQ(store.grad("w")[0], 12.0);  // 2 * (2 * 3)
  store.zero_grad();
  EXPECT_EQ(store.grad("w")[0], 0.0);
}

TEST(Tape, NoGradTapeSkipsAdjoints) {
  ParamStore<double> store;
  store.add("w", Tensor<double>(Shape{1, 1, 1, 1}, 3.0));
  Tape<double> tape(false);
  const Var w = tape.param(store, "w");
  const Var s = ad::sum(tape, w);
  EXPECT_EQ(tape.value(s)[0], 3.0);
  EXPECT_FALSE(tape.requires_grad(s));
}

TEST(GradCheck, DetectsAWrongGradient) {
  const auto f = [](const Tensor<double>& x) { return x[0] * x[0]; };
  Tensor<double> x = Tensor<double>::scalar(1.5);
  const auto ok = finite_diff_check(f, x, Tensor<double>::scalar(3.0));
  EXPECT_TRUE(ok.passed);
  const auto bad = finite_diff_check(f, x, Tensor<double>::scalar(3.1));
  EXPECT_FALSE(bad.passed);
}

TEST(GradSuites, EveryOpPasses) {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto reports = gradcheck_ops(seed, 1e-4);
    EXPECT_GT(reports.size(), 30u);
    for (const auto& r : reports) EXPECT_TRUE(r.passed) << format_report(r);
  }
}

TEST(GradSuites, LkaAndDecoderBlocksPass) {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto reports = gradcheck_blocks(seed, 1e-4);
    EXPECT_GT(reports.size(), 10u);
    for (const auto& r : reports) EXPECT_TRUE(r.passed) << format_report(r);
  }
}

}  // namespace
}  // namespace lkaseg

#include <benchmark/benchmark.h>

#include "lkaseg/lka.hpp"
#include "lkaseg/model.hpp"
#include "lkaseg/ops.hpp"
#include "lkaseg/rng.hpp"
#include "lkaseg/train.hpp"

namespace {

using namespace lkaseg;

Tensor<float> random_tensor(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(s);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// args: channels, spatial size, kernel, groups (0 = depthwise)
void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  const int k = static_cast<int>(state.range(2));
  const int groups = state.range(3) == 0 ? c : static_cast<int>(state.range(3));
  const auto x = random_tensor(Shape{1, c, hw, hw}, 1);
  const auto w = random_tensor(Shape{c, c / groups, k, k}, 2);
  const ConvSpec spec = ConvSpec::same(k, 1, groups);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d<float>(x, w, nullptr, spec));
  const double flops = 2.0 * k * k * (c / groups) * c * hw * hw;
  state.counters["FLOPS"] =
      benchmark::Counter(flops, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv2d)
    ->Args({64, 64, 3, 1})
    ->Args({64, 64, 1, 1})
    ->Args({64, 64, 5, 0})
    ->Args({128, 32, 3, 1})
    ->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const auto x = random_tensor(Shape{1, c, 64, 64}, 1);
  const auto w = random_tensor(Shape{c, c, 3, 3}, 2);
  const auto g = random_tensor(Shape{1, c, 64, 64}, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_backward<float>(x, w, false, g, ConvSpec::same(3)));
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_LkaForward(benchmark::State& state) {
  const LkaConfig cfg{static_cast<int>(state.range(0)), 21, 3};
  const int hw = static_cast<int>(state.range(1));
  Rng rng(4);
  const auto p = LkaParams<float>::random(cfg, rng);
  const auto x = random_tensor(Shape{1, cfg.channels, hw, hw}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(lka_forward(x, p, cfg));
}
BENCHMARK(BM_LkaForward)->Args({64, 64})->Args({64, 128})->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state) {
  const bool desk = state.range(0) == 1;
  const int hw = static_cast<int>(state.range(1));
  Model<float> model(desk ? ModelConfig::desk() : ModelConfig{}, 7);
  const auto x = random_tensor(Shape{1, 3, hw, hw}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(model.logits(x));
  state.SetLabel(desk ? "desk widths" : "default widths");
}
BENCHMARK(BM_ModelForward)
    ->Args({1, 64})
    ->Args({1, 256})
    ->Args({0, 256})
    ->Unit(benchmark::kMillisecond);

void BM_DeskTrainStep(benchmark::State& state) {
  Model<float> model(ModelConfig::desk(), 7);
  SgdState<float> sgd(model.params());
  LabeledSample<float> batch{random_tensor(Shape{10, 3, 64, 64}, 8), LabelMap(10, 64, 64)};
  for (std::size_t i = 0; i < batch.labels.data.size(); ++i) {
    batch.labels.data[i] = static_cast<std::int32_t>(i / 64 % 6);
  }
  const TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(model, batch, sgd, cfg));
}
BENCHMARK(BM_DeskTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

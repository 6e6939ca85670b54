#include "lkaseg/grad_suites.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "lkaseg/lka.hpp"

namespace lkaseg {
namespace {

std::vector<std::int64_t> pick(std::int64_t numel, std::int64_t probes, Rng& rng) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(numel));
  std::iota(idx.begin(), idx.end(), std::int64_t{0});
  if (numel <= probes) return idx;
  for (std::int64_t i = 0; i < probes; ++i) {
    const auto j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(numel - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(probes));
  return idx;
}

Tensor<double> random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor<double> t(s);
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

// Scalar probe: sum(y * w) with a fixed random w.
Var project(Tape<double>& tape, Var y, Rng& rng) {
  return ad::dot(tape, y, random_tensor(tape.value(y).shape(), rng));
}

}  // namespace

std::vector<GradCheckReport> check_leaves(const std::string& label, const LeafLoss& loss,
                                          const std::vector<Tensor<double>>& leaves,
                                          const GradCheckOptions& options, Rng& rng,
                                          std::int64_t probes) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& l : leaves) vars.push_back(tape.variable(l));
    tape.backward(loss(tape, vars));
    for (Var v : vars) analytic.push_back(tape.grad(v));
  }
  std::vector<std::vector<std::int64_t>> picked;
  std::vector<std::vector<double>> numeric;
  double scale = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    auto f = [&](const Tensor<double>& point) {
      Tape<double> tape(false);
      std::vector<Var> vars;
      for (std::size_t k = 0; k < leaves.size(); ++k) {
        vars.push_back(tape.constant(k == i ? point : leaves[k]));
      }
      return tape.value(loss(tape, vars))[0];
    };
    picked.push_back(pick(leaves[i].numel(), probes, rng));
    numeric.push_back(numeric_gradient(f, leaves[i], picked.back(), options));
    for (double n : numeric.back()) scale = std::max(scale, std::abs(n));
  }
  std::vector<GradCheckReport> out;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    GradCheckReport r = compare_gradients(analytic[i], picked[i], numeric[i], options, scale);
    r.label = leaves.size() == 1 ? label : fmt::format("{}[{}]", label, i);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<GradCheckReport> check_store(const std::string& label, ParamStore<double>& store,
                                         const StoreLoss& loss, const GradCheckOptions& options,
                                         Rng& rng, std::int64_t probes) {
  store.zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  struct Probe {
    ParamStore<double>::Entry* entry;
    Tensor<double> analytic;
    std::vector<std::int64_t> indices;
    std::vector<double> numeric;
  };
  std::vector<Probe> probes_taken;
  double scale = 0.0;
  for (auto& e : store) {
    if (e.kind != ParamKind::trainable) continue;
    const Tensor<double> original = e.value;
    auto f = [&](const Tensor<double>& point) {
      e.value = point;
      Tape<double> tape(false);
      const double v = tape.value(loss(tape))[0];
      e.value = original;
      return v;
    };
    Probe p{&e, e.grad, pick(original.numel(), probes, rng), {}};
    p.numeric = numeric_gradient(f, original, p.indices, options);
    for (double n : p.numeric) scale = std::max(scale, std::abs(n));
    probes_taken.push_back(std::move(p));
  }
  std::vector<GradCheckReport> out;
  for (const auto& p : probes_taken) {
    GradCheckReport r = compare_gradients(p.analytic, p.indices, p.numeric, options, scale);
    r.label = fmt::format("{}:{}", label, p.entry->name);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<GradCheckReport> gradcheck_ops(std::uint64_t seed, double tolerance) {
  Rng rng = Rng::substream(seed, "gradcheck.ops");
  GradCheckOptions opt;
  opt.step = 1e-5;
  opt.tolerance = tolerance;
  std::vector<GradCheckReport> all;
  auto run = [&](const std::string& label, const LeafLoss& loss,
                 const std::vector<Tensor<double>>& leaves) {
    Rng w = Rng::substream(seed, label);
    auto wrapped = [&](Tape<double>& t, std::span<const Var> v) {
      Rng local = w;  // same projection on every evaluation
      return project(t, loss(t, v), local);
    };
    auto r = check_leaves(label, wrapped, leaves, opt, rng);
    all.insert(all.end(), r.begin(), r.end());
  };

  struct ConvCase {
    const char* label;
    Shape x;
    int cout;
    ConvSpec spec;
    bool bias;
  };
  const ConvCase convs[] = {
      {"conv2d.3x3", {2, 3, 7, 6}, 4, ConvSpec{3, 3, 1, 1, 1, 1}, true},
      {"conv2d.stride2", {1, 2, 9, 8}, 3, ConvSpec{3, 3, 2, 1, 1, 1}, true},
      {"conv2d.7x7s2", {1, 3, 12, 12}, 2, ConvSpec{7, 7, 2, 3, 1, 1}, false},
      {"conv2d.dilated", {1, 2, 11, 11}, 2, ConvSpec{3, 3, 1, 3, 3, 1}, true},
      {"conv2d.depthwise", {2, 4, 8, 8}, 4, ConvSpec{5, 5, 1, 2, 1, 4}, true},
      {"conv2d.depthwise_dilated", {1, 3, 13, 13}, 3, ConvSpec{3, 3, 1, 3, 3, 3}, true},
      {"conv2d.grouped", {1, 4, 6, 6}, 6, ConvSpec{3, 3, 1, 0, 1, 2}, false},
      {"conv2d.pointwise", {2, 5, 4, 3}, 3, ConvSpec{1, 1, 1, 0, 1, 1}, true},
  };
  for (const auto& c : convs) {
    std::vector<Tensor<double>> leaves{
        random_tensor(c.x, rng),
        random_tensor(Shape{c.cout, c.x.c / c.spec.groups, c.spec.kernel_h, c.spec.kernel_w}, rng,
                      0.5)};
    if (c.bias) leaves.push_back(random_tensor(Shape{c.cout, 1, 1, 1}, rng));
    const ConvSpec spec = c.spec;
    const bool bias = c.bias;
    run(c.label,
        [spec, bias](Tape<double>& t, std::span<const Var> v) {
          return ad::conv2d(t, v[0], v[1], bias ? std::optional<Var>(v[2]) : std::nullopt, spec);
        },
        leaves);
  }

  run("max_pool2d.k2s2",
      [](Tape<double>& t, std::span<const Var> v) { return ad::max_pool2d(t, v[0], 2, 2); },
      {random_tensor({2, 2, 6, 6}, rng)});
  run("max_pool2d.k3s2p1",
      [](Tape<double>& t, std::span<const Var> v) { return ad::max_pool2d(t, v[0], 3, 2, 1); },
      {random_tensor({1, 3, 8, 8}, rng)});
  run("bilinear.up",
      [](Tape<double>& t, std::span<const Var> v) { return ad::bilinear_resize(t, v[0], 9, 11); },
      {random_tensor({1, 2, 4, 5}, rng)});
  run("bilinear.down",
      [](Tape<double>& t, std::span<const Var> v) { return ad::bilinear_resize(t, v[0], 3, 5); },
      {random_tensor({2, 2, 8, 7}, rng)});

  for (Mode mode : {Mode::train, Mode::eval}) {
    const std::string label = mode == Mode::train ? "batch_norm.train" : "batch_norm.eval";
    Tensor<double> mean = random_tensor({1, 3, 1, 1}, rng, 0.3);
    Tensor<double> var(Shape{1, 3, 1, 1});
    for (auto& v : var.data()) v = 0.5 + rng.uniform();
    run(label,
        [mode, mean, var](Tape<double>& t, std::span<const Var> v) mutable {
          Tensor<double> m = mean;
          Tensor<double> s = var;
          return ad::batch_norm(t, v[0], v[1], v[2], m, s, mode, 0.1, 1e-5);
        },
        {random_tensor({2, 3, 4, 3}, rng, 2.0), random_tensor({1, 3, 1, 1}, rng),
         random_tensor({1, 3, 1, 1}, rng)});
  }

  for (auto [kind, label] : {std::pair{Activation::relu, "relu"},
                             std::pair{Activation::gelu, "gelu"},
                             std::pair{Activation::sigmoid, "sigmoid"}}) {
    const Activation k = kind;
    run(label,
        [k](Tape<double>& t, std::span<const Var> v) { return ad::activation(t, v[0], k); },
        {random_tensor({2, 3, 4, 4}, rng, 2.0)});
  }
  run("add", [](Tape<double>& t, std::span<const Var> v) { return ad::add(t, v[0], v[1]); },
      {random_tensor({2, 2, 3, 3}, rng), random_tensor({2, 2, 3, 3}, rng)});
  run("mul", [](Tape<double>& t, std::span<const Var> v) { return ad::mul(t, v[0], v[1]); },
      {random_tensor({2, 2, 3, 3}, rng), random_tensor({2, 2, 3, 3}, rng)});
  run("concat_channels",
      [](Tape<double>& t, std::span<const Var> v) { return ad::concat_channels(t, v); },
      {random_tensor({2, 1, 3, 3}, rng), random_tensor({2, 3, 3, 3}, rng),
       random_tensor({2, 2, 3, 3}, rng)});
  run("slice_channels",
      [](Tape<double>& t, std::span<const Var> v) { return ad::slice_channels(t, v[0], 1, 2); },
      {random_tensor({2, 4, 3, 3}, rng)});
  run("sum", [](Tape<double>& t, std::span<const Var> v) { return ad::sum(t, v[0]); },
      {random_tensor({1, 2, 3, 3}, rng)});
  {
    LabelMap labels(2, 3, 4);
    for (auto& l : labels.data) l = static_cast<std::int32_t>(rng.below(5));
    labels.data[1] = kIgnoreLabel;
    labels.data[7] = kIgnoreLabel;
    run("softmax_cross_entropy",
        [labels](Tape<double>& t, std::span<const Var> v) {
          return ad::softmax_cross_entropy(t, v[0], labels);
        },
        {random_tensor({2, 5, 3, 4}, rng, 2.0)});
  }
  run("gated_blend",
      [](Tape<double>& t, std::span<const Var> v) { return ad::gated_blend(t, v[0], v[1], v[2]); },
      {random_tensor({2, 2, 3, 3}, rng), random_tensor({2, 2, 3, 3}, rng),
       random_tensor({1, 1, 1, 1}, rng)});
  run("fixed_blend",
      [](Tape<double>& t, std::span<const Var> v) {
        return ad::fixed_blend(t, v[0], v[1], 0.3);
      },
      {random_tensor({2, 2, 3, 3}, rng), random_tensor({2, 2, 3, 3}, rng)});
  return all;
}

std::vector<GradCheckReport> gradcheck_blocks(std::uint64_t seed, double tolerance) {
  Rng rng = Rng::substream(seed, "gradcheck.blocks");
  GradCheckOptions opt;
  opt.step = 1e-5;
  opt.tolerance = tolerance;
  std::vector<GradCheckReport> all;

  const LkaConfig lka_cfg{4, 7, 2};
  {
    LkaParams<double> p = LkaParams<double>::random(lka_cfg, rng);
    const Tensor<double> x = random_tensor({2, 4, 9, 9}, rng);
    const Tensor<double> w = random_tensor({2, 4, 9, 9}, rng);
    auto loss = [&](Tape<double>& t, std::span<const Var> v) {
      return ad::dot(t, lka_apply(t, v[0], lka_cfg, v[1], v[2], v[3], v[4], v[5], v[6]), w);
    };
    auto r = check_leaves("lka", loss,
                          {x, p.dw_weight, p.dw_bias, p.dwd_weight, p.dwd_bias, p.pw_weight,
                           p.pw_bias},
                          opt, rng);
    all.insert(all.end(), r.begin(), r.end());
  }

  for (Mode mode : {Mode::train, Mode::eval}) {
    ParamStore<double> store;
    const DecoderBlock block = DecoderBlock::make("block", lka_cfg);
    init_decoder_block(store, block, rng);
    // non-trivial batch-norm state for eval mode
    for (auto& v : store.value("block.bn.gamma").data()) v = 0.5 + rng.uniform();
    for (auto& v : store.value("block.bn.beta").data()) v = rng.normal();
    for (auto& v : store.value("block.bn.running_mean").data()) v = 0.2 * rng.normal();
    for (auto& v : store.value("block.bn.running_var").data()) v = 0.5 + rng.uniform();
    const Tensor<double> x = random_tensor({2, 4, 8, 8}, rng);
    const Tensor<double> w = random_tensor({2, 4, 8, 8}, rng);
    const std::string label = mode == Mode::train ? "decoder_block.train" : "decoder_block.eval";
    auto r = check_store(label, store,
                         [&](Tape<double>& t) {
                           return ad::dot(
                               t, decoder_block_forward(t, store, block, t.constant(x), mode), w);
                         },
                         opt, rng);
    all.insert(all.end(), r.begin(), r.end());
    auto ri = check_leaves(
        label + ":input",
        [&](Tape<double>& t, std::span<const Var> v) {
          return ad::dot(t, decoder_block_forward(t, store, block, v[0], mode), w);
        },
        {x}, opt, rng);
    all.insert(all.end(), ri.begin(), ri.end());
  }
  return all;
}

std::vector<GradCheckReport> gradcheck_model(const ModelConfig& cfg, std::uint64_t seed,
                                             double tolerance, std::int64_t probes_per_tensor) {
  Rng rng = Rng::substream(seed, "gradcheck.model");
  GradCheckOptions opt;
  // Small enough that few probes straddle a ReLU or max-pool kink.
  opt.step = 1e-6;
  opt.tolerance = tolerance;
  Model<double> model(cfg, seed);
  // move the gates off their symmetric starting point
  for (int s = 0; s < kDecoderStages; ++s) {
    model.params().value(model.arch().decoder[static_cast<std::size_t>(s)].gate)[0] =
        rng.uniform(-1.0, 1.0);
  }
  const Tensor<double> image = [&] {
    Tensor<double> t(Shape{2, cfg.in_channels, kGradcheckImage, kGradcheckImage});
    for (auto& v : t.data()) v = rng.uniform();
    return t;
  }();
  LabelMap labels(2, kGradcheckImage, kGradcheckImage);
  for (auto& l : labels.data) {
    l = rng.uniform() < 0.1 ? kIgnoreLabel
                            : static_cast<std::int32_t>(rng.below(
                                  static_cast<std::uint64_t>(cfg.num_classes)));
  }
  auto loss = [&](Tape<double>& t, Var x) {
    return ad::softmax_cross_entropy(t, model.forward(t, x, Mode::train), labels);
  };
  auto all = check_store("model", model.params(),
                         [&](Tape<double>& t) { return loss(t, t.constant(image)); }, opt, rng,
                         probes_per_tensor);
  auto ri = check_leaves(
      "model:input", [&](Tape<double>& t, std::span<const Var> v) { return loss(t, v[0]); },
      {image}, opt, rng, 8);
  all.insert(all.end(), ri.begin(), ri.end());
  return all;
}

}  // namespace lkaseg

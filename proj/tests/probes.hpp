#pragma once

// Measurement helpers shared by the unit and acceptance tests.

#include <array>
#include <cmath>
#include <span>
#include <cstdint>

#include "lkaseg/autodiff.hpp"
#include "lkaseg/lka.hpp"
#include "lkaseg/model.hpp"
#include "lkaseg/rng.hpp"

namespace lkaseg::testing_probe {

struct Box {
  std::int64_t y0 = 0, y1 = -1, x0 = 0, x1 = -1;  // inclusive, empty when y1 < y0
  std::int64_t nonzero = 0;

  [[nodiscard]] std::int64_t height() const { return y1 - y0 + 1; }
  [[nodiscard]] std::int64_t width() const { return x1 - x0 + 1; }
  /// Every cell inside the bounding box is nonzero.
  [[nodiscard]] bool solid() const { return nonzero == height() * width(); }
};

/// Support of d out[0, c_out, cy, cx] / d input over an LKA block with
/// random weights, on a size x size map.
inline Box lka_gradient_support(const LkaConfig& cfg, std::int64_t size, std::uint64_t seed) {
  Rng rng(seed);
  const auto p = LkaParams<double>::random(cfg, rng);
  Tensor<double> x(Shape{1, cfg.channels, size, size});
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(0.5, 1.5);
  Tape<double> tape;
  const Var f = tape.variable(x);
  const Var y = lka_apply(tape, f, cfg, tape.constant(p.dw_weight), tape.constant(p.dw_bias),
                          tape.constant(p.dwd_weight), tape.constant(p.dwd_bias),
                          tape.constant(p.pw_weight), tape.constant(p.pw_bias));
  Tensor<double> probe(tape.value(y).shape());
  const std::int64_t c = size / 2;
  probe.at(0, 0, c, c) = 1.0;
  tape.backward(ad::dot(tape, y, probe));
  const Tensor<double> g = tape.grad(f);

  Box box{size, -1, size, -1, 0};
  for (std::int64_t ch = 0; ch < cfg.channels; ++ch) {
    for (std::int64_t yy = 0; yy < size; ++yy) {
      for (std::int64_t xx = 0; xx < size; ++xx) {
        if (g.at(0, ch, yy, xx) == 0.0) continue;
        box.y0 = std::min(box.y0, yy);
        box.y1 = std::max(box.y1, yy);
        box.x0 = std::min(box.x0, xx);
        box.x1 = std::max(box.x1, xx);
      }
    }
  }
  // count spatial cells with a nonzero gradient in any channel
  for (std::int64_t yy = box.y0; yy <= box.y1; ++yy) {
    for (std::int64_t xx = box.x0; xx <= box.x1; ++xx) {
      bool any = false;
      for (std::int64_t ch = 0; ch < cfg.channels; ++ch) any |= g.at(0, ch, yy, xx) != 0.0;
      box.nonzero += any ? 1 : 0;
    }
  }
  return box;
}

struct FusionBranches {
  Tensor<float> fused;    // last decoder stage output with the model's blend
  Tensor<float> encoder;  // F_R: projected encoder tap
  Tensor<float> decoder;  // F_L: decoder-block output
};

/// Runs the model up to its last decoder stage in eval mode and recomputes
/// both blend inputs of that stage separately.
inline FusionBranches last_stage_branches(Model<float>& model, const Tensor<float>& image) {
  Tape<float> tape(false);
  const Var x = tape.constant(image);
  const EncoderTaps taps = model.encode(tape, x, Mode::eval);
  Var prev = model.decoder_start(tape, taps);
  for (int s = 0; s < kDecoderStages - 1; ++s) {
    prev = model.decoder_stage(tape, prev, taps, s, Mode::eval);
  }
  const int last = kDecoderStages - 1;
  const Var fused = model.decoder_stage(tape, prev, taps, last, Mode::eval);

  const auto& st = model.arch().decoder[last];
  auto& params = model.params();
  Var m = prev;
  if (model.config().use_fsc) {
    const std::array<Var, 2> both{model.fsc_gather(tape, taps, last), prev};
    m = ad::concat_channels(tape, std::span<const Var>(both));
  }
  if (st.merge) m = conv_forward(tape, params, *st.merge, m);
  for (const auto& block : st.blocks) m = decoder_block_forward(tape, params, block, m, Mode::eval);
  const Var enc = conv_forward(tape, params, st.skip, taps.e[static_cast<std::size_t>(st.skip_tap)]);
  return {tape.value(fused), tape.value(enc), tape.value(m)};
}

}  // namespace lkaseg::testing_probe

#include "lkaseg/model.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "lkaseg/checkpoint.hpp"
#include "lkaseg/rng.hpp"

namespace lkaseg {

void ModelConfig::validate() const {
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("ModelConfig: encoder widths must be positive");
  }
  if (in_channels < 1) throw std::invalid_argument("ModelConfig: in_channels must be positive");
  if (num_classes < 2) throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
  if (fsc_channels < 1) throw std::invalid_argument("ModelConfig: fsc_channels must be positive");
  for (int c : decoder_channels) {
    if (c < 1) throw std::invalid_argument("ModelConfig: decoder widths must be positive");
  }
  if (decoder_depth < 1) throw std::invalid_argument("ModelConfig: decoder_depth must be >= 1");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) {
    throw std::invalid_argument("ModelConfig: bn_momentum must lie in (0, 1]");
  }
  for (int s = 0; s < kDecoderStages; ++s) lka(s).validate();
}

LkaConfig ModelConfig::lka(int stage) const {
  return LkaConfig{decoder_channels[static_cast<std::size_t>(stage)],
                   lka_kernel[static_cast<std::size_t>(stage)],
                   lka_dilation[static_cast<std::size_t>(stage)]};
}

ModelConfig ModelConfig::desk() {
  ModelConfig cfg;
  cfg.widths = {16, 32, 64, 128};
  return cfg;
}

Architecture Architecture::build(const ModelConfig& cfg) {
  cfg.validate();
  Architecture a;
  const double m = cfg.bn_momentum;
  a.stem_conv = ConvLayer{"encoder.stem.conv", cfg.in_channels, cfg.widths[0],
                          ConvSpec{7, 7, 2, 3, 1, 1}, false};
  a.stem_bn = BatchNormLayer{"encoder.stem.bn", cfg.widths[0], m};
  int in = cfg.widths[0];
  for (int s = 0; s < kEncoderStages; ++s) {
    const int w = cfg.widths[static_cast<std::size_t>(s)];
    const std::string prefix = fmt::format("encoder.layer{}", s + 1);
    a.stages[static_cast<std::size_t>(s)][0] =
        ResBlock::make(prefix + ".0", in, w, s == 0 ? 1 : 2, m);
    a.stages[static_cast<std::size_t>(s)][1] = ResBlock::make(prefix + ".1", w, w, 1, m);
    in = w;
  }

  a.start = pointwise("decoder.start", cfg.widths[3], cfg.decoder_channels[0]);
  int prev = cfg.decoder_channels[0];
  for (int s = 0; s < kDecoderStages; ++s) {
    auto& st = a.decoder[static_cast<std::size_t>(s)];
    const int cd = cfg.decoder_channels[static_cast<std::size_t>(s)];
    st.divisor = decoder_scale_divisor(s);
    st.skip_tap = 2 - s;
    const std::string prefix = fmt::format("decoder.scale{}", st.divisor);
    for (int t = 0; t < kEncoderStages; ++t) {
      st.fsc[static_cast<std::size_t>(t)] = pointwise(fmt::format("{}.fsc{}", prefix, t),
                                                      cfg.widths[static_cast<std::size_t>(t)],
                                                      cfg.fsc_channels);
    }
    if (cfg.use_fsc) {
      st.merge = pointwise(prefix + ".merge", kEncoderStages * cfg.fsc_channels + prev, cd);
    } else if (prev != cd) {
      st.merge = pointwise(prefix + ".merge", prev, cd);
    }
    for (int b = 0; b < cfg.decoder_depth; ++b) {
      st.blocks.push_back(DecoderBlock::make(fmt::format("{}.block{}", prefix, b), cfg.lka(s), m));
    }
    st.skip = pointwise(prefix + ".skip", cfg.widths[static_cast<std::size_t>(st.skip_tap)], cd);
    st.gate = prefix + ".gate";
    prev = cd;
  }

  const int last = cfg.decoder_channels[kDecoderStages - 1];
  a.head_conv = ConvLayer{"head.conv", last, last, ConvSpec::same(3), false};
  a.head_bn = BatchNormLayer{"head.bn", last, m};
  a.classifier = pointwise("head.classifier", last, cfg.num_classes);
  return a;
}

namespace {

template <typename T>
void init_parameters(ParamStore<T>& store, const ModelConfig& cfg, const Architecture& a,
                     Rng& rng) {
  init_conv(store, a.stem_conv, rng);
  init_batch_norm(store, a.stem_bn);
  for (const auto& stage : a.stages) {
    for (const auto& block : stage) init_resblock(store, block, rng);
  }
  init_conv(store, a.start, rng);
  for (const auto& st : a.decoder) {
    if (cfg.use_fsc) {
      for (const auto& p : st.fsc) init_conv(store, p, rng);
    }
    if (st.merge) init_conv(store, *st.merge, rng);
    for (const auto& b : st.blocks) init_decoder_block(store, b, rng);
    init_conv(store, st.skip, rng);
    // raw 0 -> alpha 0.5
    store.add(st.gate, Tensor<T>(Shape{1, 1, 1, 1}), ParamKind::trainable, false);
  }
  init_conv(store, a.head_conv, rng);
  init_batch_norm(store, a.head_bn);
  init_conv(store, a.classifier, rng);
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), arch_(Architecture::build(cfg_)) {
  Rng rng = Rng::substream(seed, "init");
  init_parameters(params_, cfg_, arch_, rng);
}

template <typename T>
Model<T>::Model(ModelConfig cfg, const ParamStore<T>& checkpoint) : Model(std::move(cfg), 0) {
  assign_checkpoint(params_, checkpoint);
}

template <typename T>
void Model<T>::check_input(const Shape& s) const {
  if (s.c != cfg_.in_channels) {
    throw ShapeError(fmt::format("model: image has {} channels, expected {}", s.c,
                                 cfg_.in_channels));
  }
  if (s.h % kInputMultiple != 0 || s.w % kInputMultiple != 0) {
    throw ShapeError(fmt::format("model: image {}x{} is not divisible by {}", s.h, s.w,
                                 kInputMultiple));
  }
}

template <typename T>
EncoderTaps Model<T>::encode(Tape<T>& tape, Var image, Mode mode) {
  check_input(tape.value(image).shape());
  Var x = conv_forward(tape, params_, arch_.stem_conv, image);
  x = batch_norm_forward(tape, params_, arch_.stem_bn, x, mode);
  x = ad::activation(tape, x, Activation::relu);
  x = ad::max_pool2d(tape, x, 3, 2, 1);
  EncoderTaps taps;
  for (int s = 0; s < kEncoderStages; ++s) {
    for (const auto& block : arch_.stages[static_cast<std::size_t>(s)]) {
      x = resblock_forward(tape, params_, block, x, mode);
    }
    taps.e[static_cast<std::size_t>(s)] = x;
  }
  return taps;
}

template <typename T>
Var Model<T>::fsc_gather(Tape<T>& tape, const EncoderTaps& taps, int stage) {
  const auto& st = arch_.decoder[static_cast<std::size_t>(stage)];
  const Shape e1 = tape.value(taps.e[0]).shape();
  const std::int64_t th = e1.h * encoder_scale_divisor(0) / st.divisor;
  const std::int64_t tw = e1.w * encoder_scale_divisor(0) / st.divisor;
  std::array<Var, kEncoderStages> parts;
  for (int t = 0; t < kEncoderStages; ++t) {
    Var e = taps.e[static_cast<std::size_t>(t)];
    const std::int64_t h = tape.value(e).h();
    if (h > th) {
      const int ratio = static_cast<int>(h / th);
      e = ad::max_pool2d(tape, e, ratio, ratio);
    } else if (h < th) {
      e = ad::bilinear_resize(tape, e, th, tw);
    }
    parts[static_cast<std::size_t>(t)] =
        conv_forward(tape, params_, st.fsc[static_cast<std::size_t>(t)], e);
  }
  return ad::concat_channels(tape, std::span<const Var>(parts));
}

template <typename T>
Var Model<T>::decoder_start(Tape<T>& tape, const EncoderTaps& taps) {
  Var x = conv_forward(tape, params_, arch_.start, taps.e[3]);
  const Shape s = tape.value(x).shape();
  return ad::bilinear_resize(tape, x, s.h * 2, s.w * 2);
}

template <typename T>
Var Model<T>::decoder_stage(Tape<T>& tape, Var prev, const EncoderTaps& taps, int stage,
                            Mode mode) {
  if (stage < 0 || stage >= kDecoderStages) throw std::out_of_range("decoder_stage: bad index");
  const auto& st = arch_.decoder[static_cast<std::size_t>(stage)];
  const Var skip_tap = taps.e[static_cast<std::size_t>(st.skip_tap)];
  const Shape ps = tape.value(prev).shape();
  const Shape ts = tape.value(skip_tap).shape();
  if (ps.h != ts.h || ps.w != ts.w) {
    throw ShapeError(fmt::format("decoder stage 1/{}: previous state {} is not at the stage scale "
                                 "{}x{}",
                                 st.divisor, ps.str(), ts.h, ts.w));
  }

  Var m = prev;
  if (cfg_.use_fsc) {
    const std::array<Var, 2> both{fsc_gather(tape, taps, stage), prev};
    m = ad::concat_channels(tape, std::span<const Var>(both));
  }
  if (st.merge) m = conv_forward(tape, params_, *st.merge, m);
  Var decoded = m;
  for (const auto& block : st.blocks) {
    decoded = decoder_block_forward(tape, params_, block, decoded, mode);
  }
  Var encoded = conv_forward(tape, params_, st.skip, skip_tap);
  Var fused = forced_alpha_
                  ? ad::fixed_blend(tape, encoded, decoded, *forced_alpha_)
                  : ad::gated_blend(tape, encoded, decoded, tape.param(params_, st.gate));
  if (stage == kDecoderStages - 1) return fused;
  return ad::bilinear_resize(tape, fused, ts.h * 2, ts.w * 2);
}

template <typename T>
Var Model<T>::head(Tape<T>& tape, Var features, Mode mode, std::int64_t out_h,
                   std::int64_t out_w) {
  Var h = conv_forward(tape, params_, arch_.head_conv, features);
  h = batch_norm_forward(tape, params_, arch_.head_bn, h, mode);
  h = ad::activation(tape, h, Activation::relu);
  h = conv_forward(tape, params_, arch_.classifier, h);
  return ad::bilinear_resize(tape, h, out_h, out_w);
}

template <typename T>
Var Model<T>::forward(Tape<T>& tape, Var image, Mode mode) {
  const Shape in = tape.value(image).shape();
  const EncoderTaps taps = encode(tape, image, mode);
  Var x = decoder_start(tape, taps);
  for (int s = 0; s < kDecoderStages; ++s) x = decoder_stage(tape, x, taps, s, mode);
  return head(tape, x, mode, in.h, in.w);
}

template <typename T>
Tensor<T> Model<T>::logits(const Tensor<T>& image, Mode mode) {
  Tape<T> tape(false);
  return tape.value(forward(tape, tape.constant(image), mode));
}

template <typename T>
LabelMap Model<T>::predict(const Tensor<T>& image) {
  return argmax_channels(logits(image, Mode::eval));
}

template <typename T>
double Model<T>::gate_raw(int stage) const {
  return params_.value(arch_.decoder.at(static_cast<std::size_t>(stage)).gate)[0];
}

template <typename T>
double Model<T>::gate_alpha(int stage) const {
  const double r = gate_raw(stage);
  return 1.0 / (1.0 + std::exp(-r));
}

template class Model<float>;
template class Model<double>;

}  // namespace lkaseg

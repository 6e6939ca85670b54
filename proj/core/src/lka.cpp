#include "lkaseg/lka.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace lkaseg {

void LkaConfig::validate() const {
  if (channels < 1) throw std::invalid_argument("LkaConfig: channels must be positive");
  if (kernel < 3 || kernel % 2 == 0) {
    throw std::invalid_argument(fmt::format("LkaConfig: kernel {} must be odd and >= 3", kernel));
  }
  if (dilation < 1 || dilation > kernel) {
    throw std::invalid_argument(
        fmt::format("LkaConfig: dilation {} must lie in [1, {}]", dilation, kernel));
  }
}

std::int64_t lka_param_count(const LkaConfig& cfg) {
  cfg.validate();
  const std::int64_t c = cfg.channels;
  const std::int64_t kl = cfg.local_kernel();
  const std::int64_t kd = cfg.dilated_kernel();
  return c * kl * kl + c * kd * kd + c * c + 3 * c;
}

std::int64_t dense_kernel_param_count(const LkaConfig& cfg) {
  const std::int64_t c = cfg.channels;
  const std::int64_t k = cfg.kernel;
  return k * k * c * c;
}

namespace {

ConvSpec depthwise_local(const LkaConfig& cfg) {
  return ConvSpec::same(cfg.local_kernel(), 1, cfg.channels);
}

ConvSpec depthwise_dilated(const LkaConfig& cfg) {
  return ConvSpec::same(cfg.dilated_kernel(), cfg.dilation, cfg.channels);
}

}  // namespace

template <typename T>
LkaParams<T> LkaParams<T>::zeros(const LkaConfig& cfg) {
  cfg.validate();
  const std::int64_t c = cfg.channels;
  const std::int64_t kl = cfg.local_kernel();
  const std::int64_t kd = cfg.dilated_kernel();
  const Shape bias{c, 1, 1, 1};
  return LkaParams{Tensor<T>(Shape{c, 1, kl, kl}), Tensor<T>(bias),
                   Tensor<T>(Shape{c, 1, kd, kd}), Tensor<T>(bias),
                   Tensor<T>(Shape{c, c, 1, 1}),   Tensor<T>(bias)};
}

template <typename T>
LkaParams<T> LkaParams<T>::identity(const LkaConfig& cfg) {
  LkaParams p = zeros(cfg);
  const int cl = cfg.local_kernel() / 2;
  const int cd = cfg.dilated_kernel() / 2;
  for (int c = 0; c < cfg.channels; ++c) {
    p.dw_weight.at(c, 0, cl, cl) = T(1);
    p.dwd_weight.at(c, 0, cd, cd) = T(1);
    p.pw_weight.at(c, c, 0, 0) = T(1);
  }
  return p;
}

template <typename T>
LkaParams<T> LkaParams<T>::random(const LkaConfig& cfg, Rng& rng) {
  LkaParams p = zeros(cfg);
  for (Tensor<T>* t : {&p.dw_weight, &p.dw_bias, &p.dwd_weight, &p.dwd_bias, &p.pw_weight,
                       &p.pw_bias}) {
    for (T& v : t->data()) v = static_cast<T>(rng.uniform(-0.5, 0.5));
  }
  return p;
}

LkaBlock LkaBlock::make(std::string name, const LkaConfig& cfg) {
  cfg.validate();
  LkaBlock b;
  b.name = name;
  b.cfg = cfg;
  b.dw = ConvLayer{name + ".dw", cfg.channels, cfg.channels, depthwise_local(cfg), true};
  b.dwd = ConvLayer{name + ".dwd", cfg.channels, cfg.channels, depthwise_dilated(cfg), true};
  b.pw = pointwise(name + ".pw", cfg.channels, cfg.channels);
  return b;
}

template <typename T>
Var lka_apply(Tape<T>& tape, Var f, const LkaConfig& cfg, Var dw_weight, Var dw_bias,
              Var dwd_weight, Var dwd_bias, Var pw_weight, Var pw_bias) {
  if (tape.value(f).c() != cfg.channels) {
    throw ShapeError(fmt::format("lka: input has {} channels, block expects {}",
                                 tape.value(f).c(), cfg.channels));
  }
  Var a = ad::conv2d(tape, f, dw_weight, dw_bias, depthwise_local(cfg));
  a = ad::conv2d(tape, a, dwd_weight, dwd_bias, depthwise_dilated(cfg));
  a = ad::conv2d(tape, a, pw_weight, pw_bias, ConvSpec{});
  return ad::mul(tape, a, f);
}

template <typename T>
Var lka_forward(Tape<T>& tape, ParamStore<T>& store, const LkaBlock& block, Var f) {
  return lka_apply(tape, f, block.cfg, tape.param(store, block.dw.weight_name()),
                   tape.param(store, block.dw.bias_name()),
                   tape.param(store, block.dwd.weight_name()),
                   tape.param(store, block.dwd.bias_name()),
                   tape.param(store, block.pw.weight_name()),
                   tape.param(store, block.pw.bias_name()));
}

template <typename T>
Tensor<T> lka_forward(const Tensor<T>& f, const LkaParams<T>& p, const LkaConfig& cfg) {
  Tape<T> tape(false);
  Var out = lka_apply(tape, tape.constant(f), cfg, tape.constant(p.dw_weight),
                      tape.constant(p.dw_bias), tape.constant(p.dwd_weight),
                      tape.constant(p.dwd_bias), tape.constant(p.pw_weight),
                      tape.constant(p.pw_bias));
  return tape.value(out);
}

template <typename T>
void init_lka(ParamStore<T>& store, const LkaBlock& block, Rng& rng) {
  init_conv(store, block.dw, rng);
  init_conv(store, block.dwd, rng);
  init_conv(store, block.pw, rng);
}

DecoderBlock DecoderBlock::make(std::string name, const LkaConfig& cfg, double bn_momentum) {
  DecoderBlock b;
  b.name = name;
  b.bn = BatchNormLayer{name + ".bn", cfg.channels, bn_momentum};
  b.pw1 = pointwise(name + ".pw1", cfg.channels, cfg.channels);
  b.lka = LkaBlock::make(name + ".lka", cfg);
  b.pw2 = pointwise(name + ".pw2", cfg.channels, cfg.channels);
  return b;
}

template <typename T>
void init_decoder_block(ParamStore<T>& store, const DecoderBlock& block, Rng& rng) {
  init_batch_norm(store, block.bn);
  init_conv(store, block.pw1, rng);
  init_lka(store, block.lka, rng);
  init_conv(store, block.pw2, rng);
}

template <typename T>
Var decoder_block_forward(Tape<T>& tape, ParamStore<T>& store, const DecoderBlock& block, Var x,
                          Mode mode) {
  Var h = batch_norm_forward(tape, store, block.bn, x, mode);
  h = conv_forward(tape, store, block.pw1, h);
  h = lka_forward(tape, store, block.lka, h);
  h = ad::activation(tape, h, Activation::gelu);
  h = conv_forward(tape, store, block.pw2, h);
  return ad::add(tape, x, h);
}

#define LKASEG_INSTANTIATE_LKA(T)                                                          \
  template struct LkaParams<T>;                                                           \
  template Var lka_apply(Tape<T>&, Var, const LkaConfig&, Var, Var, Var, Var, Var, Var);  \
  template Var lka_forward(Tape<T>&, ParamStore<T>&, const LkaBlock&, Var);               \
  template Tensor<T> lka_forward(const Tensor<T>&, const LkaParams<T>&, const LkaConfig&); \
  template void init_lka(ParamStore<T>&, const LkaBlock&, Rng&);                          \
  template void init_decoder_block(ParamStore<T>&, const DecoderBlock&, Rng&);            \
  template Var decoder_block_forward(Tape<T>&, ParamStore<T>&, const DecoderBlock&, Var,  \
                                     Mode);

LKASEG_INSTANTIATE_LKA(float)
LKASEG_INSTANTIATE_LKA(double)

}  // namespace lkaseg

#include "lkaseg/nn.hpp"

#include <cmath>

namespace lkaseg {

ConvLayer pointwise(std::string name, int in_channels, int out_channels, bool bias) {
  return ConvLayer{std::move(name), in_channels, out_channels, ConvSpec{}, bias};
}

ResBlock ResBlock::make(std::string name, int in_channels, int out_channels, int stride,
                        double bn_momentum) {
  ResBlock b;
  b.name = name;
  b.in_channels = in_channels;
  b.out_channels = out_channels;
  b.stride = stride;
  b.conv1 = ConvLayer{name + ".conv1", in_channels, out_channels,
                      ConvSpec{3, 3, stride, 1, 1, 1}, false};
  b.bn1 = BatchNormLayer{name + ".bn1", out_channels, bn_momentum};
  b.conv2 = ConvLayer{name + ".conv2", out_channels, out_channels, ConvSpec::same(3), false};
  b.bn2 = BatchNormLayer{name + ".bn2", out_channels, bn_momentum};
  if (stride != 1 || in_channels != out_channels) {
    b.proj = ConvLayer{name + ".proj", in_channels, out_channels, ConvSpec{1, 1, stride, 0, 1, 1},
                       false};
    b.proj_bn = BatchNormLayer{name + ".proj_bn", out_channels, bn_momentum};
  }
  return b;
}

template <typename T>
void init_conv(ParamStore<T>& store, const ConvLayer& layer, Rng& rng) {
  const Shape ws = layer.weight_shape();
  Tensor<T> w(ws);
  const double fan_in = static_cast<double>(ws.c * ws.h * ws.w);
  const double bound = std::sqrt(6.0 / fan_in);
  for (T& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  store.add(layer.weight_name(), std::move(w));
  if (layer.bias) store.add(layer.bias_name(), Tensor<T>(Shape{layer.out_channels, 1, 1, 1}));
}

template <typename T>
void init_batch_norm(ParamStore<T>& store, const BatchNormLayer& layer) {
  const Shape s{layer.channels, 1, 1, 1};
  store.add(layer.name + ".gamma", Tensor<T>::ones(s), ParamKind::trainable, false);
  store.add(layer.name + ".beta", Tensor<T>::zeros(s), ParamKind::trainable, false);
  store.add(layer.name + ".running_mean", Tensor<T>::zeros(s), ParamKind::buffer);
  store.add(layer.name + ".running_var", Tensor<T>::ones(s), ParamKind::buffer);
}

template <typename T>
void init_resblock(ParamStore<T>& store, const ResBlock& block, Rng& rng) {
  init_conv(store, block.conv1, rng);
  init_batch_norm(store, block.bn1);
  init_conv(store, block.conv2, rng);
  init_batch_norm(store, block.bn2);
  if (block.proj) {
    init_conv(store, *block.proj, rng);
    init_batch_norm(store, *block.proj_bn);
  }
}

template <typename T>
Var conv_forward(Tape<T>& tape, ParamStore<T>& store, const ConvLayer& layer, Var x) {
  Var w = tape.param(store, layer.weight_name());
  std::optional<Var> b;
  if (layer.bias) b = tape.param(store, layer.bias_name());
  return ad::conv2d(tape, x, w, b, layer.spec);
}

template <typename T>
Var batch_norm_forward(Tape<T>& tape, ParamStore<T>& store, const BatchNormLayer& layer, Var x,
                       Mode mode) {
  Var gamma = tape.param(store, layer.name + ".gamma");
  Var beta = tape.param(store, layer.name + ".beta");
  return ad::batch_norm(tape, x, gamma, beta, store.value(layer.name + ".running_mean"),
                        store.value(layer.name + ".running_var"), mode, layer.momentum,
                        layer.epsilon);
}

template <typename T>
Var resblock_forward(Tape<T>& tape, ParamStore<T>& store, const ResBlock& block, Var x,
                     Mode mode) {
  if (tape.value(x).c() != block.in_channels) {
    throw ShapeError(block.name + ": input channel count does not match block");
  }
  Var h = conv_forward(tape, store, block.conv1, x);
  h = batch_norm_forward(tape, store, block.bn1, h, mode);
  h = ad::activation(tape, h, Activation::relu);
  h = conv_forward(tape, store, block.conv2, h);
  h = batch_norm_forward(tape, store, block.bn2, h, mode);
  Var shortcut = x;
  if (block.proj) {
    shortcut = conv_forward(tape, store, *block.proj, x);
    shortcut = batch_norm_forward(tape, store, *block.proj_bn, shortcut, mode);
  }
  return ad::activation(tape, ad::add(tape, h, shortcut), Activation::relu);
}

template <typename T>
Tensor<T> linear_project(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias) {
  if (weight.h() != 1 || weight.w() != 1) throw ShapeError("linear_project: weight must be 1x1");
  return conv2d(x, weight, bias, ConvSpec{});
}

#define LKASEG_INSTANTIATE_NN(T)                                                           \
  template void init_conv(ParamStore<T>&, const ConvLayer&, Rng&);                        \
  template void init_batch_norm(ParamStore<T>&, const BatchNormLayer&);                   \
  template void init_resblock(ParamStore<T>&, const ResBlock&, Rng&);                     \
  template Var conv_forward(Tape<T>&, ParamStore<T>&, const ConvLayer&, Var);             \
  template Var batch_norm_forward(Tape<T>&, ParamStore<T>&, const BatchNormLayer&, Var,   \
                                  Mode);                                                    \
  template Var resblock_forward(Tape<T>&, ParamStore<T>&, const ResBlock&, Var, Mode);    \
  template Tensor<T> linear_project(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);

LKASEG_INSTANTIATE_NN(float)
LKASEG_INSTANTIATE_NN(double)

}  // namespace lkaseg

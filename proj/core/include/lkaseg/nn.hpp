#pragma once

#include <optional>
#include <string>

#include "lkaseg/autodiff.hpp"
#include "lkaseg/ops.hpp"
#include "lkaseg/param_store.hpp"
#include "lkaseg/rng.hpp"

// Layers are plain descriptions (names + hyperparameters). Their tensors live
// in a ParamStore under "<name>.weight", "<name>.bias", and for batch norm
// "<name>.gamma", "<name>.beta", "<name>.running_mean", "<name>.running_var".

namespace lkaseg {

struct ConvLayer {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  ConvSpec spec;
  bool bias = true;

  [[nodiscard]] std::string weight_name() const { return name + ".weight"; }
  [[nodiscard]] std::string bias_name() const { return name + ".bias"; }
  [[nodiscard]] Shape weight_shape() const {
    return Shape{out_channels, in_channels / spec.groups, spec.kernel_h, spec.kernel_w};
  }
};

/// 1x1 convolution acting as a per-pixel linear map across channels.
ConvLayer pointwise(std::string name, int in_channels, int out_channels, bool bias = true);

struct BatchNormLayer {
  std::string name;
  int channels = 0;
  double momentum = 0.1;
  double epsilon = 1e-5;
};

/// Basic residual block: conv3x3-BN-ReLU-conv3x3-BN plus shortcut, then ReLU.
/// A 1x1 projection (conv + BN) replaces the identity shortcut when the
/// stride or width changes.
struct ResBlock {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  ConvLayer conv1;
  BatchNormLayer bn1;
  ConvLayer conv2;
  BatchNormLayer bn2;
  std::optional<ConvLayer> proj;
  std::optional<BatchNormLayer> proj_bn;

  static ResBlock make(std::string name, int in_channels, int out_channels, int stride,
                       double bn_momentum = 0.1);
};

// Initialization: fan-in scaled uniform weights (He), zero biases, unit gamma,
// zero beta, running mean 0 / variance 1.
template <typename T>
void init_conv(ParamStore<T>& store, const ConvLayer& layer, Rng& rng);
template <typename T>
void init_batch_norm(ParamStore<T>& store, const BatchNormLayer& layer);
template <typename T>
void init_resblock(ParamStore<T>& store, const ResBlock& block, Rng& rng);

template <typename T>
Var conv_forward(Tape<T>& tape, ParamStore<T>& store, const ConvLayer& layer, Var x);
template <typename T>
Var batch_norm_forward(Tape<T>& tape, ParamStore<T>& store, const BatchNormLayer& layer, Var x,
                       Mode mode);
template <typename T>
Var resblock_forward(Tape<T>& tape, ParamStore<T>& store, const ResBlock& block, Var x,
                     Mode mode);

/// Per-pixel channel map with a [C_out, C_in, 1, 1] weight. `bias` may be null.
template <typename T>
Tensor<T> linear_project(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias);

}  // namespace lkaseg

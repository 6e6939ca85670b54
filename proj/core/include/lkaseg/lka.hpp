#pragma once

#include <cstdint>
#include <string>

#include "lkaseg/autodiff.hpp"
#include "lkaseg/nn.hpp"

namespace lkaseg {

/// Large-kernel attention geometry.
///
/// A nominal K x K kernel is decomposed into a (2d-1) x (2d-1) depthwise
/// conv, a depthwise conv of size ceil(K/d) (bumped to odd) with dilation d,
/// and a 1x1 conv. The composed receptive field is
/// R = (2d-1) + d * (k_dil - 1), which is not K in general (K=21, d=3 gives 23).
struct LkaConfig {
  int channels = 64;
  int kernel = 21;
  int dilation = 3;

  [[nodiscard]] int local_kernel() const { return 2 * dilation - 1; }
  [[nodiscard]] int dilated_kernel() const {
    int k = (kernel + dilation - 1) / dilation;
    return k % 2 == 0 ? k + 1 : k;
  }
  [[nodiscard]] int receptive_field() const {
    return local_kernel() + dilation * (dilated_kernel() - 1);
  }
  /// Throws std::invalid_argument for channels < 1, even or < 3 kernel, or a
  /// dilation outside [1, kernel].
  void validate() const;
};

/// Weights plus biases of the three convolutions.
std::int64_t lka_param_count(const LkaConfig& cfg);

/// Weights of the dense K x K conv (C -> C) the decomposition stands in for.
std::int64_t dense_kernel_param_count(const LkaConfig& cfg);

/// Explicit parameter set, for using the block outside a ParamStore.
template <typename T>
struct LkaParams {
  Tensor<T> dw_weight;   // [C, 1, k_local, k_local]
  Tensor<T> dw_bias;     // [C]
  Tensor<T> dwd_weight;  // [C, 1, k_dil, k_dil]
  Tensor<T> dwd_bias;
  Tensor<T> pw_weight;   // [C, C, 1, 1]
  Tensor<T> pw_bias;

  /// Centered unit impulses and identity pointwise map: attention == F.
  static LkaParams identity(const LkaConfig& cfg);
  static LkaParams zeros(const LkaConfig& cfg);
  static LkaParams random(const LkaConfig& cfg, Rng& rng);
};

struct LkaBlock {
  std::string name;
  LkaConfig cfg;
  ConvLayer dw;
  ConvLayer dwd;
  ConvLayer pw;

  static LkaBlock make(std::string name, const LkaConfig& cfg);
};

/// Attention = pw(dwd(dw(F))); output = Attention * F.
template <typename T>
Var lka_apply(Tape<T>& tape, Var f, const LkaConfig& cfg, Var dw_weight, Var dw_bias,
              Var dwd_weight, Var dwd_bias, Var pw_weight, Var pw_bias);

template <typename T>
Var lka_forward(Tape<T>& tape, ParamStore<T>& store, const LkaBlock& block, Var f);

template <typename T>
Tensor<T> lka_forward(const Tensor<T>& f, const LkaParams<T>& params, const LkaConfig& cfg);

template <typename T>
void init_lka(ParamStore<T>& store, const LkaBlock& block, Rng& rng);

/// Residual attention block around LKA:
/// y = x + pw2(GELU(LKA(pw1(BN(x))))).
struct DecoderBlock {
  std::string name;
  BatchNormLayer bn;
  ConvLayer pw1;
  LkaBlock lka;
  ConvLayer pw2;

  static DecoderBlock make(std::string name, const LkaConfig& cfg, double bn_momentum = 0.1);
};

template <typename T>
void init_decoder_block(ParamStore<T>& store, const DecoderBlock& block, Rng& rng);

template <typename T>
Var decoder_block_forward(Tape<T>& tape, ParamStore<T>& store, const DecoderBlock& block, Var x,
                          Mode mode);

}  // namespace lkaseg

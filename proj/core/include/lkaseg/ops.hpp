#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "lkaseg/labels.hpp"
#include "lkaseg/tensor.hpp"

// Pure tensor kernels and their adjoints. Forward ops allocate their output;
// adjoints take the upstream gradient and return input gradients. Nothing in
// here records graph state; see autodiff.hpp for that.

namespace lkaseg {

enum class Mode { train, eval };

struct ConvSpec {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  int groups = 1;

  /// Square kernel with the padding that preserves spatial size at stride 1.
  static ConvSpec same(int kernel, int dilation = 1, int groups = 1) {
    return ConvSpec{kernel, kernel, 1, dilation * (kernel - 1) / 2, dilation, groups};
  }

  [[nodiscard]] std::int64_t out_h(std::int64_t in) const {
    return (in + 2 * padding - dilation * (kernel_h - 1) - 1) / stride + 1;
  }
  [[nodiscard]] std::int64_t out_w(std::int64_t in) const {
    return (in + 2 * padding - dilation * (kernel_w - 1) - 1) / stride + 1;
  }
};

// ---- convolution ----------------------------------------------------------

/// Grouped, dilated, zero-padded 2-D cross-correlation. `bias` may be null.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                 const ConvSpec& spec);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;  // empty when the forward had no bias
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, bool has_bias,
                               const Tensor<T>& grad_out, const ConvSpec& spec);

// ---- pooling / resampling ---------------------------------------------------

/// Max over kernel x kernel windows starting at `out_index * stride - padding`.
/// Padded positions never win.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input, int kernel, int stride, int padding = 0);

template <typename T>
Tensor<T> max_pool2d_backward(const Tensor<T>& input, const Tensor<T>& grad_out, int kernel,
                              int stride, int padding = 0);

/// Bilinear resampling with half-pixel centres and edge clamping.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, std::int64_t out_h, std::int64_t out_w);

template <typename T>
Tensor<T> bilinear_resize_backward(const Tensor<T>& grad_out, std::int64_t in_h,
                                   std::int64_t in_w);

// ---- normalization ----------------------------------------------------------

template <typename T>
struct BatchNormForward {
  Tensor<T> output;
  std::vector<double> mean;     // statistics actually used, per channel
  std::vector<double> inv_std;
};

/// Per-channel batch normalization. Train mode normalizes with biased batch
/// statistics and folds them into the running buffers (unbiased variance);
/// eval mode reads the running buffers only.
template <typename T>
BatchNormForward<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                               const Tensor<T>& beta, Tensor<T>& running_mean,
                               Tensor<T>& running_var, Mode mode, double momentum,
                               double epsilon);

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batch_norm_backward(const Tensor<T>& input, const Tensor<T>& gamma,
                                      const BatchNormForward<T>& forward,
                                      const Tensor<T>& grad_out, Mode mode);

// ---- elementwise --------------------------------------------------------------

enum class Activation { relu, gelu, sigmoid };

template <typename T>
Tensor<T> activation(const Tensor<T>& input, Activation kind);

template <typename T>
Tensor<T> activation_backward(const Tensor<T>& input, const Tensor<T>& output,
                              const Tensor<T>& grad_out, Activation kind);

enum class Elementwise { add, mul };

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, Elementwise kind);

// ---- channel layout -----------------------------------------------------------

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts);

template <typename T>
Tensor<T> concat_channels(std::initializer_list<const Tensor<T>*> parts) {
  return concat_channels<T>(std::span<const Tensor<T>* const>(parts.begin(), parts.size()));
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::int64_t begin, std::int64_t count);

// ---- loss -------------------------------------------------------------------

template <typename T>
struct CrossEntropyResult {
  double loss = 0.0;
  Tensor<T> grad;        // d loss / d logits
  std::int64_t counted = 0;
};

/// Mean pixelwise softmax cross-entropy over pixels whose label differs from
/// `ignore_label`.
template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>& logits, const LabelMap& labels,
                                            std::int32_t ignore_label = kIgnoreLabel);

/// Per-pixel argmax over channels.
template <typename T>
LabelMap argmax_channels(const Tensor<T>& logits);

}  // namespace lkaseg

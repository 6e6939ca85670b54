#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lkaseg/autodiff.hpp"
#include "lkaseg/labels.hpp"
#include "lkaseg/lka.hpp"
#include "lkaseg/nn.hpp"
#include "lkaseg/param_store.hpp"

namespace lkaseg {

inline constexpr int kEncoderStages = 4;
inline constexpr int kDecoderStages = 3;
/// Input height and width must be multiples of this (deepest tap is 1/32).
inline constexpr int kInputMultiple = 32;

struct ModelConfig {
  std::array<int, kEncoderStages> widths{64, 128, 256, 512};
  int in_channels = 3;
  int num_classes = 6;
  /// Channel width every encoder tap is projected to inside a skip gather.
  int fsc_channels = 64;
  /// Decoder width per stage, ordered 1/16, 1/8, 1/4.
  std::array<int, kDecoderStages> decoder_channels{64, 64, 64};
  std::array<int, kDecoderStages> lka_kernel{21, 21, 21};
  std::array<int, kDecoderStages> lka_dilation{3, 3, 3};
  /// Attention blocks per decoder stage.
  int decoder_depth = 1;
  /// When false, decoder stages see only the previous decoder state.
  bool use_fsc = true;
  double bn_momentum = 0.1;

  void validate() const;
  [[nodiscard]] LkaConfig lka(int stage) const;

  /// Quarter-width variant for desk-scale experiments.
  static ModelConfig desk();
};

/// Spatial divisor of decoder stage `stage` (16, 8, 4).
constexpr int decoder_scale_divisor(int stage) { return 16 >> stage; }
/// Spatial divisor of encoder tap `tap` (4, 8, 16, 32).
constexpr int encoder_scale_divisor(int tap) { return 4 << tap; }

/// Named layer layout derived from a ModelConfig. Parameter registration,
/// the forward pass and cost accounting all walk this in the same order.
struct Architecture {
  struct DecoderStage {
    int divisor = 0;
    int skip_tap = 0;  // encoder tap at this stage's scale
    std::array<ConvLayer, kEncoderStages> fsc;
    std::optional<ConvLayer> merge;
    std::vector<DecoderBlock> blocks;
    ConvLayer skip;
    std::string gate;
  };

  ConvLayer stem_conv;
  BatchNormLayer stem_bn;
  std::array<std::array<ResBlock, 2>, kEncoderStages> stages;
  ConvLayer start;
  std::array<DecoderStage, kDecoderStages> decoder;
  ConvLayer head_conv;
  BatchNormLayer head_bn;
  ConvLayer classifier;

  static Architecture build(const ModelConfig& cfg);
};

struct EncoderTaps {
  std::array<Var, kEncoderStages> e;  // 1/4, 1/8, 1/16, 1/32
};

template <typename T>
class Model {
 public:
  /// Fresh parameters drawn from the "init" substream of `seed`.
  Model(ModelConfig cfg, std::uint64_t seed);
  /// Parameters taken from a checkpoint; names and shapes must match.
  Model(ModelConfig cfg, const ParamStore<T>& checkpoint);

  [[nodiscard]] const ModelConfig& config() const { return cfg_; }
  [[nodiscard]] const Architecture& arch() const { return arch_; }
  [[nodiscard]] ParamStore<T>& params() { return params_; }
  [[nodiscard]] const ParamStore<T>& params() const { return params_; }

  EncoderTaps encode(Tape<T>& tape, Var image, Mode mode);
  /// Rescale every tap to decoder stage `stage`'s grid, project each to
  /// fsc_channels, and concatenate in tap order.
  Var fsc_gather(Tape<T>& tape, const EncoderTaps& taps, int stage);
  /// Projected deepest tap, upsampled x2: the first decoder stage's input.
  Var decoder_start(Tape<T>& tape, const EncoderTaps& taps);
  Var decoder_stage(Tape<T>& tape, Var prev, const EncoderTaps& taps, int stage, Mode mode);
  Var head(Tape<T>& tape, Var features, Mode mode, std::int64_t out_h, std::int64_t out_w);
  Var forward(Tape<T>& tape, Var image, Mode mode);

  /// Inference without gradient bookkeeping.
  Tensor<T> logits(const Tensor<T>& image, Mode mode = Mode::eval);
  LabelMap predict(const Tensor<T>& image);

  [[nodiscard]] double gate_raw(int stage) const;
  [[nodiscard]] double gate_alpha(int stage) const;
  /// Test hook: blend with a fixed alpha instead of sigmoid(raw).
  void force_alpha(std::optional<T> alpha) { forced_alpha_ = alpha; }

 private:
  void check_input(const Shape& s) const;

  ModelConfig cfg_;
  Architecture arch_;
  ParamStore<T> params_;
  std::optional<T> forced_alpha_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace lkaseg

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lkaseg/dataset.hpp"
#include "lkaseg/metrics.hpp"
#include "lkaseg/model.hpp"
#include "lkaseg/param_store.hpp"

namespace lkaseg {

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 10;
  int epochs = 50;
  std::uint64_t seed = 7;
  bool eval_every_epoch = true;
  /// Apply weight decay to batch-norm affine parameters and fusion gates too.
  bool decay_norm_and_gates = false;

  void validate() const;
};

/// Momentum buffers keyed by parameter name, stored as optimizer_state
/// entries named "<param>.velocity".
template <typename T>
class SgdState {
 public:
  /// Zero buffers for every trainable entry of `params`.
  explicit SgdState(const ParamStore<T>& params);

  [[nodiscard]] ParamStore<T>& store() { return state_; }
  [[nodiscard]] const ParamStore<T>& store() const { return state_; }
  [[nodiscard]] Tensor<T>& velocity(std::string_view param);

  /// Copies optimizer_state entries from a checkpoint; shapes must match.
  void load(const ParamStore<T>& checkpoint);

  static std::string key(std::string_view param) { return std::string(param) + ".velocity"; }

 private:
  ParamStore<T> state_;
};

/// v <- momentum * v + g + wd * p;  p <- p - lr * v, over every trainable
/// entry, using the gradients held in the store. Weight decay is skipped for
/// entries flagged without decay unless cfg.decay_norm_and_gates is set.
template <typename T>
void sgd_step(ParamStore<T>& params, SgdState<T>& state, const TrainConfig& cfg);

/// Model parameters and buffers followed by optimizer state.
template <typename T>
ParamStore<T> training_checkpoint(const ParamStore<T>& params, const SgdState<T>& state);

/// One forward/backward/update on a batch; returns the mean loss.
template <typename T>
double train_step(Model<T>& model, const LabeledSample<T>& batch, SgdState<T>& state,
                  const TrainConfig& cfg);

struct EvalOptions {
  int batch_size = 10;
  std::vector<int> eval_classes;  // empty = all
  std::vector<std::string> class_names;
};

struct EvalResult {
  ConfusionMatrix confusion;
  ScoreReport scores;
};

/// Eval-mode predictions over every sample.
template <typename T>
EvalResult eval_loop(Model<T>& model, const std::vector<LabeledSample<T>>& samples,
                     const EvalOptions& options = {});

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double mean_f1 = 0.0;
  double mean_iou = 0.0;
  double overall_accuracy = 0.0;
  double seconds = 0.0;
  std::vector<double> step_losses;

  [[nodiscard]] nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_miou = -1.0;
};

struct RunOutput {
  std::filesystem::path dir;      // empty: nothing written
  nlohmann::json config_echo;     // written as config.json
};

/// Shuffles with the "shuffle" substream of cfg.seed; each epoch visits
/// every sample once in batches of cfg.batch_size (the last may be short).
/// With an output directory, writes config.json, log.jsonl, last.lkc and
/// best.lkc (highest eval mIoU so far).
template <typename T>
TrainResult train_loop(Model<T>& model, const Corpus<T>& corpus, const TrainConfig& cfg,
                       const EvalOptions& eval = {}, const RunOutput& out = {},
                       const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace lkaseg

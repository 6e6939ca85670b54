#include "lkaseg/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "lkaseg/checkpoint.hpp"

namespace lkaseg {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train: lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("train: momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
}

template <typename T>
SgdState<T>::SgdState(const ParamStore<T>& params) {
  for (const auto& e : params) {
    if (e.kind != ParamKind::trainable) continue;
    state_.add(key(e.name), Tensor<T>(e.value.shape()), ParamKind::optimizer_state, false);
  }
}

template <typename T>
Tensor<T>& SgdState<T>::velocity(std::string_view param) {
  return state_.value(key(param));
}

template <typename T>
void SgdState<T>::load(const ParamStore<T>& checkpoint) {
  for (const auto& e : state_) {
    const auto* src = checkpoint.find(e.name);
    if (src == nullptr) throw CheckpointError(fmt::format("checkpoint: missing {}", e.name));
    if (src->value.shape() != e.value.shape()) {
      throw CheckpointError(fmt::format("checkpoint: {} has shape {}, expected {}", e.name,
                                        src->value.shape().str(), e.value.shape().str()));
    }
  }
  for (auto& e : state_) e.value = checkpoint.value(e.name);
}

template <typename T>
void sgd_step(ParamStore<T>& params, SgdState<T>& state, const TrainConfig& cfg) {
  const T lr = static_cast<T>(cfg.lr);
  const T mom = static_cast<T>(cfg.momentum);
  for (auto& e : params) {
    if (e.kind != ParamKind::trainable) continue;
    Tensor<T>& v = state.velocity(e.name);
    if (v.shape() != e.value.shape() || e.grad.shape() != e.value.shape()) {
      throw ShapeError(fmt::format("sgd_step: shape mismatch for {}", e.name));
    }
    const T wd = (e.weight_decay || cfg.decay_norm_and_gates) ? static_cast<T>(cfg.weight_decay)
                                                              : T(0);
    auto p = e.value.data();
    auto g = e.grad.data();
    auto vv = v.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      vv[i] = mom * vv[i] + g[i] + wd * p[i];
      p[i] -= lr * vv[i];
    }
  }
}

template <typename T>
ParamStore<T> training_checkpoint(const ParamStore<T>& params, const SgdState<T>& state) {
  ParamStore<T> out;
  for (const auto& e : params) out.add(e.name, e.value, e.kind, e.weight_decay);
  for (const auto& e : state.store()) out.add(e.name, e.value, e.kind, false);
  return out;
}

template <typename T>
double train_step(Model<T>& model, const LabeledSample<T>& batch, SgdState<T>& state,
                  const TrainConfig& cfg) {
  Tape<T> tape(true);
  const Var logits = model.forward(tape, tape.constant(batch.image), Mode::train);
  const Var loss = ad::softmax_cross_entropy(tape, logits, batch.labels);
  const double value = static_cast<double>(tape.value(loss)[0]);
  model.params().zero_grad();
  tape.backward(loss);
  sgd_step(model.params(), state, cfg);
  return value;
}

template <typename T>
EvalResult eval_loop(Model<T>& model, const std::vector<LabeledSample<T>>& samples,
                     const EvalOptions& options) {
  if (samples.empty()) throw std::invalid_argument("eval: empty corpus");
  if (options.batch_size < 1) throw std::invalid_argument("eval: batch_size must be >= 1");
  EvalResult r{ConfusionMatrix(model.config().num_classes), {}};
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    idx.push_back(i);
    if (idx.size() == static_cast<std::size_t>(options.batch_size) || i + 1 == samples.size()) {
      const LabeledSample<T> batch = make_batch(samples, idx);
      r.confusion.accumulate(model.predict(batch.image), batch.labels);
      idx.clear();
    }
  }
  r.scores = class_scores(r.confusion, options.eval_classes, options.class_names);
  return r;
}

nlohmann::json EpochLog::to_json() const {
  return {{"epoch", epoch},   {"loss", loss},
          {"mF1", mean_f1},   {"mIoU", mean_iou},
          {"OA", overall_accuracy}, {"seconds", seconds}};
}

template <typename T>
TrainResult train_loop(Model<T>& model, const Corpus<T>& corpus, const TrainConfig& cfg,
                       const EvalOptions& eval, const RunOutput& out,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (corpus.samples.empty()) throw std::invalid_argument("train: corpus is empty");
  if (corpus.num_classes != model.config().num_classes) {
    throw std::invalid_argument(fmt::format("train: corpus has {} classes, model expects {}",
                                            corpus.num_classes, model.config().num_classes));
  }
  std::ofstream log;
  if (!out.dir.empty()) {
    std::filesystem::create_directories(out.dir);
    std::ofstream(out.dir / "config.json", std::ios::trunc) << out.config_echo.dump(2) << '\n';
    log.open(out.dir / "log.jsonl", std::ios::trunc);
    if (!log) throw std::runtime_error(fmt::format("cannot write {}", (out.dir / "log.jsonl").string()));
  }

  SgdState<T> state(model.params());
  Rng shuffle = Rng::substream(cfg.seed, "shuffle");
  TrainResult result;
  const auto n = corpus.samples.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochLog entry;
    entry.epoch = epoch;
    const std::vector<std::size_t> order = shuffled_order(n, shuffle);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(bs, n - start));
      entry.step_losses.push_back(train_step(model, make_batch(corpus.samples, idx), state, cfg));
    }
    double sum = 0.0;
    for (double l : entry.step_losses) sum += l;
    entry.loss = sum / static_cast<double>(entry.step_losses.size());

    const bool evaluate = cfg.eval_every_epoch || epoch == cfg.epochs;
    if (evaluate) {
      const EvalResult r = eval_loop(model, corpus.samples, eval);
      entry.mean_f1 = r.scores.mean_f1;
      entry.mean_iou = r.scores.mean_iou;
      entry.overall_accuracy = r.scores.overall_accuracy;
    }
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!out.dir.empty()) {
      log << entry.to_json().dump() << '\n' << std::flush;
      const ParamStore<T> ckpt = training_checkpoint(model.params(), state);
      save_checkpoint(ckpt, out.dir / "last.lkc");
      if (evaluate && entry.mean_iou > result.best_miou) save_checkpoint(ckpt, out.dir / "best.lkc");
    }
    if (evaluate && entry.mean_iou > result.best_miou) {
      result.best_miou = entry.mean_iou;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(entry);
    result.epochs.push_back(std::move(entry));
  }
  return result;
}

#define LKASEG_INSTANTIATE_TRAIN(T)                                                         \
  template class SgdState<T>;                                                               \
  template void sgd_step(ParamStore<T>&, SgdState<T>&, const TrainConfig&);                 \
  template ParamStore<T> training_checkpoint(const ParamStore<T>&, const SgdState<T>&);     \
  template double train_step(Model<T>&, const LabeledSample<T>&, SgdState<T>&,              \
                             const TrainConfig&);                                           \
  template EvalResult eval_loop(Model<T>&, const std::vector<LabeledSample<T>>&,            \
                                const EvalOptions&);                                        \
  template TrainResult train_loop(Model<T>&, const Corpus<T>&, const TrainConfig&,          \
                                  const EvalOptions&, const RunOutput&,                     \
                                  const std::function<void(const EpochLog&)>&);

LKASEG_INSTANTIATE_TRAIN(float)
LKASEG_INSTANTIATE_TRAIN(double)

}  // namespace lkaseg

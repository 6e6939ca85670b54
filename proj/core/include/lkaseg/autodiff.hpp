#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string_view>

#include "lkaseg/labels.hpp"
#include "lkaseg/ops.hpp"
#include "lkaseg/param_store.hpp"
#include "lkaseg/tensor.hpp"

namespace lkaseg {

/// Handle to a value recorded on a Tape.
struct Var {
  std::int32_t id = -1;
  [[nodiscard]] bool valid() const { return id >= 0; }
};

/// Append-only record of a forward computation.
///
/// Nodes are stored in creation order, which is a topological order: an op
/// may only consume nodes that already exist. `backward` walks the tape once
/// in reverse, calling each node's adjoint exactly once; a tape cannot be
/// replayed. Parameter leaves forward their gradient into the owning
/// ParamStore's gradient slot.
template <typename T>
class Tape {
 public:
  using Adjoint = std::function<void(Tape&, const Tensor<T>& grad_out)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value);
  /// Leaf whose gradient is collected (e.g. a network input under test).
  Var variable(Tensor<T> value);
  /// Leaf bound to a store entry; borrows the value, no copy.
  Var param(ParamStore<T>& store, std::string_view name);

  /// Record an op output. `inputs` must already be on the tape. The adjoint
  /// is dropped when no input requires a gradient.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, Adjoint adjoint,
             std::string_view op);
  Var record(Tensor<T> value, std::span<const Var> inputs, Adjoint adjoint, std::string_view op);

  [[nodiscard]] const Tensor<T>& value(Var v) const;
  /// Gradient accumulated at `v` by the last backward pass (zeros if unreached).
  [[nodiscard]] Tensor<T> grad(Var v) const;
  [[nodiscard]] bool requires_grad(Var v) const;
  [[nodiscard]] bool grad_enabled() const { return grad_enabled_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  /// Add `g` into the gradient of `v`; no-op for nodes without gradients.
  void accumulate(Var v, const Tensor<T>& g);

  /// Reverse pass seeded with ones.
  void backward(Var root);
  void backward(Var root, Tensor<T> seed);

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* borrowed = nullptr;
    Tensor<T> grad;
    Adjoint adjoint;
    Tensor<T>* sink = nullptr;
    std::string_view op;
    bool requires_grad = false;
    bool leaf = true;

    [[nodiscard]] const Tensor<T>& value() const { return borrowed ? *borrowed : owned; }
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::deque<Node> nodes_;
  bool grad_enabled_;
  bool consumed_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

/// Differentiable wrappers around the kernels in ops.hpp.
namespace ad {

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var weight, std::optional<Var> bias, const ConvSpec& spec);

template <typename T>
Var max_pool2d(Tape<T>& tape, Var input, int kernel, int stride, int padding = 0);

template <typename T>
Var bilinear_resize(Tape<T>& tape, Var input, std::int64_t out_h, std::int64_t out_w);

template <typename T>
Var batch_norm(Tape<T>& tape, Var input, Var gamma, Var beta, Tensor<T>& running_mean,
               Tensor<T>& running_var, Mode mode, double momentum, double epsilon);

template <typename T>
Var activation(Tape<T>& tape, Var input, Activation kind);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b);

template <typename T>
Var concat_channels(Tape<T>& tape, std::span<const Var> parts);

template <typename T>
Var slice_channels(Tape<T>& tape, Var input, std::int64_t begin, std::int64_t count);

/// Sum of all elements, as a 1x1x1x1 tensor.
template <typename T>
Var sum(Tape<T>& tape, Var input);

/// Sum of `input * weights`; handy for probing gradients in random directions.
template <typename T>
Var dot(Tape<T>& tape, Var input, const Tensor<T>& weights);

template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, const LabelMap& labels,
                          std::int32_t ignore_label = kIgnoreLabel);

/// `alpha * a + (1 - alpha) * b` with alpha = sigmoid(raw), raw a 1x1x1x1 node.
template <typename T>
Var gated_blend(Tape<T>& tape, Var a, Var b, Var raw);

/// Same blend with a fixed alpha (no gradient flows to alpha).
template <typename T>
Var fixed_blend(Tape<T>& tape, Var a, Var b, T alpha);

}  // namespace ad

}  // namespace lkaseg

#include "lkaseg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

namespace lkaseg {

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::out_of_range(fmt::format("Tape: invalid var {}", v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  return const_cast<Node&>(std::as_const(*this).node(v));
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::variable(Tensor<T> value) {
  Var v = constant(std::move(value));
  Node& n = node(v);
  n.op = "variable";
  n.requires_grad = grad_enabled_;
  return v;
}

template <typename T>
Var Tape<T>::param(ParamStore<T>& store, std::string_view name) {
  auto& e = store.entry(name);
  Node n;
  n.borrowed = &e.value;
  n.op = "param";
  if (grad_enabled_ && e.kind == ParamKind::trainable) {
    n.requires_grad = true;
    n.sink = &e.grad;
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, Adjoint adjoint,
                    std::string_view op) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(adjoint), op);
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, std::span<const Var> inputs, Adjoint adjoint,
                    std::string_view op) {
  if (consumed_) throw std::logic_error("Tape: cannot record after backward");
  bool needs = false;
  for (Var in : inputs) {
    // an input that does not exist yet would close a cycle
    if (in.id < 0 || static_cast<std::size_t>(in.id) >= nodes_.size()) {
      throw std::logic_error(fmt::format("Tape: op {} consumes var {} which is not yet recorded "
                                         "(graph cycle)",
                                         op, in.id));
    }
    needs = needs || nodes_[static_cast<std::size_t>(in.id)].requires_grad;
  }
  require_finite(value, op);
  Node n;
  n.owned = std::move(value);
  n.op = op;
  n.leaf = false;
  n.requires_grad = grad_enabled_ && needs;
  if (n.requires_grad) n.adjoint = std::move(adjoint);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  return node(v).value();
}

template <typename T>
Tensor<T> Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Tensor<T>(n.value().shape());
  return n.grad;
}

template <typename T>
bool Tape<T>::requires_grad(Var v) const {
  return node(v).requires_grad;
}

template <typename T>
void Tape<T>::accumulate(Var v, const Tensor<T>& g) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  require_same_shape(g.shape(), n.value().shape(), "Tape::accumulate");
  if (n.grad.empty()) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

template <typename T>
void Tape<T>::backward(Var root) {
  backward(root, Tensor<T>::ones(value(root).shape()));
}

template <typename T>
void Tape<T>::backward(Var root, Tensor<T> seed) {
  if (consumed_) throw std::logic_error("Tape: backward already ran on this tape");
  Node& r = node(root);
  if (!r.requires_grad) throw std::logic_error("Tape: backward from a node without gradient");
  require_same_shape(seed.shape(), r.value().shape(), "Tape::backward seed");
  consumed_ = true;
  r.grad = std::move(seed);
  for (std::int64_t id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.leaf) {
      if (n.sink != nullptr) *n.sink += n.grad;
      continue;
    }
    if (!n.adjoint) {
      throw std::logic_error(fmt::format("Tape: missing adjoint for op {}", n.op));
    }
    n.adjoint(*this, n.grad);
    n.adjoint = nullptr;
  }
}

template class Tape<float>;
template class Tape<double>;

namespace ad {

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var weight, std::optional<Var> bias, const ConvSpec& spec) {
  const Tensor<T>* b = bias ? &tape.value(*bias) : nullptr;
  Tensor<T> out = lkaseg::conv2d(tape.value(input), tape.value(weight), b, spec);
  std::vector<Var> ins{input, weight};
  if (bias) ins.push_back(*bias);
  return tape.record(
      std::move(out), std::span<const Var>(ins),
      [=](Tape<T>& t, const Tensor<T>& g) {
        auto grads = conv2d_backward(t.value(input), t.value(weight), bias.has_value(), g, spec);
        t.accumulate(input, grads.input);
        t.accumulate(weight, grads.weight);
        if (bias) t.accumulate(*bias, grads.bias);
      },
      "conv2d");
}

template <typename T>
Var max_pool2d(Tape<T>& tape, Var input, int kernel, int stride, int padding) {
  return tape.record(
      lkaseg::max_pool2d(tape.value(input), kernel, stride, padding), {input},
      [=](Tape<T>& t, const Tensor<T>& g) {
        t.accumulate(input, max_pool2d_backward(t.value(input), g, kernel, stride, padding));
      },
      "max_pool2d");
}

template <typename T>
Var bilinear_resize(Tape<T>& tape, Var input, std::int64_t out_h, std::int64_t out_w) {
  const Shape in = tape.value(input).shape();
  return tape.record(
      lkaseg::bilinear_resize(tape.value(input), out_h, out_w), {input},
      [=](Tape<T>& t, const Tensor<T>& g) {
        t.accumulate(input, bilinear_resize_backward(g, in.h, in.w));
      },
      "bilinear_resize");
}

template <typename T>
Var batch_norm(Tape<T>& tape, Var input, Var gamma, Var beta, Tensor<T>& running_mean,
               Tensor<T>& running_var, Mode mode, double momentum, double epsilon) {
  auto fwd = std::make_shared<BatchNormForward<T>>(
      lkaseg::batch_norm(tape.value(input), tape.value(gamma), tape.value(beta), running_mean,
                         running_var, mode, momentum, epsilon));
  Tensor<T> out = std::move(fwd->output);
  fwd->output = Tensor<T>();
  return tape.record(
      std::move(out), {input, gamma, beta},
      [=](Tape<T>& t, const Tensor<T>& g) {
        auto grads = batch_norm_backward(t.value(input), t.value(gamma), *fwd, g, mode);
        t.accumulate(input, grads.input);
        t.accumulate(gamma, grads.gamma);
        t.accumulate(beta, grads.beta);
      },
      "batch_norm");
}

template <typename T>
Var activation(Tape<T>& tape, Var input, Activation kind) {
  return tape.record(
      lkaseg::activation(tape.value(input), kind), {input},
      [=](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& x = t.value(input);
        // only the sigmoid adjoint reads the output; recompute it rather than hold a copy
        const Tensor<T> y = kind == Activation::sigmoid ? lkaseg::activation(x, kind) : Tensor<T>();
        t.accumulate(input, activation_backward(x, kind == Activation::sigmoid ? y : x, g, kind));
      },
      "activation");
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  return tape.record(
      elementwise(tape.value(a), tape.value(b), Elementwise::add), {a, b},
      [=](Tape<T>& t, const Tensor<T>& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
      },
      "add");
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  return tape.record(
      elementwise(tape.value(a), tape.value(b), Elementwise::mul), {a, b},
      [=](Tape<T>& t, const Tensor<T>& g) {
        if (t.requires_grad(a)) t.accumulate(a, elementwise(g, t.value(b), Elementwise::mul));
        if (t.requires_grad(b)) t.accumulate(b, elementwise(g, t.value(a), Elementwise::mul));
      },
      "mul");
}

template <typename T>
Var concat_channels(Tape<T>& tape, std::span<const Var> parts) {
  std::vector<const Tensor<T>*> values;
  std::vector<std::int64_t> widths;
  for (Var p : parts) {
    values.push_back(&tape.value(p));
    widths.push_back(values.back()->c());
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return tape.record(
      lkaseg::concat_channels<T>(std::span<const Tensor<T>* const>(values)),
      std::span<const Var>(ins),
      [ins, widths](Tape<T>& t, const Tensor<T>& g) {
        std::int64_t c0 = 0;
        for (std::size_t i = 0; i < ins.size(); ++i) {
          if (t.requires_grad(ins[i])) t.accumulate(ins[i], lkaseg::slice_channels(g, c0, widths[i]));
          c0 += widths[i];
        }
      },
      "concat_channels");
}

template <typename T>
Var slice_channels(Tape<T>& tape, Var input, std::int64_t begin, std::int64_t count) {
  const Shape in = tape.value(input).shape();
  return tape.record(
      lkaseg::slice_channels(tape.value(input), begin, count), {input},
      [=](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T> full(in);
        for (std::int64_t n = 0; n < in.n; ++n) {
          std::copy_n(g.plane(n, 0), count * in.plane(), full.plane(n, begin));
        }
        t.accumulate(input, full);
      },
      "slice_channels");
}

template <typename T>
Var sum(Tape<T>& tape, Var input) {
  double acc = 0.0;
  for (T v : tape.value(input).data()) acc += v;
  const Shape in = tape.value(input).shape();
  return tape.record(
      Tensor<T>::scalar(static_cast<T>(acc)), {input},
      [=](Tape<T>& t, const Tensor<T>& g) { t.accumulate(input, Tensor<T>::full(in, g[0])); },
      "sum");
}

template <typename T>
Var dot(Tape<T>& tape, Var input, const Tensor<T>& weights) {
  const Tensor<T>& x = tape.value(input);
  require_same_shape(x.shape(), weights.shape(), "dot");
  double acc = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) acc += static_cast<double>(x[i]) * weights[i];
  return tape.record(
      Tensor<T>::scalar(static_cast<T>(acc)), {input},
      [input, weights](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T> gi = weights;
        for (T& v : gi.data()) v *= g[0];
        t.accumulate(input, gi);
      },
      "dot");
}

template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, const LabelMap& labels,
                          std::int32_t ignore_label) {
  auto r = lkaseg::softmax_cross_entropy(tape.value(logits), labels, ignore_label);
  auto grad = std::make_shared<Tensor<T>>(std::move(r.grad));
  return tape.record(
      Tensor<T>::scalar(static_cast<T>(r.loss)), {logits},
      [=](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T> gi = *grad;
        for (T& v : gi.data()) v *= g[0];
        t.accumulate(logits, gi);
      },
      "softmax_cross_entropy");
}

namespace {

template <typename T>
Tensor<T> blend(const Tensor<T>& a, const Tensor<T>& b, T alpha) {
  require_same_shape(a.shape(), b.shape(), "blend");
  Tensor<T> out(a.shape());
  const T beta = T(1) - alpha;
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = alpha * a[i] + beta * b[i];
  return out;
}

template <typename T>
Tensor<T> scaled(const Tensor<T>& g, T s) {
  Tensor<T> out = g;
  for (T& v : out.data()) v *= s;
  return out;
}

}  // namespace

template <typename T>
Var gated_blend(Tape<T>& tape, Var a, Var b, Var raw) {
  if (tape.value(raw).numel() != 1) throw ShapeError("gated_blend: gate must be a scalar");
  const double r = tape.value(raw)[0];
  const double alpha = r >= 0 ? 1.0 / (1.0 + std::exp(-r)) : std::exp(r) / (1.0 + std::exp(r));
  const T alpha_t = static_cast<T>(alpha);
  return tape.record(
      blend(tape.value(a), tape.value(b), alpha_t), {a, b, raw},
      [=](Tape<T>& t, const Tensor<T>& g) {
        if (t.requires_grad(a)) t.accumulate(a, scaled(g, alpha_t));
        if (t.requires_grad(b)) t.accumulate(b, scaled(g, static_cast<T>(1.0 - alpha)));
        if (t.requires_grad(raw)) {
          const Tensor<T>& va = t.value(a);
          const Tensor<T>& vb = t.value(b);
          double acc = 0.0;
          for (std::int64_t i = 0; i < g.numel(); ++i) {
            acc += static_cast<double>(g[i]) * (static_cast<double>(va[i]) - vb[i]);
          }
          t.accumulate(raw, Tensor<T>::scalar(static_cast<T>(acc * alpha * (1.0 - alpha))));
        }
      },
      "gated_blend");
}

template <typename T>
Var fixed_blend(Tape<T>& tape, Var a, Var b, T alpha) {
  return tape.record(
      blend(tape.value(a), tape.value(b), alpha), {a, b},
      [=](Tape<T>& t, const Tensor<T>& g) {
        if (t.requires_grad(a)) t.accumulate(a, scaled(g, alpha));
        if (t.requires_grad(b)) t.accumulate(b, scaled(g, T(1) - alpha));
      },
      "fixed_blend");
}

#define LKASEG_INSTANTIATE_AD(T)                                                              \
  template Var conv2d(Tape<T>&, Var, Var, std::optional<Var>, const ConvSpec&);              \
  template Var max_pool2d(Tape<T>&, Var, int, int, int);                                      \
  template Var bilinear_resize(Tape<T>&, Var, std::int64_t, std::int64_t);                    \
  template Var batch_norm(Tape<T>&, Var, Var, Var, Tensor<T>&, Tensor<T>&, Mode, double,     \
                          double);                                                              \
  template Var activation(Tape<T>&, Var, Activation);                                         \
  template Var add(Tape<T>&, Var, Var);                                                       \
  template Var mul(Tape<T>&, Var, Var);                                                       \
  template Var concat_channels(Tape<T>&, std::span<const Var>);                               \
  template Var slice_channels(Tape<T>&, Var, std::int64_t, std::int64_t);                     \
  template Var sum(Tape<T>&, Var);                                                            \
  template Var dot(Tape<T>&, Var, const Tensor<T>&);                                          \
  template Var softmax_cross_entropy(Tape<T>&, Var, const LabelMap&, std::int32_t);          \
  template Var gated_blend(Tape<T>&, Var, Var, Var);                                          \
  template Var fixed_blend(Tape<T>&, Var, Var, T);

LKASEG_INSTANTIATE_AD(float)
LKASEG_INSTANTIATE_AD(double)

#undef LKASEG_INSTANTIATE_AD

}  // namespace ad

}  // namespace lkaseg

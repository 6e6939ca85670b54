#include "lkaseg/ops.hpp"

#include <array>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace lkaseg {
namespace {

// Range [lo, hi) of output indices o for which o * stride + offset lands in
// [0, extent).
struct Range {
  std::int64_t lo;
  std::int64_t hi;
};

Range valid_range(std::int64_t offset, std::int64_t stride, std::int64_t extent,
                  std::int64_t out_extent) {
  std::int64_t lo = 0;
  if (offset < 0) lo = (-offset + stride - 1) / stride;
  const std::int64_t last = extent - 1 - offset;
  std::int64_t hi = last < 0 ? 0 : last / stride + 1;
  hi = std::min(hi, out_extent);
  return {lo, std::max(lo, hi)};
}

template <typename T>
void validate_conv(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                   const ConvSpec& s) {
  if (s.kernel_h < 1 || s.kernel_w < 1 || s.stride < 1 || s.dilation < 1 || s.groups < 1 ||
      s.padding < 0) {
    throw ShapeError("conv2d: invalid ConvSpec");
  }
  const Shape& x = input.shape();
  const Shape& w = weight.shape();
  if (x.c % s.groups != 0 || w.n % s.groups != 0) {
    throw ShapeError(fmt::format("conv2d: groups {} must divide input channels {} and output "
                                 "channels {}",
                                 s.groups, x.c, w.n));
  }
  if (w.c != x.c / s.groups || w.h != s.kernel_h || w.w != s.kernel_w) {
    throw ShapeError(fmt::format("conv2d: weight {} inconsistent with input {} and spec", w.str(),
                                 x.str()));
  }
  if (bias != nullptr && bias->numel() != w.n) {
    throw ShapeError(fmt::format("conv2d: bias has {} values, expected {}", bias->numel(), w.n));
  }
  if (s.out_h(x.h) < 1 || s.out_w(x.w) < 1) {
    throw ShapeError(fmt::format("conv2d: non-positive output size for input {}", x.str()));
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

// ---- convolution ----------------------------------------------------------

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                 const ConvSpec& spec) {
  validate_conv(input, weight, bias, spec);
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  const std::int64_t oh = spec.out_h(xs.h);
  const std::int64_t ow = spec.out_w(xs.w);
  const std::int64_t cin_g = xs.c / spec.groups;
  const std::int64_t cout_g = ws.n / spec.groups;
  const std::int64_t s = spec.stride;

  Tensor<T> out(Shape{xs.n, ws.n, oh, ow});
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t co = 0; co < ws.n; ++co) {
      T* dst = out.plane(n, co);
      if (bias != nullptr) std::fill(dst, dst + oh * ow, (*bias)[co]);
      const std::int64_t group = co / cout_g;
      for (std::int64_t cig = 0; cig < cin_g; ++cig) {
        const T* src = input.plane(n, group * cin_g + cig);
        for (int ky = 0; ky < spec.kernel_h; ++ky) {
          const std::int64_t dy = std::int64_t{ky} * spec.dilation - spec.padding;
          const Range ry = valid_range(dy, s, xs.h, oh);
          for (int kx = 0; kx < spec.kernel_w; ++kx) {
            const std::int64_t dx = std::int64_t{kx} * spec.dilation - spec.padding;
            const Range rx = valid_range(dx, s, xs.w, ow);
            const T wv = weight.at(co, cig, ky, kx);
            for (std::int64_t oy = ry.lo; oy < ry.hi; ++oy) {
              T* out_row = dst + oy * ow;
              const T* in_row = src + (oy * s + dy) * xs.w + dx;
              if (s == 1) {
                for (std::int64_t ox = rx.lo; ox < rx.hi; ++ox) out_row[ox] += wv * in_row[ox];
              } else {
                for (std::int64_t ox = rx.lo; ox < rx.hi; ++ox) out_row[ox] += wv * in_row[ox * s];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, bool has_bias,
                               const Tensor<T>& grad_out, const ConvSpec& spec) {
  validate_conv<T>(input, weight, nullptr, spec);
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  const std::int64_t oh = spec.out_h(xs.h);
  const std::int64_t ow = spec.out_w(xs.w);
  require_same_shape(grad_out.shape(), Shape{xs.n, ws.n, oh, ow}, "conv2d_backward");
  const std::int64_t cin_g = xs.c / spec.groups;
  const std::int64_t cout_g = ws.n / spec.groups;
  const std::int64_t s = spec.stride;

  Conv2dGrads<T> g{Tensor<T>(xs), Tensor<T>(ws), {}};

  // input gradient: scatter each output gradient back through the taps
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t ci = 0; ci < xs.c; ++ci) {
      T* dst = g.input.plane(n, ci);
      const std::int64_t group = ci / cin_g;
      const std::int64_t cig = ci - group * cin_g;
      for (std::int64_t co = group * cout_g; co < (group + 1) * cout_g; ++co) {
        const T* go = grad_out.plane(n, co);
        for (int ky = 0; ky < spec.kernel_h; ++ky) {
          const std::int64_t dy = std::int64_t{ky} * spec.dilation - spec.padding;
          const Range ry = valid_range(dy, s, xs.h, oh);
          for (int kx = 0; kx < spec.kernel_w; ++kx) {
            const std::int64_t dx = std::int64_t{kx} * spec.dilation - spec.padding;
            const Range rx = valid_range(dx, s, xs.w, ow);
            const T wv = weight.at(co, cig, ky, kx);
            for (std::int64_t oy = ry.lo; oy < ry.hi; ++oy) {
              const T* go_row = go + oy * ow;
              T* in_row = dst + (oy * s + dy) * xs.w + dx;
              if (s == 1) {
                for (std::int64_t ox = rx.lo; ox < rx.hi; ++ox) in_row[ox] += wv * go_row[ox];
              } else {
                for (std::int64_t ox = rx.lo; ox < rx.hi; ++ox) in_row[ox * s] += wv * go_row[ox];
              }
            }
          }
        }
      }
    }
  }

  // weight gradient: lane-wise products into a row buffer, reduced in double
  std::vector<T> lane(static_cast<std::size_t>(ow));
  for (std::int64_t co = 0; co < ws.n; ++co) {
    const std::int64_t group = co / cout_g;
    for (std::int64_t cig = 0; cig < cin_g; ++cig) {
      const std::int64_t ci = group * cin_g + cig;
      for (int ky = 0; ky < spec.kernel_h; ++ky) {
        const std::int64_t dy = std::int64_t{ky} * spec.dilation - spec.padding;
        const Range ry = valid_range(dy, s, xs.h, oh);
        for (int kx = 0; kx < spec.kernel_w; ++kx) {
          const std::int64_t dx = std::int64_t{kx} * spec.dilation - spec.padding;
          const Range rx = valid_range(dx, s, xs.w, ow);
          std::fill(lane.begin(), lane.end(), T(0));
          for (std::int64_t n = 0; n < xs.n; ++n) {
            const T* go = grad_out.plane(n, co);
            const T* src = input.plane(n, ci);
            for (std::int64_t oy = ry.lo; oy < ry.hi; ++oy) {
              const T* go_row = go + oy * ow;
              const T* in_row = src + (oy * s + dy) * xs.w + dx;
              if (s == 1) {
                for (std::int64_t ox = rx.lo; ox < rx.hi; ++ox) lane[ox] += go_row[ox] * in_row[ox];
              } else {
                for (std::int64_t ox = rx.lo; ox < rx.hi; ++ox)
                  lane[ox] += go_row[ox] * in_row[ox * s];
              }
            }
          }
          double acc = 0.0;
          for (std::int64_t ox = rx.lo; ox < rx.hi; ++ox) acc += lane[ox];
          g.weight.at(co, cig, ky, kx) = static_cast<T>(acc);
        }
      }
    }
  }

  if (has_bias) {
    g.bias = Tensor<T>(Shape{ws.n, 1, 1, 1});
    for (std::int64_t co = 0; co < ws.n; ++co) {
      double acc = 0.0;
      for (std::int64_t n = 0; n < xs.n; ++n) {
        const T* go = grad_out.plane(n, co);
        for (std::int64_t i = 0; i < oh * ow; ++i) acc += go[i];
      }
      g.bias[co] = static_cast<T>(acc);
    }
  }
  return g;
}

// ---- pooling ----------------------------------------------------------------

namespace {

void validate_pool(const Shape& x, int kernel, int stride, int padding) {
  if (kernel < 1 || stride < 1 || padding < 0 || padding >= kernel) {
    throw ShapeError("max_pool2d: invalid kernel/stride/padding");
  }
  if (x.h + 2 * padding < kernel || x.w + 2 * padding < kernel) {
    throw ShapeError(fmt::format("max_pool2d: kernel {} larger than input {}", kernel, x.str()));
  }
}

std::int64_t pool_out(std::int64_t in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

}  // namespace

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input, int kernel, int stride, int padding) {
  const Shape& xs = input.shape();
  validate_pool(xs, kernel, stride, padding);
  const std::int64_t oh = pool_out(xs.h, kernel, stride, padding);
  const std::int64_t ow = pool_out(xs.w, kernel, stride, padding);
  Tensor<T> out(Shape{xs.n, xs.c, oh, ow});
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t c = 0; c < xs.c; ++c) {
      const T* src = input.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        const std::int64_t y0 = std::max<std::int64_t>(0, oy * stride - padding);
        const std::int64_t y1 = std::min<std::int64_t>(xs.h, oy * stride - padding + kernel);
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          const std::int64_t x0 = std::max<std::int64_t>(0, ox * stride - padding);
          const std::int64_t x1 = std::min<std::int64_t>(xs.w, ox * stride - padding + kernel);
          T best = -std::numeric_limits<T>::infinity();
          for (std::int64_t y = y0; y < y1; ++y)
            for (std::int64_t x = x0; x < x1; ++x) best = std::max(best, src[y * xs.w + x]);
          dst[oy * ow + ox] = best;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> max_pool2d_backward(const Tensor<T>& input, const Tensor<T>& grad_out, int kernel,
                              int stride, int padding) {
  const Shape& xs = input.shape();
  validate_pool(xs, kernel, stride, padding);
  const std::int64_t oh = pool_out(xs.h, kernel, stride, padding);
  const std::int64_t ow = pool_out(xs.w, kernel, stride, padding);
  require_same_shape(grad_out.shape(), Shape{xs.n, xs.c, oh, ow}, "max_pool2d_backward");
  Tensor<T> gin(xs);
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t c = 0; c < xs.c; ++c) {
      const T* src = input.plane(n, c);
      const T* go = grad_out.plane(n, c);
      T* dst = gin.plane(n, c);
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        const std::int64_t y0 = std::max<std::int64_t>(0, oy * stride - padding);
        const std::int64_t y1 = std::min<std::int64_t>(xs.h, oy * stride - padding + kernel);
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          const std::int64_t x0 = std::max<std::int64_t>(0, ox * stride - padding);
          const std::int64_t x1 = std::min<std::int64_t>(xs.w, ox * stride - padding + kernel);
          std::int64_t arg = y0 * xs.w + x0;
          for (std::int64_t y = y0; y < y1; ++y)
            for (std::int64_t x = x0; x < x1; ++x)
              if (src[y * xs.w + x] > src[arg]) arg = y * xs.w + x;
          dst[arg] += go[oy * ow + ox];
        }
      }
    }
  }
  return gin;
}

// ---- bilinear -----------------------------------------------------------------

namespace {

struct Tap {
  std::int64_t i0;
  std::int64_t i1;
  double frac;
};

std::vector<Tap> bilinear_taps(std::int64_t in, std::int64_t out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double u = (static_cast<double>(o) + 0.5) * scale - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::int64_t>(std::floor(u));
    taps[static_cast<std::size_t>(o)] = {i0, std::min(i0 + 1, in - 1),
                                         u - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, std::int64_t out_h, std::int64_t out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: target size must be positive");
  const Shape& xs = input.shape();
  if (out_h == xs.h && out_w == xs.w) return input;
  const auto ty = bilinear_taps(xs.h, out_h);
  const auto tx = bilinear_taps(xs.w, out_w);
  Tensor<T> out(Shape{xs.n, xs.c, out_h, out_w});
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t c = 0; c < xs.c; ++c) {
      const T* src = input.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::int64_t oy = 0; oy < out_h; ++oy) {
        const Tap& a = ty[static_cast<std::size_t>(oy)];
        const T ly = static_cast<T>(a.frac);
        const T* r0 = src + a.i0 * xs.w;
        const T* r1 = src + a.i1 * xs.w;
        for (std::int64_t ox = 0; ox < out_w; ++ox) {
          const Tap& b = tx[static_cast<std::size_t>(ox)];
          const T lx = static_cast<T>(b.frac);
          // lerp in difference form keeps constants exact
          const T top = r0[b.i0] + lx * (r0[b.i1] - r0[b.i0]);
          const T bot = r1[b.i0] + lx * (r1[b.i1] - r1[b.i0]);
          dst[oy * out_w + ox] = top + ly * (bot - top);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> bilinear_resize_backward(const Tensor<T>& grad_out, std::int64_t in_h,
                                   std::int64_t in_w) {
  const Shape& gs = grad_out.shape();
  if (gs.h == in_h && gs.w == in_w) return grad_out;
  const auto ty = bilinear_taps(in_h, gs.h);
  const auto tx = bilinear_taps(in_w, gs.w);
  Tensor<T> gin(Shape{gs.n, gs.c, in_h, in_w});
  for (std::int64_t n = 0; n < gs.n; ++n) {
    for (std::int64_t c = 0; c < gs.c; ++c) {
      const T* go = grad_out.plane(n, c);
      T* dst = gin.plane(n, c);
      for (std::int64_t oy = 0; oy < gs.h; ++oy) {
        const Tap& a = ty[static_cast<std::size_t>(oy)];
        const T ly = static_cast<T>(a.frac);
        T* r0 = dst + a.i0 * in_w;
        T* r1 = dst + a.i1 * in_w;
        for (std::int64_t ox = 0; ox < gs.w; ++ox) {
          const Tap& b = tx[static_cast<std::size_t>(ox)];
          const T lx = static_cast<T>(b.frac);
          const T g = go[oy * gs.w + ox];
          const T gtop = g * (T(1) - ly);
          const T gbot = g * ly;
          r0[b.i0] += gtop * (T(1) - lx);
          r0[b.i1] += gtop * lx;
          r1[b.i0] += gbot * (T(1) - lx);
          r1[b.i1] += gbot * lx;
        }
      }
    }
  }
  return gin;
}

// ---- batch norm -----------------------------------------------------------------

template <typename T>
BatchNormForward<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                               const Tensor<T>& beta, Tensor<T>& running_mean,
                               Tensor<T>& running_var, Mode mode, double momentum,
                               double epsilon) {
  const Shape& xs = input.shape();
  if (epsilon <= 0.0) throw std::invalid_argument("batch_norm: epsilon must be positive");
  const std::array<const Tensor<T>*, 4> per_channel{&gamma, &beta, &running_mean, &running_var};
  for (const Tensor<T>* t : per_channel) {
    if (t->numel() != xs.c) {
      throw ShapeError(fmt::format("batch_norm: per-channel tensor has {} values, expected {}",
                                   t->numel(), xs.c));
    }
  }
  const std::int64_t plane = xs.plane();
  const std::int64_t count = xs.n * plane;
  BatchNormForward<T> fwd{Tensor<T>(xs), std::vector<double>(static_cast<std::size_t>(xs.c)),
                          std::vector<double>(static_cast<std::size_t>(xs.c))};

  for (std::int64_t c = 0; c < xs.c; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::train) {
      if (count < 2) {
        throw ShapeError("batch_norm: train mode needs more than one value per channel, got " +
                         xs.str());
      }
      for (std::int64_t n = 0; n < xs.n; ++n) {
        const T* p = input.plane(n, c);
        for (std::int64_t i = 0; i < plane; ++i) mean += p[i];
      }
      mean /= static_cast<double>(count);
      for (std::int64_t n = 0; n < xs.n; ++n) {
        const T* p = input.plane(n, c);
        for (std::int64_t i = 0; i < plane; ++i) {
          const double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
      running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * mean);
      running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * unbiased);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + epsilon);
    fwd.mean[static_cast<std::size_t>(c)] = mean;
    fwd.inv_std[static_cast<std::size_t>(c)] = inv_std;
    const double scale = static_cast<double>(gamma[c]) * inv_std;
    const double shift = beta[c];
    for (std::int64_t n = 0; n < xs.n; ++n) {
      const T* p = input.plane(n, c);
      T* q = fwd.output.plane(n, c);
      for (std::int64_t i = 0; i < plane; ++i) q[i] = static_cast<T>((p[i] - mean) * scale + shift);
    }
  }
  return fwd;
}

template <typename T>
BatchNormGrads<T> batch_norm_backward(const Tensor<T>& input, const Tensor<T>& gamma,
                                      const BatchNormForward<T>& forward,
                                      const Tensor<T>& grad_out, Mode mode) {
  const Shape& xs = input.shape();
  require_same_shape(grad_out.shape(), xs, "batch_norm_backward");
  const std::int64_t plane = xs.plane();
  const double count = static_cast<double>(xs.n * plane);
  BatchNormGrads<T> g{Tensor<T>(xs), Tensor<T>(gamma.shape()), Tensor<T>(gamma.shape())};
  for (std::int64_t c = 0; c < xs.c; ++c) {
    const double mean = forward.mean[static_cast<std::size_t>(c)];
    const double inv_std = forward.inv_std[static_cast<std::size_t>(c)];
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::int64_t n = 0; n < xs.n; ++n) {
      const T* p = input.plane(n, c);
      const T* go = grad_out.plane(n, c);
      for (std::int64_t i = 0; i < plane; ++i) {
        sum_g += go[i];
        sum_gx += go[i] * (p[i] - mean) * inv_std;
      }
    }
    g.gamma[c] = static_cast<T>(sum_gx);
    g.beta[c] = static_cast<T>(sum_g);
    const double gm = gamma[c];
    for (std::int64_t n = 0; n < xs.n; ++n) {
      const T* p = input.plane(n, c);
      const T* go = grad_out.plane(n, c);
      T* dst = g.input.plane(n, c);
      if (mode == Mode::train) {
        for (std::int64_t i = 0; i < plane; ++i) {
          const double xhat = (p[i] - mean) * inv_std;
          dst[i] = static_cast<T>(gm * inv_std / count *
                                  (count * go[i] - sum_g - xhat * sum_gx));
        }
      } else {
        for (std::int64_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(gm * inv_std * go[i]);
      }
    }
  }
  return g;
}

// ---- activations --------------------------------------------------------------------

template <typename T>
Tensor<T> activation(const Tensor<T>& input, Activation kind) {
  Tensor<T> out(input.shape());
  const auto src = input.data();
  auto dst = out.data();
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
      break;
    case Activation::gelu: {
      const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = T(0.5) * src[i] * (T(1) + std::erf(src[i] * inv_sqrt2));
      }
      break;
    }
    case Activation::sigmoid:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigmoid_scalar(src[i]);
      break;
  }
  return out;
}

template <typename T>
Tensor<T> activation_backward(const Tensor<T>& input, const Tensor<T>& output,
                              const Tensor<T>& grad_out, Activation kind) {
  require_same_shape(grad_out.shape(), input.shape(), "activation_backward");
  Tensor<T> gin(input.shape());
  const auto x = input.data();
  const auto y = output.data();
  const auto go = grad_out.data();
  auto dst = gin.data();
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] > T(0) ? go[i] : T(0);
      break;
    case Activation::gelu: {
      const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
      const double inv_sqrt2pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
        dst[i] = static_cast<T>(go[i] * (cdf + v * pdf));
      }
      break;
    }
    case Activation::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) dst[i] = go[i] * y[i] * (T(1) - y[i]);
      break;
  }
  return gin;
}

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, Elementwise kind) {
  require_same_shape(a.shape(), b.shape(), "elementwise");
  Tensor<T> out(a.shape());
  const auto x = a.data();
  const auto y = b.data();
  auto dst = out.data();
  if (kind == Elementwise::add) {
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] + y[i];
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] * y[i];
  }
  return out;
}

// ---- channel layout -------------------------------------------------------------------

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const Shape first = parts.front()->shape();
  std::int64_t channels = 0;
  for (const Tensor<T>* p : parts) {
    const Shape& s = p->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError(fmt::format("concat_channels: part {} does not match {} spatially",
                                   s.str(), first.str()));
    }
    channels += s.c;
  }
  Tensor<T> out(Shape{first.n, channels, first.h, first.w});
  const std::int64_t plane = first.plane();
  for (std::int64_t n = 0; n < first.n; ++n) {
    std::int64_t c0 = 0;
    for (const Tensor<T>* p : parts) {
      std::copy_n(p->plane(n, 0), p->c() * plane, out.plane(n, c0));
      c0 += p->c();
    }
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::int64_t begin, std::int64_t count) {
  const Shape& xs = input.shape();
  if (begin < 0 || count < 1 || begin + count > xs.c) {
    throw ShapeError(fmt::format("slice_channels: [{}, {}) outside {} channels", begin,
                                 begin + count, xs.c));
  }
  Tensor<T> out(Shape{xs.n, count, xs.h, xs.w});
  for (std::int64_t n = 0; n < xs.n; ++n) {
    std::copy_n(input.plane(n, begin), count * xs.plane(), out.plane(n, 0));
  }
  return out;
}

// ---- loss ------------------------------------------------------------------------------

template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>& logits, const LabelMap& labels,
                                            std::int32_t ignore_label) {
  const Shape& s = logits.shape();
  if (labels.n != s.n || labels.h != s.h || labels.w != s.w) {
    throw ShapeError(fmt::format("softmax_cross_entropy: labels {}x{}x{} vs logits {}", labels.n,
                                 labels.h, labels.w, s.str()));
  }
  CrossEntropyResult<T> r{0.0, Tensor<T>(s), 0};
  const std::int64_t plane = s.plane();
  std::vector<double> prob(static_cast<std::size_t>(s.c));
  double total = 0.0;
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t i = 0; i < plane; ++i) {
      const std::int32_t label = labels.data[static_cast<std::size_t>(n * plane + i)];
      if (label == ignore_label) continue;
      if (label < 0 || label >= s.c) {
        throw std::invalid_argument(
            fmt::format("softmax_cross_entropy: label {} outside [0, {})", label, s.c));
      }
      double peak = -std::numeric_limits<double>::infinity();
      for (std::int64_t c = 0; c < s.c; ++c) peak = std::max<double>(peak, logits.plane(n, c)[i]);
      double z = 0.0;
      for (std::int64_t c = 0; c < s.c; ++c) {
        prob[static_cast<std::size_t>(c)] = std::exp(logits.plane(n, c)[i] - peak);
        z += prob[static_cast<std::size_t>(c)];
      }
      total += std::log(z) - (logits.plane(n, label)[i] - peak);
      for (std::int64_t c = 0; c < s.c; ++c) {
        r.grad.plane(n, c)[i] = static_cast<T>(prob[static_cast<std::size_t>(c)] / z);
      }
      r.grad.plane(n, label)[i] -= T(1);
      ++r.counted;
    }
  }
  if (r.counted == 0) throw std::invalid_argument("softmax_cross_entropy: every pixel is ignored");
  r.loss = total / static_cast<double>(r.counted);
  const T inv = static_cast<T>(1.0 / static_cast<double>(r.counted));
  for (T& v : r.grad.data()) v *= inv;
  return r;
}

template <typename T>
LabelMap argmax_channels(const Tensor<T>& logits) {
  const Shape& s = logits.shape();
  LabelMap out(s.n, s.h, s.w);
  const std::int64_t plane = s.plane();
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t i = 0; i < plane; ++i) {
      std::int32_t best = 0;
      T best_v = logits.plane(n, 0)[i];
      for (std::int64_t c = 1; c < s.c; ++c) {
        if (logits.plane(n, c)[i] > best_v) {
          best_v = logits.plane(n, c)[i];
          best = static_cast<std::int32_t>(c);
        }
      }
      out.data[static_cast<std::size_t>(n * plane + i)] = best;
    }
  }
  return out;
}

#define LKASEG_INSTANTIATE_OPS(T)                                                             \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,           \
                            const ConvSpec&);                                                  \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, bool,          \
                                          const Tensor<T>&, const ConvSpec&);                 \
  template Tensor<T> max_pool2d(const Tensor<T>&, int, int, int);                             \
  template Tensor<T> max_pool2d_backward(const Tensor<T>&, const Tensor<T>&, int, int, int);  \
  template Tensor<T> bilinear_resize(const Tensor<T>&, std::int64_t, std::int64_t);          \
  template Tensor<T> bilinear_resize_backward(const Tensor<T>&, std::int64_t, std::int64_t); \
  template BatchNormForward<T> batch_norm(const Tensor<T>&, const Tensor<T>&,                \
                                          const Tensor<T>&, Tensor<T>&, Tensor<T>&, Mode,      \
                                          double, double);                                     \
  template BatchNormGrads<T> batch_norm_backward(const Tensor<T>&, const Tensor<T>&,         \
                                                 const BatchNormForward<T>&,                  \
                                                 const Tensor<T>&, Mode);                     \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                \
  template Tensor<T> activation_backward(const Tensor<T>&, const Tensor<T>&,                 \
                                         const Tensor<T>&, Activation);                        \
  template Tensor<T> elementwise(const Tensor<T>&, const Tensor<T>&, Elementwise);           \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);                      \
  template Tensor<T> slice_channels(const Tensor<T>&, std::int64_t, std::int64_t);           \
  template CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>&, const LabelMap&,    \
                                                       std::int32_t);                          \
  template LabelMap argmax_channels(const Tensor<T>&);

LKASEG_INSTANTIATE_OPS(float)
LKASEG_INSTANTIATE_OPS(double)

#undef LKASEG_INSTANTIATE_OPS

}  // namespace lkaseg

#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Deliberately naive: no shared code with the library kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "lkaseg/ops.hpp"
#include "lkaseg/rng.hpp"
#include "lkaseg/tensor.hpp"

namespace lkaseg::testing_oracle {

inline Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

struct ConvCase {
  Shape input;
  Shape weight;
  ConvSpec spec;
};

inline int pick(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

/// Random grouped/dilated/strided/padded convolution with a valid output.
inline ConvCase random_conv_case(Rng& rng) {
  for (;;) {
    const int groups = pick(rng, 1, 3);
    const int cin = groups * pick(rng, 1, 3);
    const int cout = groups * pick(rng, 1, 3);
    ConvSpec s;
    s.kernel_h = pick(rng, 1, 5);
    s.kernel_w = pick(rng, 1, 5);
    s.stride = pick(rng, 1, 3);
    s.dilation = pick(rng, 1, 3);
    s.padding = pick(rng, 0, 3);
    s.groups = groups;
    const Shape in{pick(rng, 1, 2), cin, pick(rng, 3, 11), pick(rng, 3, 11)};
    if (s.out_h(in.h) < 1 || s.out_w(in.w) < 1) continue;
    if (in.h + 2 * s.padding < s.dilation * (s.kernel_h - 1) + 1) continue;
    if (in.w + 2 * s.padding < s.dilation * (s.kernel_w - 1) + 1) continue;
    return ConvCase{in, Shape{cout, cin / groups, s.kernel_h, s.kernel_w}, s};
  }
}

/// out[n,o,y,x] = b[o] + sum_{c in group, i, j} in[n,c,y*s-p+i*d, x*s-p+j*d] * w[o,c',i,j]
inline Tensor<double> conv2d_direct(const Tensor<double>& in, const Tensor<double>& w,
                                    const Tensor<double>* b, const ConvSpec& s) {
  const std::int64_t cout = w.n();
  const std::int64_t cin_g = w.c();
  const std::int64_t cout_g = cout / s.groups;
  const Shape os{in.n(), cout, s.out_h(in.h()), s.out_w(in.w())};
  Tensor<double> out(os);
  for (std::int64_t n = 0; n < os.n; ++n) {
    for (std::int64_t o = 0; o < cout; ++o) {
      const std::int64_t g = o / cout_g;
      for (std::int64_t y = 0; y < os.h; ++y) {
        for (std::int64_t x = 0; x < os.w; ++x) {
          double acc = b ? (*b)[o] : 0.0;
          for (std::int64_t c = 0; c < cin_g; ++c) {
            for (std::int64_t i = 0; i < s.kernel_h; ++i) {
              for (std::int64_t j = 0; j < s.kernel_w; ++j) {
                const std::int64_t iy = y * s.stride - s.padding + i * s.dilation;
                const std::int64_t ix = x * s.stride - s.padding + j * s.dilation;
                if (iy < 0 || iy >= in.h() || ix < 0 || ix >= in.w()) continue;
                acc += in.at(n, g * cin_g + c, iy, ix) * w.at(o, c, i, j);
              }
            }
          }
          out.at(n, o, y, x) = acc;
        }
      }
    }
  }
  return out;
}

/// Elementwise |got - want| / max(|want|, 1e-3 * max|want|).
inline double max_rel_error(const Tensor<double>& got, const Tensor<double>& want) {
  double scale = 0.0;
  for (double v : want.values()) scale = std::max(scale, std::abs(v));
  const double floor = std::max(1e-3 * scale, 1e-300);
  double worst = 0.0;
  for (std::int64_t i = 0; i < got.numel(); ++i) {
    const double denom = std::max(std::abs(want[i]), floor);
    worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
  }
  return worst;
}

/// Phi(x) = 1/2 + integral_0^x phi(t) dt, composite Simpson.
inline double normal_cdf_simpson(double x, int intervals = 2000) {
  const auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
  const double h = x / intervals;
  double s = phi(0.0) + phi(x);
  for (int k = 1; k < intervals; ++k) s += (k % 2 ? 4.0 : 2.0) * phi(k * h);
  return 0.5 + s * h / 3.0;
}

}  // namespace lkaseg::testing_oracle

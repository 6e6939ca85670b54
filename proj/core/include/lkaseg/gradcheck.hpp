#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lkaseg/tensor.hpp"

namespace lkaseg {

struct GradCheckReport {
  std::string label;
  std::int64_t checked = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Relative errors are taken against max(|analytic|, |numeric|, floor)
  /// where floor = floor_fraction * max_i |numeric_i|, so entries that are
  /// tiny compared to the gradient's scale are judged on that scale.
  double floor_fraction = 1e-3;
};

/// Central differences at the given flat indices.
std::vector<double> numeric_gradient(const std::function<double(const Tensor<double>&)>& f,
                                     const Tensor<double>& point,
                                     std::span<const std::int64_t> indices,
                                     const GradCheckOptions& options);

/// Compare analytic[indices] with precomputed numeric values. The relative
/// error floor is max(floor_fraction * scale, tiny) where `scale` is the
/// largest |numeric| of the check (pass a larger scale when several tensors
/// belong to one function).
GradCheckReport compare_gradients(const Tensor<double>& analytic,
                                  std::span<const std::int64_t> indices,
                                  std::span<const double> numeric,
                                  const GradCheckOptions& options, double scale);

/// Compare an analytic gradient of scalar `f` at `point` with central
/// differences. When `indices` is non-empty only those flat entries are
/// probed; otherwise every entry is.
GradCheckReport finite_diff_check(const std::function<double(const Tensor<double>&)>& f,
                                  const Tensor<double>& point, const Tensor<double>& analytic,
                                  const GradCheckOptions& options = {},
                                  std::span<const std::int64_t> indices = {});

/// Central-difference estimate of d f / d point[index].
double central_difference(const std::function<double(const Tensor<double>&)>& f,
                          const Tensor<double>& point, std::int64_t index, double step);

std::string format_report(const GradCheckReport& report);

}  // namespace lkaseg

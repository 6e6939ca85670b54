#include "lkaseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

namespace lkaseg {

double central_difference(const std::function<double(const Tensor<double>&)>& f,
                          const Tensor<double>& point, std::int64_t index, double step) {
  Tensor<double> probe = point;
  const double x0 = probe[index];
  probe[index] = x0 + step;
  const double up = f(probe);
  probe[index] = x0 - step;
  const double down = f(probe);
  return (up - down) / (2.0 * step);
}

std::vector<double> numeric_gradient(const std::function<double(const Tensor<double>&)>& f,
                                     const Tensor<double>& point,
                                     std::span<const std::int64_t> indices,
                                     const GradCheckOptions& options) {
  std::vector<double> numeric(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    numeric[k] = central_difference(f, point, indices[k], options.step);
  }
  return numeric;
}

GradCheckReport compare_gradients(const Tensor<double>& analytic,
                                  std::span<const std::int64_t> indices,
                                  std::span<const double> numeric,
                                  const GradCheckOptions& options, double scale) {
  for (double n : numeric) scale = std::max(scale, std::abs(n));
  const double floor = std::max(options.floor_fraction * scale, 1e-300);
  GradCheckReport r;
  r.tolerance = options.tolerance;
  r.checked = static_cast<std::int64_t>(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double a = analytic[indices[k]];
    const double n = numeric[k];
    const double abs_err = std::abs(a - n);
    const double rel_err = abs_err / std::max({std::abs(a), std::abs(n), floor});
    r.max_abs_error = std::max(r.max_abs_error, abs_err);
    if (rel_err > r.max_rel_error || r.worst_index < 0) {
      r.max_rel_error = std::max(r.max_rel_error, rel_err);
      r.worst_index = indices[k];
      r.worst_analytic = a;
      r.worst_numeric = n;
    }
  }
  r.passed = r.max_rel_error <= options.tolerance;
  return r;
}

GradCheckReport finite_diff_check(const std::function<double(const Tensor<double>&)>& f,
                                  const Tensor<double>& point, const Tensor<double>& analytic,
                                  const GradCheckOptions& options,
                                  std::span<const std::int64_t> indices) {
  require_same_shape(point.shape(), analytic.shape(), "finite_diff_check");
  std::vector<std::int64_t> all;
  if (indices.empty()) {
    all.resize(static_cast<std::size_t>(point.numel()));
    for (std::int64_t i = 0; i < point.numel(); ++i) all[static_cast<std::size_t>(i)] = i;
    indices = all;
  }
  const std::vector<double> numeric = numeric_gradient(f, point, indices, options);
  return compare_gradients(analytic, indices, numeric, options, 0.0);
}

std::string format_report(const GradCheckReport& r) {
  std::string out =
      fmt::format("{:<40} {:>6} entries  max_abs {:.3e}  max_rel {:.3e}  tol {:.1e}  {}", r.label,
                  r.checked, r.max_abs_error, r.max_rel_error, r.tolerance,
                  r.passed ? "PASS" : "FAIL");
  if (!r.passed) {
    out += fmt::format("  (index {}: analytic {:.6e}, numeric {:.6e})", r.worst_index,
                       r.worst_analytic, r.worst_numeric);
  }
  return out;
}

}  // namespace lkaseg
